"""Exact hard-decision distortion of a relay code and its source/network split.

All three cost variants share one representation. For destination d, let
U(I, r) = P(I_{S_d}) P(r | I_{S_d}). With observation matrices Hd (direct
links) and Hr (relay link), the MMSE network distortion is

    sum_s  E[C_s^2] - sum_{k, j} (Hd^T (U * C_s) Hr)[k, j]^2 / (Hd^T U Hr)[k, j]

Every cell c of the code table contributes a fixed vector ``V[c]`` to
Hd^T U (and to Hd^T (U * C_s)), placed in the column of its relay index
after multiplication by Hr. Changing one table entry is then a rank-1
update of ``M = V^T onehot(f) Hr``.

Variants:
  * ``full``: every link at its own SNR (hard decisions at relay and destination).
  * ``c3``:   source-relay and relay-destination links noiseless.
  * ``c4``:   as ``c3`` and direct links carry no information.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.integrate import quad

from . import channel as ch
from .decoder import ChannelSnrs, DecoderContext, codebook_matrix, joint_prior
from .quantizer import ScalarQuantizer, source_distortion
from .topology import NetworkTopology

VARIANTS = ("full", "c3", "c4")
BRUTE_FORCE_LIMIT = 10**7


@dataclass
class DistortionReport:
    d_total: float
    d_sources: float
    d_network: float
    breakdown: dict  # (destination, source) -> (d_sources part, d_network part), unnormalised
    variant: str = "full"

    @property
    def rsnr_db(self) -> float:
        return float("inf") if self.d_total <= 0 else 10 * np.log10(1.0 / self.d_total)

    def to_dict(self) -> dict:
        return {
            "d_total": self.d_total,
            "d_sources": self.d_sources,
            "d_network": self.d_network,
            "variant": self.variant,
            "breakdown": [
                {"destination": d, "source": s, "d_sources": a, "d_network": b}
                for (d, s), (a, b) in sorted(self.breakdown.items())
            ],
        }


def _kron_all(mats: Sequence[np.ndarray]) -> np.ndarray:
    out = np.ones((1, 1))
    for m in mats:
        out = np.kron(out, m)
    return out


class CostModel:
    """Precomputed per-cell contributions for one network, channel state and variant."""

    def __init__(self, topology: NetworkTopology, quantizers: Sequence[ScalarQuantizer], relay_rate: int,
                 snrs: ChannelSnrs, variant: str = "full"):
        if variant not in VARIANTS:
            raise ValueError(f"unknown cost variant {variant!r}")
        self.topology = topology
        self.quantizers = tuple(quantizers)
        self.relay_rate = int(relay_rate)
        self.relay_size = 1 << self.relay_rate
        self.snrs = snrs
        self.variant = variant
        self.shape = tuple(q.levels for q in self.quantizers)
        self.n_cells = int(np.prod(self.shape))

        n = topology.num_sources
        if variant == "full":
            relay_ch = [ch.equivalent_relay_matrix(ch.bit_error_prob(snrs.source_relay(s)), q.rate, q.priors)
                        for s, q in enumerate(self.quantizers)]
        else:
            relay_ch = [np.eye(q.levels) for q in self.quantizers]
        marg = [q.priors @ m for q, m in zip(self.quantizers, relay_ch)]

        blocks, hr, offsets, ks, nss = [], [], [], [], []
        self.e_const = 0.0
        offset = 0
        for d in range(topology.num_destinations):
            sources = topology.sorted_decode_set(d)
            prior = joint_prior(self.quantizers, sources)
            books = codebook_matrix(self.quantizers, sources)
            if variant == "c4":
                hd = np.ones((prior.size, 1))
            else:
                hd = _kron_all([ch.hard_matrix_p(ch.bit_error_prob(snrs.source_dest(s, d)), self.quantizers[s].rate)
                                for s in sources])
            if variant == "full":
                hr.append(ch.hard_matrix_p(ch.bit_error_prob(snrs.relay_dest(d)), self.relay_rate))
            else:
                hr.append(np.eye(self.relay_size))
            w = self._cell_weights(sources, relay_ch, marg) * prior  # (n_cells, L_d)
            parts = [w @ hd] + [(w * books[:, k]) @ hd for k in range(len(sources))]
            blocks.append(np.concatenate(parts, axis=1))
            offsets.append(offset)
            ks.append(hd.shape[1])
            nss.append(len(sources))
            offset += blocks[-1].shape[1]
            self.e_const += float(sum(self.quantizers[s].priors @ self.quantizers[s].codebook ** 2 for s in sources))

        self.V = np.ascontiguousarray(np.concatenate(blocks, axis=1))
        self.hr = np.ascontiguousarray(np.stack(hr))
        self.dest_off = np.array(offsets, dtype=np.int64)
        self.dest_k = np.array(ks, dtype=np.int64)
        self.dest_ns = np.array(nss, dtype=np.int64)
        self.scale = 1.0 / topology.weight_total
        self.hr_identity = variant != "full"
        amax = max(float(np.max(b[:, :k])) for b, k in zip(blocks, ks))
        self.eps = 1e-13 * amax

    def _cell_weights(self, sources, relay_ch, marg) -> np.ndarray:
        """w[c, I] = prod_{s in S_d} Q_s[I_s, c_s] * prod_{j not in S_d} marg_j[c_j]."""
        keep = set(sources)
        w = np.ones((1, 1))
        for s in range(len(self.quantizers)):
            if s in keep:
                f = relay_ch[s].T  # (c_s, I_s)
                w = (w[:, None, :, None] * f[None, :, None, :]).reshape(w.shape[0] * f.shape[0], -1)
            else:
                w = (w[:, None, :] * marg[s][None, :, None]).reshape(w.shape[0] * marg[s].size, -1)
        return w

    def state(self, table) -> np.ndarray:
        """M matrix for a code table (any array of shape ``self.shape``)."""
        f = np.asarray(table, dtype=np.int64).ravel()
        if f.size != self.n_cells:
            raise ValueError("table does not match the source alphabets")
        rows = []
        for d in range(len(self.dest_off)):
            lo = self.dest_off[d]
            hi = lo + (1 + self.dest_ns[d]) * self.dest_k[d]
            onehot = np.zeros((self.n_cells, self.relay_size))
            onehot[np.arange(self.n_cells), f] = 1.0
            rows.append(self.V[:, lo:hi].T @ onehot @ self.hr[d])
        return np.ascontiguousarray(np.concatenate(rows, axis=0))

    def per_term(self, m: np.ndarray) -> dict[tuple[int, int], float]:
        """Unnormalised network distortion of each (destination, source) pair."""
        out = {}
        for d in range(len(self.dest_off)):
            lo, k = self.dest_off[d], self.dest_k[d]
            m0 = m[lo:lo + k]
            ok = m0 > self.eps
            for i, s in enumerate(self.topology.sorted_decode_set(d)):
                ms = m[lo + (1 + i) * k: lo + (2 + i) * k]
                ratio = np.divide(ms * ms, m0, out=np.zeros_like(m0), where=ok).sum()
                q = self.quantizers[s]
                out[(d, s)] = float(q.priors @ q.codebook ** 2) - float(ratio)
        return out

    def cost_from_state(self, m: np.ndarray) -> float:
        return self.scale * sum(self.per_term(m).values())

    def cost(self, table) -> float:
        return self.cost_from_state(self.state(table))

    def estimate_tables(self, m: np.ndarray) -> list[np.ndarray]:
        """Per destination, the MMSE estimates indexed by (direct obs, relay obs, source)."""
        out = []
        for d in range(len(self.dest_off)):
            lo, k, ns = self.dest_off[d], self.dest_k[d], self.dest_ns[d]
            m0 = m[lo:lo + k]
            ok = m0 > 0
            sources = self.topology.sorted_decode_set(d)
            mean = [float(self.quantizers[s].priors @ self.quantizers[s].codebook) for s in sources]
            g = np.empty((k, self.relay_size, ns))
            for i in range(ns):
                ms = m[lo + (1 + i) * k: lo + (2 + i) * k]
                g[:, :, i] = np.divide(ms, m0, out=np.full_like(m0, mean[i]), where=ok)
            out.append(g)
        return out



def cost_model_for(ctx: DecoderContext, variant: str) -> CostModel:
    return CostModel(ctx.topology, ctx.quantizers, ctx.relay_rate, ctx.snrs, variant)


def network_distortion(ctx: DecoderContext, variant: str = "full", observation_mode: str = "hard") -> float:
    """Network part of the average MSE under hard-decision observations."""
    if observation_mode != "hard":
        raise ValueError("exact evaluation supports hard observations only; use the simulator for soft")
    return cost_model_for(ctx, variant).cost(ctx.code.table)


def total_distortion(ctx: DecoderContext, variant: str = "full", observation_mode: str = "hard") -> DistortionReport:
    if observation_mode != "hard":
        raise ValueError("exact evaluation supports hard observations only; use the simulator for soft")
    model = cost_model_for(ctx, variant)
    terms = model.per_term(model.state(ctx.code.table))
    d_src = source_distortion(ctx.topology, ctx.quantizers)
    d_net = model.scale * sum(terms.values())
    breakdown = {(d, s): (ctx.quantizers[s].distortion, v) for (d, s), v in terms.items()}
    return DistortionReport(d_src + d_net, d_src, d_net, breakdown, variant)


def c4_cost(table: np.ndarray, relay_size: int, topology: NetworkTopology, quantizers: Sequence[ScalarQuantizer]) -> float:
    """Network distortion when the destinations see only the relay index (closed form)."""
    from .decoder import preimage_centroids

    g = preimage_centroids(np.asarray(table), relay_size, quantizers)
    n = topology.num_sources
    prior = joint_prior(quantizers, range(n))
    books = codebook_matrix(quantizers, range(n))
    err = (books - g[np.asarray(table).ravel()]) ** 2  # (cells, N)
    per_source = prior @ err
    total = sum(per_source[s] for ds in topology.decode_sets for s in ds)
    return float(total / topology.weight_total)


@lru_cache(maxsize=64)
def _raw_moments(q_key) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    boundaries, variance = q_key
    sigma = np.sqrt(variance)
    edges = [-np.inf, *boundaries, np.inf]
    pdf = lambda x: np.exp(-0.5 * x * x / variance) / np.sqrt(2 * np.pi * variance)
    p, m1, m2 = [], [], []
    for a, b in zip(edges[:-1], edges[1:]):
        a_ = max(a, -40 * sigma)
        b_ = min(b, 40 * sigma)
        opts = dict(epsabs=1e-15, epsrel=1e-13, limit=200)
        p.append(quad(pdf, a_, b_, **opts)[0])
        m1.append(quad(lambda x: x * pdf(x), a_, b_, **opts)[0])
        m2.append(quad(lambda x: x * x * pdf(x), a_, b_, **opts)[0])
    return np.array(p), np.array(m1), np.array(m2)


def raw_moments(q: ScalarQuantizer):
    """Cell integrals of p(x), x p(x) and x^2 p(x) by adaptive quadrature."""
    return _raw_moments((tuple(float(b) for b in q.boundaries), float(q.variance)))


def brute_force_distortion(ctx: DecoderContext, return_cross_term: bool = False):
    """Direct average MSE of the full hard-decision pipeline.

    Enumerates the joint law of sent indices, relay decisions and all
    hard observations, forms each MMSE estimate by summing that joint law,
    and integrates (x - estimate)^2 over the quantiser cells. Returns the
    total, or ``(total, cross_term)`` where the cross term is the mixed
    part 2 (x - C)(C - estimate) that the source/network split drops.
    """
    topo = ctx.topology
    qs = ctx.quantizers
    n = topo.num_sources
    shape = tuple(q.levels for q in qs)
    cells = int(np.prod(shape))
    lr = ctx.relay_size
    prior = joint_prior(qs, range(n))
    q_full = _kron_all(list(ctx.relay_channels))
    f = ctx.code.table.ravel()
    grid = np.array(np.unravel_index(np.arange(cells), shape)).T  # (cells, N)
    moments = [raw_moments(q) for q in qs]

    total = 0.0
    cross = 0.0
    for d in range(topo.num_destinations):
        sources = topo.sorted_decode_set(d)
        hd = _kron_all([ch.hard_matrix_p(ctx.sd_link(s, d).p, qs[s].rate) for s in sources])
        sd_flat = np.ravel_multi_index(grid[:, list(sources)].T, [shape[s] for s in sources])
        hs = hd[sd_flat]  # (I cells, K)
        hr = ch.hard_matrix_p(ctx.rd_link(d).p, ctx.relay_rate)[f]  # (decoded cells, L_r)
        terms = cells * cells * hs.shape[1] * lr
        if terms > BRUTE_FORCE_LIMIT:
            raise ValueError(f"instance too large for brute force ({terms} terms)")
        joint = ((prior[:, None] * q_full)[:, :, None, None] * hs[:, None, :, None] * hr[None, :, None, :])
        obs = joint.sum(axis=(0, 1))  # (K, L_r)
        for s in sources:
            p_cell, m1, m2 = moments[s]
            idx = grid[:, s]
            c = qs[s].codebook[idx]
            num = np.tensordot(c, joint.sum(axis=1), axes=(0, 0))
            g = np.divide(num, obs, out=np.zeros_like(obs), where=obs > 0)
            # joint carries P(I_s); divide it out and integrate over the cell instead
            wcell = joint.sum(axis=1) / qs[s].priors[idx][:, None, None]
            sq = m2[idx][:, None, None] - 2 * g[None] * m1[idx][:, None, None] + g[None] ** 2 * p_cell[idx][:, None, None]
            total += float(np.sum(wcell * sq))
            mix = 2 * (c[:, None, None] - g[None]) * (m1[idx] - c * p_cell[idx])[:, None, None]
            cross += float(np.sum(wcell * mix))
    total /= topo.weight_total
    cross /= topo.weight_total
    return (total, cross) if return_cross_term else total
