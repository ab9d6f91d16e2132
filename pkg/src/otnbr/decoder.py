"""MMSE reconstruction at the destinations.

Three estimators are provided: the general one (noisy relay links, soft or
hard observations), the one for noiseless relay links (relay index known
exactly) and the one that also ignores the direct observations.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from . import channel as ch
from .netcode import TableCode, to_table
from .quantizer import ScalarQuantizer
from .topology import NetworkTopology


class UnreachableIndexWarning(RuntimeWarning):
    """The relay index has an empty preimage under the code; the prior mean is returned."""


@dataclass(frozen=True)
class ChannelSnrs:
    """Per-class link SNRs in dB, with optional per-edge overrides.

    Override keys are ``"sd:<s>:<d>"``, ``"sr:<s>"`` and ``"rd:<d>"``.
    """

    sd: float
    sr: float
    rd: float
    overrides: dict = field(default_factory=dict)

    def source_dest(self, s: int, d: int) -> float:
        return float(self.overrides.get(f"sd:{s}:{d}", self.sd))

    def source_relay(self, s: int) -> float:
        return float(self.overrides.get(f"sr:{s}", self.sr))

    def relay_dest(self, d: int) -> float:
        return float(self.overrides.get(f"rd:{d}", self.rd))

    def replace(self, **kw) -> "ChannelSnrs":
        doc = {"sd": self.sd, "sr": self.sr, "rd": self.rd, "overrides": dict(self.overrides)}
        doc.update(kw)
        return ChannelSnrs(**doc)

    def to_dict(self) -> dict:
        return {"sd": self.sd, "sr": self.sr, "rd": self.rd, "overrides": dict(self.overrides)}


def relay_conditional_matrix(table: np.ndarray, decode_set: Sequence[int], relay_size: int,
                             relay_channels: Sequence[np.ndarray], relay_marginals: Sequence[np.ndarray]) -> np.ndarray:
    """P(I_r | I_{S_d}) as a (prod L_s over S_d, L_r) matrix.

    ``relay_channels[s][i, j]`` is P(decoded j | sent i) at the relay and
    ``relay_marginals[s]`` the distribution of the decoded index of source s.
    """
    keep = set(decode_set)
    t = np.eye(relay_size)[table]
    for s in reversed(range(table.ndim)):
        if s in keep:
            t = np.moveaxis(np.tensordot(relay_channels[s], t, axes=([1], [s])), 0, s)
        else:
            t = np.tensordot(relay_marginals[s], t, axes=([0], [s]))
    return t.reshape(-1, relay_size)


def joint_prior(quantizers: Sequence[ScalarQuantizer], sources: Sequence[int]) -> np.ndarray:
    """Flat product prior over the index tuple of ``sources`` (row-major)."""
    p = np.ones(1)
    for s in sources:
        p = np.multiply.outer(p, quantizers[s].priors).ravel()
    return p


def codebook_matrix(quantizers: Sequence[ScalarQuantizer], sources: Sequence[int]) -> np.ndarray:
    """(prod L_s, |sources|) matrix whose column k is C_{I_s} of the k-th source."""
    sizes = [quantizers[s].levels for s in sources]
    grids = np.meshgrid(*(np.arange(n) for n in sizes), indexing="ij")
    return np.stack([quantizers[s].codebook[g.ravel()] for s, g in zip(sources, grids)], axis=1)


class DecoderContext:
    """Everything a destination needs to run the MMSE decoders for one code.

    The relay channel model is the hard-decision MAP pipeline; relay
    conditionals and marginals are computed once and cached.
    """

    def __init__(self, topology: NetworkTopology, quantizers: Sequence[ScalarQuantizer], code,
                 snrs: ChannelSnrs):
        self.topology = topology
        self.quantizers = tuple(quantizers)
        self.code: TableCode = to_table(code)
        self.snrs = snrs
        if len(self.quantizers) != topology.num_sources:
            raise ValueError("need one quantizer per source")
        if self.code.source_rates != tuple(q.rate for q in self.quantizers):
            raise ValueError(f"code rates {self.code.source_rates} do not match quantizer rates")
        self._rc: dict[int, np.ndarray] = {}

    @property
    def relay_rate(self) -> int:
        return self.code.relay_rate

    @property
    def relay_size(self) -> int:
        return 1 << self.code.relay_rate

    def sd_link(self, s: int, d: int) -> ch.AwgnBpskLink:
        return ch.AwgnBpskLink(self.snrs.source_dest(s, d), self.quantizers[s].rate)

    def sr_link(self, s: int) -> ch.AwgnBpskLink:
        return ch.AwgnBpskLink(self.snrs.source_relay(s), self.quantizers[s].rate)

    def rd_link(self, d: int) -> ch.AwgnBpskLink:
        return ch.AwgnBpskLink(self.snrs.relay_dest(d), self.relay_rate)

    @cached_property
    def relay_channels(self) -> tuple[np.ndarray, ...]:
        return tuple(
            ch.equivalent_relay_matrix(self.sr_link(s).p, q.rate, q.priors)
            for s, q in enumerate(self.quantizers)
        )

    @cached_property
    def relay_marginals(self) -> tuple[np.ndarray, ...]:
        return tuple(q.priors @ m for q, m in zip(self.quantizers, self.relay_channels))

    def decode_set(self, d: int) -> tuple[int, ...]:
        return self.topology.sorted_decode_set(d)

    def relay_conditional(self, d: int) -> np.ndarray:
        if d not in self._rc:
            rc = relay_conditional_matrix(self.code.table, self.decode_set(d), self.relay_size,
                                          self.relay_channels, self.relay_marginals)
            rc.flags.writeable = False
            self._rc[d] = rc
        return self._rc[d]

    @cached_property
    def _noiseless_rc(self) -> dict[int, np.ndarray]:
        eye = tuple(np.eye(q.levels) for q in self.quantizers)
        pri = tuple(q.priors for q in self.quantizers)
        return {
            d: relay_conditional_matrix(self.code.table, self.decode_set(d), self.relay_size, eye, pri)
            for d in range(self.topology.num_destinations)
        }

    def prior(self, d: int) -> np.ndarray:
        return joint_prior(self.quantizers, self.decode_set(d))

    def codebooks(self, d: int) -> np.ndarray:
        return codebook_matrix(self.quantizers, self.decode_set(d))

    def source_loglik(self, d: int, y_sources, mode: str = "soft") -> np.ndarray:
        """log P(y_{S_d} | I_{S_d}) flattened over the index tuple; batch axis first."""
        sources = self.decode_set(d)
        if len(y_sources) != len(sources):
            raise ValueError(f"destination {d} expects {len(sources)} source observations")
        total = None
        for s, y in zip(sources, y_sources):
            ll = self._loglik(self.sd_link(s, d), y, mode)
            total = ll if total is None else (total[..., :, None] + ll[..., None, :]).reshape(ll.shape[:-1] + (-1,))
        return total

    def relay_loglik(self, d: int, y_relay, mode: str = "soft") -> np.ndarray:
        return self._loglik(self.rd_link(d), y_relay, mode)

    @staticmethod
    def _loglik(link: ch.AwgnBpskLink, y, mode: str) -> np.ndarray:
        if mode == "soft":
            return ch.log_likelihoods(link, y)
        if mode == "hard":
            h = ch.hard_matrix_p(link.p, link.bits)
            with np.errstate(divide="ignore"):
                return np.log(h.T[np.asarray(y)])
        raise ValueError(f"unknown observation mode {mode!r}")


def _normalised(logw: np.ndarray) -> np.ndarray:
    m = np.max(logw, axis=-1, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    return np.exp(logw - m)


def posterior_estimate(weights: np.ndarray, codebooks: np.ndarray) -> np.ndarray:
    z = weights.sum(axis=-1, keepdims=True)
    return (weights @ codebooks) / z


def mmse_full(ctx: DecoderContext, d: int, y_sources, y_relay, mode: str = "soft") -> np.ndarray:
    """E[X_s | all observations at d] for every s in S_d (sorted order).

    Observations may carry a leading batch axis. In ``hard`` mode they are
    hard-decided indices rather than real vectors.
    """
    ls = ctx.source_loglik(d, y_sources, mode)
    lr = ctx.relay_loglik(d, y_relay, mode)
    with np.errstate(divide="ignore"):
        logprior = np.log(ctx.prior(d))
    # relay evidence per source tuple: sum_r P(y_r | r) P(r | I_{S_d})
    relay_ev = _normalised(lr) @ ctx.relay_conditional(d).T
    with np.errstate(divide="ignore"):
        logw = ls + logprior + np.log(relay_ev)
    return posterior_estimate(_normalised(logw), ctx.codebooks(d))


def mmse_c1(ctx: DecoderContext, d: int, y_sources, relay_index, mode: str = "soft") -> np.ndarray:
    """Estimator for noiseless relay links: the relay index is known exactly."""
    ls = ctx.source_loglik(d, y_sources, mode)
    u = ctx._noiseless_rc[d].T[np.asarray(relay_index)] * ctx.prior(d)
    reachable = u.sum(axis=-1) > 0
    if not np.all(reachable):
        warnings.warn("relay index outside the code's image; returning prior mean", UnreachableIndexWarning)
    with np.errstate(divide="ignore"):
        logw = ls + np.log(np.where(reachable[..., None], u, 1.0))
    est = posterior_estimate(_normalised(logw), ctx.codebooks(d))
    prior_mean = ctx.prior(d) @ ctx.codebooks(d)
    return np.where(reachable[..., None], est, prior_mean)


def mmse_c2(ctx: DecoderContext, relay_index) -> np.ndarray:
    """Preimage centroid of every source given only the (noiseless) relay index."""
    n = ctx.topology.num_sources
    sources = tuple(range(n))
    prior = joint_prior(ctx.quantizers, sources)
    books = codebook_matrix(ctx.quantizers, sources)
    f = ctx.code.table.ravel()
    r = np.asarray(relay_index)
    mask = (f[None, :] == r.reshape(-1, 1)).astype(float) * prior
    z = mask.sum(axis=1)
    if np.any(z == 0):
        warnings.warn("relay index outside the code's image; returning prior mean", UnreachableIndexWarning)
    prior_mean = prior @ books
    with np.errstate(invalid="ignore", divide="ignore"):
        est = np.where((z > 0)[:, None], (mask @ books) / z[:, None], prior_mean)
    return est.reshape(r.shape + (n,))


def preimage_centroids(table: np.ndarray, relay_size: int, quantizers: Sequence[ScalarQuantizer]) -> np.ndarray:
    """(L_r, N) array of E[C_{I_s} | f(I_S) = r]; prior mean where the preimage is empty."""
    n = table.ndim
    prior = joint_prior(quantizers, range(n))
    books = codebook_matrix(quantizers, range(n))
    f = table.ravel()
    z = np.bincount(f, weights=prior, minlength=relay_size)
    num = np.stack([np.bincount(f, weights=prior * books[:, k], minlength=relay_size) for k in range(n)], axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where((z > 0)[:, None], num / z[:, None], prior @ books)


def map_centroid(ctx: DecoderContext, d: int, y_sources, y_relay, mode: str = "soft") -> np.ndarray:
    """Suboptimal baseline: pick the MAP source tuple, output its codewords."""
    ls = ctx.source_loglik(d, y_sources, mode)
    lr = ctx.relay_loglik(d, y_relay, mode)
    relay_ev = _normalised(lr) @ ctx.relay_conditional(d).T
    with np.errstate(divide="ignore"):
        logw = ls + np.log(ctx.prior(d)) + np.log(relay_ev)
    return ctx.codebooks(d)[np.argmax(logw, axis=-1)]
