"""Monte Carlo evaluation of a complete system: sources, quantizers, links,
relay decoding and network coding, and MMSE reconstruction.

In ``hard`` mode every receiver makes bitwise sign decisions first; the
relay then applies the MAP rule on the decided bit vector, which is exactly
the channel model used by the exact distortion routines. In ``soft`` mode the
relay MAP-decodes the real received vectors and the destinations run the
MMSE estimator on real observations, still describing the relay by its
hard-decision transition law.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import channel as ch
from .decoder import ChannelSnrs, DecoderContext, mmse_full
from .quantizer import design_lloyd_max, quantize, source_distortion
from .topology import NetworkTopology

BATCH = 20_000
AXES = ("snr_rd", "snr_sd", "snr_sr", "rate")
CURVE_COLUMNS = ("axis_value", "rsnr_db", "d_total", "d_sources", "d_network_est", "stderr", "n_samples", "seed")


@dataclass(frozen=True)
class SystemInstance:
    topology: NetworkTopology
    quantizers: tuple
    code: object
    snrs: ChannelSnrs
    mode: str = "soft"

    def __post_init__(self):
        object.__setattr__(self, "quantizers", tuple(self.quantizers))
        if self.mode not in ("soft", "hard"):
            raise ValueError(f"unknown observation mode {self.mode!r}")
        self.context()  # validates rates against the code

    def context(self) -> DecoderContext:
        return DecoderContext(self.topology, self.quantizers, self.code, self.snrs)

    def replace(self, **kw) -> "SystemInstance":
        return replace(self, **kw)


@dataclass
class SimResult:
    d_total: float
    stderr: float
    n_samples: int
    seed: int
    mse: dict = field(default_factory=dict)  # (destination, source) -> empirical MSE
    d_sources: float = float("nan")
    variances: tuple = ()

    @property
    def d_network_est(self) -> float:
        return self.d_total - self.d_sources

    @property
    def rsnr_db(self) -> float:
        """``10 log10`` of the source variance over the pooled distortion, averaged over sources."""
        if self.d_total <= 0:
            return float("inf")
        return 10 * math.log10(float(np.mean([v / self.d_total for v in self.variances])))


def _relay_decode(ctx: DecoderContext, s: int, y: np.ndarray, mode: str) -> np.ndarray:
    link = ctx.sr_link(s)
    priors = ctx.quantizers[s].priors
    if mode == "soft":
        return np.asarray(ch.relay_map_decode(link, y, priors))
    rule = ch.map_hard_decision(link.p, link.bits, priors)
    return rule[ch.hard_decide(y)]


def _observe(y: np.ndarray, mode: str) -> np.ndarray:
    return y if mode == "soft" else ch.hard_decide(y)


def _simulate_batch(ctx: DecoderContext, mode: str, size: int, rng: np.random.Generator,
                    variances: Sequence[float]) -> tuple[dict, np.ndarray]:
    topo = ctx.topology
    n = topo.num_sources
    x = np.stack([rng.normal(0.0, math.sqrt(v), size) for v in variances])
    idx = np.stack([quantize(q, x[s]) for s, q in enumerate(ctx.quantizers)])
    decided = [_relay_decode(ctx, s, ch.sample(ctx.sr_link(s), idx[s], rng), mode) for s in range(n)]
    relay_index = ctx.code.table[tuple(decided)]
    sq_err = {}
    loss = np.zeros(size)
    for d in range(topo.num_destinations):
        srcs = ctx.decode_set(d)
        ys = [_observe(ch.sample(ctx.sd_link(s, d), idx[s], rng), mode) for s in srcs]
        yr = _observe(ch.sample(ctx.rd_link(d), relay_index, rng), mode)
        est = mmse_full(ctx, d, ys, yr, mode)
        for k, s in enumerate(srcs):
            e = (x[s] - est[:, k]) ** 2
            sq_err[(d, s)] = float(np.sum(e))
            loss += e
    return sq_err, loss / topo.weight_total


def _seed_int(seed) -> int:
    if isinstance(seed, np.random.SeedSequence):
        return int(seed.generate_state(1, dtype=np.uint32)[0])
    return int(seed)


def run(instance: SystemInstance, num_samples: int, seed=0, batch: int = BATCH) -> SimResult:
    """Simulate ``num_samples`` source vectors; deterministic for a given seed."""
    if num_samples < 1:
        raise ValueError("num_samples must be >= 1")
    seed = _seed_int(seed)
    rng = np.random.default_rng(seed)
    ctx = instance.context()
    variances = tuple(q.variance for q in ctx.quantizers)
    sums: dict = {}
    total, total_sq = [], []
    done = 0
    while done < num_samples:
        size = min(batch, num_samples - done)
        sq, loss = _simulate_batch(ctx, instance.mode, size, rng, variances)
        for key, v in sq.items():
            sums.setdefault(key, []).append(v)
        total.append(float(np.sum(loss)))
        total_sq.append(float(np.sum(loss * loss)))
        done += size
    mean = math.fsum(total) / num_samples
    if num_samples > 1:
        var = max(math.fsum(total_sq) / num_samples - mean * mean, 0.0) * num_samples / (num_samples - 1)
        stderr = math.sqrt(var / num_samples)
    else:
        stderr = float("inf")
    mse = {key: math.fsum(v) / num_samples for key, v in sums.items()}
    return SimResult(mean, stderr, num_samples, seed, mse,
                     source_distortion(instance.topology, ctx.quantizers), variances)


def point_seeds(seed: int, count: int) -> list[int]:
    """Independent per-point seeds split off a master seed."""
    return [_seed_int(child) for child in np.random.SeedSequence(seed).spawn(count)]


def _at(template: SystemInstance, axis: str, value, code_factory):
    if axis == "snr_rd":
        return template.replace(snrs=template.snrs.replace(rd=float(value)))
    if axis == "snr_sd":
        return template.replace(snrs=template.snrs.replace(sd=float(value)))
    if axis == "snr_sr":
        return template.replace(snrs=template.snrs.replace(sr=float(value)))
    rate = int(value)
    if code_factory is None:
        raise ValueError("a rate sweep needs a code_factory to build the code for each rate")
    qs = tuple(design_lloyd_max(rate, q.variance) for q in template.quantizers)
    code = code_factory(template.topology, qs, rate, template.snrs)
    return SystemInstance(template.topology, qs, code, template.snrs, template.mode)


def sweep(template: SystemInstance, axis: str, values: Sequence, num_samples: int, seed: int = 0,
          code_factory: Callable | None = None, workers: int = 1) -> list[tuple[float, SimResult]]:
    """One simulation per axis value, each with its own random stream.

    For ``axis="rate"``, ``code_factory(topology, quantizers, rate, snrs)``
    returns the code used at that rate (relay rate included). With
    ``workers > 1`` the points run in separate processes; results keep the
    order of ``values``.
    """
    if axis not in AXES:
        raise ValueError(f"axis must be one of {AXES}")
    values = list(values)
    if not values:
        raise ValueError("empty sweep")
    seeds = point_seeds(seed, len(values))
    instances = [_at(template, axis, v, code_factory) for v in values]
    if workers > 1 and len(values) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, instances, [num_samples] * len(values), seeds))
    else:
        results = [run(inst, num_samples, s) for inst, s in zip(instances, seeds)]
    return list(zip(values, results))


def curve_row(axis_value, res: SimResult) -> dict:
    return {
        "axis_value": axis_value,
        "rsnr_db": res.rsnr_db,
        "d_total": res.d_total,
        "d_sources": res.d_sources,
        "d_network_est": res.d_network_est,
        "stderr": res.stderr,
        "n_samples": res.n_samples,
        "seed": res.seed,
    }


def format_csv(rows: Sequence[dict], comments: Sequence[str] = (), columns: Sequence[str] = CURVE_COLUMNS) -> str:
    """RFC-4180 text with ``# `` comment lines ahead of the header."""
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in r.items()})
    return buf.getvalue()


def exact_point(instance: SystemInstance, axis_value=None) -> dict:
    """Exact hard-decision row in the curve schema (no sampling error)."""
    from .distortion import total_distortion

    rep = total_distortion(instance.context())
    variances = [q.variance for q in instance.quantizers]
    rsnr = 10 * math.log10(float(np.mean([v / rep.d_total for v in variances])))
    return {"axis_value": axis_value, "rsnr_db": rsnr, "d_total": rep.d_total, "d_sources": rep.d_sources,
            "d_network_est": rep.d_network, "stderr": 0.0, "n_samples": 0, "seed": ""}
