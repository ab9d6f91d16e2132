"""Cut-set sum-rate bounds for Gaussian two-hop networks and the matching
separate source/channel-network distortion bound.

Link quality is expressed as ``P / sigma^2`` ratios (linear, per real
channel use). :func:`budget_from_snrs` converts the per-bit BPSK ``Es/N0``
figures used elsewhere in the package, where the real noise variance is
``N0 / 2`` and hence ``P / sigma^2 = 2 Es/N0``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import golden

from .topology import NetworkTopology, otnbr23

MAX_NODES = 6


def _db(x: float) -> float:
    return 10.0 ** (x / 10.0)


@dataclass(frozen=True)
class GaussianLinkBudget:
    """Average powers and noise variances, stored as link ratios ``P / sigma^2``.

    ``sd[s][d]`` is used only where d decodes s, ``sr[s]`` is the
    source-to-relay ratio and ``rd[d]`` the relay-to-destination ratio.
    """

    sd: np.ndarray
    sr: np.ndarray
    rd: np.ndarray

    def __post_init__(self):
        for name in ("sd", "sr", "rd"):
            arr = np.array(getattr(self, name), dtype=float)
            if np.any(arr <= 0) or np.any(np.isnan(arr)):
                raise ValueError(f"link ratios '{name}' must be positive")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.sd.ndim != 2 or self.sd.shape != (self.sr.size, self.rd.size):
            raise ValueError("sd must be (num_sources, num_destinations)")

    @classmethod
    def from_powers(cls, source_powers: Sequence[float], relay_power: float,
                    noise_sd, noise_sr: Sequence[float], noise_rd: Sequence[float]) -> "GaussianLinkBudget":
        p = np.asarray(source_powers, dtype=float)
        if np.any(p <= 0) or relay_power <= 0:
            raise ValueError("powers must be positive")
        for arr in (noise_sd, noise_sr, noise_rd):
            if np.any(np.asarray(arr, dtype=float) <= 0):
                raise ValueError("noise variances must be positive")
        return cls(p[:, None] / np.asarray(noise_sd, dtype=float),
                   p / np.asarray(noise_sr, dtype=float),
                   relay_power / np.asarray(noise_rd, dtype=float))

    @classmethod
    def symmetric(cls, topology: NetworkTopology, sd: float, sr: float, rd: float) -> "GaussianLinkBudget":
        """Equal linear ratios on every link of a class."""
        n, m = topology.num_sources, topology.num_destinations
        return cls(np.full((n, m), float(sd)), np.full(n, float(sr)), np.full(m, float(rd)))

    @property
    def is_symmetric(self) -> bool:
        return all(np.ptp(a) == 0 for a in (self.sd, self.sr, self.rd))


def budget_from_snrs(topology: NetworkTopology, sd_db: float, sr_db: float, rd_db: float) -> GaussianLinkBudget:
    """Budget for BPSK links given as ``Es/N0`` in dB (real noise variance ``N0/2``)."""
    return GaussianLinkBudget.symmetric(topology, 2 * _db(sd_db), 2 * _db(sr_db), 2 * _db(rd_db))


def _share_capacity(share: float, ratio: float) -> float:
    """``share * 0.5 * log2(1 + ratio / share)``, continuous at ``share = 0``."""
    if share <= 0.0:
        return 0.0
    return 0.5 * share * math.log2(1.0 + ratio / share)


@dataclass(frozen=True)
class CutValue:
    value: float
    cut: tuple  # ("C1",) or ("C2", A)
    has_c2: bool = True


@dataclass
class RateBoundResult:
    rate: float
    lam: tuple
    bounds: dict = field(default_factory=dict)   # F -> value at lam
    active: dict = field(default_factory=dict)   # F -> active cut


def destinations_of(topology: NetworkTopology, sources: Iterable[int]) -> frozenset[int]:
    """Destinations that decode at least one of ``sources``."""
    src = set(sources)
    return frozenset(d for d, sd in enumerate(topology.decode_sets) if src & set(sd))


def eligible_cuts(topology: NetworkTopology, F: Iterable[int]) -> list[tuple[int, ...]]:
    """Nonempty destination sets A within D_F whose combined decode sets cover F."""
    F = frozenset(F)
    pool = sorted(destinations_of(topology, F))
    out = []
    for k in range(1, len(pool) + 1):
        for A in itertools.combinations(pool, k):
            covered = set().union(*(topology.decode_sets[d] for d in A))
            if F <= covered:
                out.append(A)
    return out


def _check_size(topology: NetworkTopology) -> None:
    if topology.num_sources > MAX_NODES or topology.num_destinations > MAX_NODES:
        raise ValueError(f"cut enumeration is limited to {MAX_NODES} sources and destinations")


def cutset_bound(topology: NetworkTopology, budget: GaussianLinkBudget, F: Iterable[int],
                 lam: Sequence[float]) -> CutValue:
    """Sum-rate bound over the sources in F for fixed time shares ``lam``.

    The relay holds the channel for the remaining ``1 - sum(lam)``. Returns
    the smallest cut value together with the cut that achieves it.
    """
    _check_size(topology)
    F = tuple(sorted(set(F)))
    lam = np.asarray(lam, dtype=float)
    n = topology.num_sources
    if not F:
        raise ValueError("F must be nonempty")
    if any(s < 0 or s >= n for s in F):
        raise ValueError("F contains an unknown source")
    if lam.shape != (n,) or np.any(lam < 0) or lam.sum() >= 1:
        raise ValueError("time shares must be nonnegative with sum below 1")
    if budget.sd.shape != (n, topology.num_destinations):
        raise ValueError("budget does not match the topology")
    relay_share = 1.0 - float(lam.sum())
    dests = topology.dest_sets

    c1 = sum(
        _share_capacity(lam[s], float(sum(budget.sd[s, d] for d in dests[s])) + budget.sr[s]) for s in F
    )
    best = CutValue(c1, ("C1",))
    cuts = eligible_cuts(topology, F)
    for A in cuts:
        direct = sum(
            _share_capacity(lam[s], float(sum(budget.sd[s, d] for d in A if d in dests[s]))) for s in F
        )
        relay = _share_capacity(relay_share, float(sum(budget.rd[d] for d in A)))
        if direct + relay < best.value:
            best = CutValue(direct + relay, ("C2", A))
    if not cuts:
        return CutValue(c1, ("C1",), has_c2=False)
    return best


def _maximize(fn, hi: float, resolution: float) -> tuple[float, float]:
    """Grid search on [0, hi] followed by one golden-section refinement."""
    steps = max(2, int(math.ceil(hi / resolution)))
    grid = np.linspace(0.0, hi, steps + 1)
    vals = np.array([fn(x) for x in grid])
    k = int(np.argmax(vals))
    x_best, v_best = float(grid[k]), float(vals[k])
    if 0 < k < steps and vals[k] > max(vals[k - 1], vals[k + 1]):
        x = float(golden(lambda t: -fn(t), brack=(grid[k - 1], grid[k], grid[k + 1]), tol=1e-10))
        if 0.0 <= x <= hi and fn(x) >= v_best:
            x_best, v_best = x, fn(x)
    return x_best, v_best


def symmetric_terms(budget: GaussianLinkBudget, lam: float) -> tuple[float, float]:
    """The two competing per-source rate terms of the symmetric (2,3) network at share ``lam``."""
    p_sd, p_sr, p_rd = float(budget.sd.flat[0]), float(budget.sr[0]), float(budget.rd[0])
    relay_share = 1.0 - 2.0 * lam
    first = _share_capacity(lam, 2.0 * p_sd + p_sr)
    second = _share_capacity(lam, p_sd) + 0.5 * _share_capacity(relay_share, p_rd)
    return first, second


def max_symmetric_rate(budget: GaussianLinkBudget, grid_resolution: float = 1e-3) -> RateBoundResult:
    """Largest common source rate of the symmetric two-source, three-destination network."""
    if not budget.is_symmetric:
        raise ValueError("budget is not symmetric")
    if budget.sd.shape != (2, 3):
        raise ValueError("expected a two-source, three-destination budget")
    lam, rate = _maximize(lambda x: min(symmetric_terms(budget, x)), 0.5, grid_resolution)
    first, second = symmetric_terms(budget, lam)
    return RateBoundResult(rate, (lam, lam), {"C1": first, "C2": second},
                           {"rate": "C1" if first <= second else "C2"})


def symmetric_rate_from_cutset(topology: NetworkTopology, budget: GaussianLinkBudget,
                               grid_resolution: float = 1e-3) -> RateBoundResult:
    """Common source rate from the general cut-set bound with equal time shares.

    Every nonempty source subset F constrains the common rate through its
    sum-rate bound divided by ``|F|``.
    """
    _check_size(topology)
    n = topology.num_sources
    subsets = [F for k in range(1, n + 1) for F in itertools.combinations(range(n), k)]
    hi = 1.0 / n

    def per_source(x: float) -> float:
        lam = np.full(n, min(x, hi * (1 - 1e-15)))
        return min(cutset_bound(topology, budget, F, lam).value / len(F) for F in subsets)

    lam, rate = _maximize(per_source, hi, grid_resolution)
    lam_vec = np.full(n, min(lam, hi * (1 - 1e-15)))
    bounds, active = {}, {}
    for F in subsets:
        cv = cutset_bound(topology, budget, F, lam_vec)
        bounds[F] = cv.value
        active[F] = cv.cut
    return RateBoundResult(rate, tuple(float(v) for v in lam_vec), bounds, active)


def distortion_power_bound(rate: float, b: float, variance: float = 1.0) -> float:
    """Distortion of an ideal separate scheme: ``variance * 2**(-2 b rate)``."""
    if rate < 0 or b <= 0:
        raise ValueError("need rate >= 0 and b > 0")
    return float(variance * 2.0 ** (-2.0 * b * rate))


def bound_rate(topology: NetworkTopology, budget: GaussianLinkBudget, grid_resolution: float = 1e-3) -> float:
    """Common-rate bound: the closed two-term form for the symmetric (2,3) network, else the cut scan."""
    if topology.decode_sets == otnbr23().decode_sets and budget.is_symmetric:
        return max_symmetric_rate(budget, grid_resolution).rate
    return symmetric_rate_from_cutset(topology, budget, grid_resolution).rate
