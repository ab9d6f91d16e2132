"""Relay code design: simulated annealing over lookup tables, over label
assignments of the structured code, and exhaustive search over linear codes."""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .distortion import CostModel
from .netcode import LinearCode, StructuredCode, TableCode, num_structured_slots, slot_table, to_table

PROBE_MOVES = 200
TARGET_UPHILL_ACCEPT = 0.8


@dataclass(frozen=True)
class AnnealSchedule:
    """Geometric cooling T_k = alpha * T_{k-1}.

    ``t0=None`` calibrates the start temperature so that uphill moves are
    initially accepted with probability of at least 0.8. The run stops when
    T falls below ``t_min_ratio * t0``, after ``max_temps`` levels, or once
    ``stall_levels`` consecutive levels neither improve the best cost nor
    move the current cost by more than ``stall_tol`` (relative).
    """

    t0: float | None = None
    alpha: float = 0.97
    sweeps_per_temp: int = 1
    max_temps: int = 2000
    t_min_ratio: float = 1e-6
    stall_levels: int = 10
    stall_tol: float = 1e-10
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.t0 is not None and not self.t0 > 0:
            raise ValueError("t0 must be positive")
        if self.sweeps_per_temp < 1:
            raise ValueError("sweeps_per_temp must be >= 1")

    def replace(self, **kw) -> "AnnealSchedule":
        doc = asdict(self)
        doc.update(kw)
        return AnnealSchedule(**doc)


@dataclass
class DesignResult:
    code: object
    cost: float
    trace: list = field(default_factory=list)  # (temp_index, temperature, current_cost, best_cost)
    initial_cost: float = float("nan")
    t0: float = float("nan")

    def trace_rows(self):
        return [
            {"temp_index": i, "temperature": t, "current_cost": c, "best_cost": b}
            for i, t, c, b in self.trace
        ]


def neighbour_table(shape: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Axis neighbours (+-1, no wrap) of every cell, padded with -1, and their counts."""
    cells = int(np.prod(shape))
    coords = np.array(np.unravel_index(np.arange(cells), shape)).T
    nb = np.full((cells, 2 * len(shape)), -1, dtype=np.int64)
    count = np.zeros(cells, dtype=np.int64)
    for c in range(cells):
        k = 0
        for axis in range(len(shape)):
            for step in (-1, 1):
                x = coords[c].copy()
                x[axis] += step
                if 0 <= x[axis] < shape[axis]:
                    nb[c, k] = np.ravel_multi_index(x, shape)
                    k += 1
        count[c] = k
    return nb, count


def perturb(table: np.ndarray, flat_position: int, rng: np.random.Generator) -> np.ndarray:
    """Copy into one cell the value of a uniformly chosen axis neighbour."""
    table = np.array(table)
    nb, count = neighbour_table(table.shape)
    donor = nb[flat_position, rng.integers(count[flat_position])]
    flat = table.reshape(-1)
    flat[flat_position] = flat[donor]
    return table


def metropolis_accept(delta: float, temperature: float, u: float) -> bool:
    """Downhill always; uphill with probability exp(-delta / T) given a uniform draw u."""
    return delta < 0 or u < math.exp(-delta / temperature)


class _Annealer:
    """Shared bookkeeping between the table and permutation searches."""

    def __init__(self, model: CostModel, backend: str | None = None):
        self.model = model
        self.k = kernels.get_backend(backend)

    def kernel_args(self):
        m = self.model
        return (m.hr, m.dest_off, m.dest_k, m.dest_ns, bool(m.hr_identity), float(m.eps), float(m.scale))

    def calibrate(self, deltas: np.ndarray, cost: float) -> float:
        up = deltas[deltas > 0]
        if up.size == 0:
            return max(abs(cost), 1e-12) * 1e-3
        return float(-np.mean(up) / math.log(TARGET_UPHILL_ACCEPT))

    def run(self, schedule, sweep, probe, resync, cost):
        t0 = schedule.t0 if schedule.t0 is not None else self.calibrate(probe(), cost)
        best_cost = cost
        trace = []
        temperature = t0
        stall = 0
        for level in range(schedule.max_temps):
            before_best, before_cost = best_cost, cost
            for _ in range(schedule.sweeps_per_temp):
                cost, best_cost = sweep(temperature, cost, best_cost)
                cost = resync()
            trace.append((level, temperature, cost, best_cost))
            improved = before_best - best_cost > schedule.stall_tol * abs(before_best)
            moved = abs(cost - before_cost) > schedule.stall_tol * max(abs(before_cost), 1e-300)
            stall = 0 if (improved or moved) else stall + 1
            if stall >= schedule.stall_levels:
                break
            temperature *= schedule.alpha
            if temperature < schedule.t_min_ratio * t0:
                break
        return t0, trace


def random_full_table(n_cells: int, relay_size: int, rng: np.random.Generator) -> np.ndarray:
    """Random table in which every relay index appears when there are enough cells.

    Neighbour copies cannot create an index that is absent, so a start that
    misses some index would confine the search to a smaller alphabet.
    """
    if n_cells < relay_size:
        return rng.integers(0, relay_size, size=n_cells).astype(np.int64)
    labels = np.concatenate([np.arange(relay_size), rng.integers(0, relay_size, size=n_cells - relay_size)])
    return rng.permutation(labels).astype(np.int64)


def design_sa_table(model: CostModel, schedule: AnnealSchedule = AnnealSchedule(),
                    initial: np.ndarray | None = None, backend: str | None = None) -> DesignResult:
    """Anneal a relay lookup table against ``model``'s cost.

    Cells are visited row-major; each visit proposes copying a random axis
    neighbour's value. The best table seen is returned.
    """
    rng = np.random.default_rng(schedule.seed)
    ann = _Annealer(model, backend)
    shape = model.shape
    if initial is None:
        table = random_full_table(model.n_cells, model.relay_size, rng)
    else:
        table = np.array(initial, dtype=np.int64).reshape(-1)
    nb, count = neighbour_table(shape)
    m_state = model.state(table)
    cost = model.cost_from_state(m_state)
    initial_cost = cost
    best = table.copy()
    hr, off, dk, dns, ident, eps, scale = ann.kernel_args()

    def probe():
        pos = rng.integers(0, model.n_cells, size=PROBE_MOVES)
        don = nb[pos, rng.integers(0, count[pos])]
        out = []
        for c, dn in zip(pos, don):
            out.append(-scale * ann.k.move_delta(model.V[c], int(table[c]), int(table[dn]), m_state, hr,
                                                 off, dk, dns, ident, eps))
        return np.array(out)

    positions = np.arange(model.n_cells, dtype=np.int64)

    def sweep(temperature, cost, best_cost):
        donors = nb[positions, rng.integers(0, count[positions])]
        uniforms = rng.random(positions.size)
        cost, best_cost, _ = ann.k.table_sweep(table, positions, donors, uniforms, float(temperature), model.V,
                                               m_state, hr, off, dk, dns, ident, eps, scale, float(cost),
                                               best, float(best_cost))
        return cost, best_cost

    def resync():
        m_state[:] = model.state(table)
        return model.cost_from_state(m_state)

    t0, trace = ann.run(schedule, sweep, probe, resync, cost)
    final = model.cost(best)
    code = TableCode(best.reshape(shape), model.relay_rate,
                     {"scheme": f"dnnc-{model.variant}", "cost_variant": model.variant,
                      "design_snrs": model.snrs.to_dict(), "seed": schedule.seed})
    return DesignResult(code, final, trace, initial_cost, t0)


def exhaustive_table_search(model: CostModel) -> tuple[np.ndarray, float]:
    """Global optimum over every table; only for tiny instances."""
    total = model.relay_size ** model.n_cells
    if total > 2**20:
        raise ValueError(f"{total} tables is too many for exhaustive search")
    best, best_cost = None, np.inf
    for values in itertools.product(range(model.relay_size), repeat=model.n_cells):
        c = model.cost(np.array(values))
        if c < best_cost:
            best, best_cost = np.array(values).reshape(model.shape), c
    return best, best_cost


def linear_candidates(n: int, relay_rate: int, include_zero: bool = False):
    lo = 0 if include_zero else 1
    return itertools.product(range(lo, 1 << relay_rate), repeat=n)


def design_linear(model: CostModel, include_zero_coeffs: bool = False) -> DesignResult:
    """Best GF(2^R_r) linear combination of the decoded indices under ``model``'s cost.

    Ties keep the lexicographically smallest coefficient tuple.
    """
    rates = tuple(q.rate for q in model.quantizers)
    best, best_cost = None, np.inf
    for coeffs in linear_candidates(len(rates), model.relay_rate, include_zero_coeffs):
        code = LinearCode(rates, model.relay_rate, coeffs)
        c = model.cost(to_table(code).table)
        if c < best_cost:
            best, best_cost = code, c
    if best is None:
        raise ValueError("no admissible linear coefficient tuple")
    best = LinearCode(rates, model.relay_rate, best.coefficients,
                      {"scheme": "dlnc", "cost_variant": model.variant, "design_snrs": model.snrs.to_dict(),
                       "include_zero_coeffs": include_zero_coeffs})
    return DesignResult(best, best_cost)


def structured_slot_vectors(model: CostModel) -> tuple[np.ndarray, np.ndarray]:
    rates = tuple(q.rate for q in model.quantizers)
    slots = slot_table(rates).ravel()
    n_slots = num_structured_slots(rates)
    vs = np.zeros((n_slots, model.V.shape[1]))
    np.add.at(vs, slots, model.V)
    return slots, np.ascontiguousarray(vs)


def design_structured(model: CostModel, schedule: AnnealSchedule = AnnealSchedule(),
                      backend: str | None = None) -> DesignResult:
    """Anneal the relay-index labels of the banded structured code.

    The state is a permutation of all relay indices; its first ``n_slots``
    entries label the partition cells. A move swaps two entries.
    """
    rates = tuple(q.rate for q in model.quantizers)
    if any(r < 2 for r in rates):
        raise ValueError("structured code needs every source rate >= 2")
    n_slots = num_structured_slots(rates)
    if n_slots > model.relay_size:
        raise ValueError(f"{n_slots} partition cells need more than {model.relay_rate} relay bits")
    rng = np.random.default_rng(schedule.seed)
    ann = _Annealer(model, backend)
    slots, vs = structured_slot_vectors(model)
    size = model.relay_size
    perm = rng.permutation(size).astype(np.int64)

    def table_of(p):
        return p[:n_slots][slots]

    m_state = model.state(table_of(perm))
    cost = model.cost_from_state(m_state)
    initial_cost = cost
    best = perm.copy()
    hr, off, dk, dns, ident, eps, scale = ann.kernel_args()

    def partners():
        return ((np.arange(size) + 1 + rng.integers(0, size - 1, size=size)) % size).astype(np.int64)

    def probe():
        out = []
        for _ in range(PROBE_MOVES):
            i, j = rng.choice(size, size=2, replace=False)
            if i >= n_slots and j >= n_slots:
                continue
            if i >= n_slots:
                i, j = j, i
            x = vs[i] - vs[j] if j < n_slots else vs[i]
            out.append(-scale * ann.k.move_delta(x, int(perm[i]), int(perm[j]), m_state, hr, off, dk, dns, ident, eps))
        return np.array(out)

    def sweep(temperature, cost, best_cost):
        cost, best_cost, _ = ann.k.perm_sweep(perm, n_slots, partners(), rng.random(size), float(temperature), vs,
                                              m_state, hr, off, dk, dns, ident, eps, scale, float(cost),
                                              best, float(best_cost))
        return cost, best_cost

    def resync():
        m_state[:] = model.state(table_of(perm))
        return model.cost_from_state(m_state)

    t0, trace = ann.run(schedule, sweep, probe, resync, cost)
    final = model.cost(table_of(best))
    code = StructuredCode(rates, model.relay_rate, tuple(int(a) for a in best[:n_slots]),
                          {"scheme": "structured", "cost_variant": model.variant,
                           "design_snrs": model.snrs.to_dict(), "seed": schedule.seed})
    return DesignResult(code, final, trace, initial_cost, t0)


def exhaustive_structured_search(model: CostModel) -> tuple[tuple[int, ...], float]:
    """Best label assignment over all injective maps of slots to relay indices."""
    rates = tuple(q.rate for q in model.quantizers)
    slots = slot_table(rates).ravel()
    n_slots = num_structured_slots(rates)
    count = math.perm(model.relay_size, n_slots)
    if count > 200_000:
        raise ValueError(f"{count} assignments is too many for exhaustive search")
    best, best_cost = None, np.inf
    for labels in itertools.permutations(range(model.relay_size), n_slots):
        c = model.cost(np.asarray(labels)[slots])
        if c < best_cost:
            best, best_cost = labels, c
    return best, best_cost


SCHEMES = ("dnnc-c3", "dnnc-c4", "dnnc-full", "structured", "dlnc")


def design(topology, quantizers: Sequence, relay_rate: int, scheme: str, design_snrs,
           schedule: AnnealSchedule = AnnealSchedule(), backend: str | None = None) -> DesignResult:
    """Design a relay code with one of the named schemes.

    The table schemes anneal against the cost variant in their name, the
    structured scheme labels its partition against the full cost and the
    linear scheme picks coefficients under the noiseless-relay cost.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}")
    if scheme.startswith("dnnc-"):
        model = CostModel(topology, quantizers, relay_rate, design_snrs, scheme[5:])
        return design_sa_table(model, schedule, backend=backend)
    if scheme == "structured":
        return design_structured(CostModel(topology, quantizers, relay_rate, design_snrs, "full"), schedule, backend)
    return design_linear(CostModel(topology, quantizers, relay_rate, design_snrs, "c3"))
