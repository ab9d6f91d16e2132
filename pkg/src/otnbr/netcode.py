"""Relay network codes: lookup tables, GF-linear combinations and the banded structured family."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .gf import mul_table

SCHEMA_VERSION = 1


class NotApplicableError(ValueError):
    pass


def _check_indices(rates: Sequence[int], indices: Sequence[int]) -> tuple[int, ...]:
    if len(indices) != len(rates):
        raise ValueError(f"expected {len(rates)} source indices, got {len(indices)}")
    out = tuple(int(i) for i in indices)
    for i, r in zip(out, rates):
        if not 0 <= i < (1 << r):
            raise ValueError(f"index {i} out of range for a {r}-bit source")
    return out


@dataclass(frozen=True, eq=False)
class TableCode:
    """Arbitrary memoryless relay mapping stored as an N-dimensional lookup table."""

    table: np.ndarray
    relay_rate: int
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.array(self.table, dtype=np.int64)
        sizes = t.shape
        for n in sizes:
            if n < 2 or n & (n - 1):
                raise ValueError(f"table axis length {n} is not a power of two >= 2")
        if t.size and (t.min() < 0 or t.max() >= (1 << self.relay_rate)):
            raise ValueError("table entry outside the relay alphabet")
        t.flags.writeable = False
        object.__setattr__(self, "table", t)

    @property
    def source_rates(self) -> tuple[int, ...]:
        return tuple(int(n).bit_length() - 1 for n in self.table.shape)

    def encode(self, indices: Sequence[int]) -> int:
        return int(self.table[_check_indices(self.source_rates, indices)])

    def with_table(self, table) -> "TableCode":
        return TableCode(table, self.relay_rate, dict(self.metadata))


@dataclass(frozen=True, eq=False)
class LinearCode:
    """f(I) = sum_s c_s * I_s in GF(2^relay_rate); narrower sources are zero-padded."""

    source_rates: tuple[int, ...]
    relay_rate: int
    coefficients: tuple[int, ...]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "source_rates", tuple(int(r) for r in self.source_rates))
        object.__setattr__(self, "coefficients", tuple(int(c) for c in self.coefficients))
        if len(self.coefficients) != len(self.source_rates):
            raise ValueError("one coefficient per source is required")
        if any(r > self.relay_rate for r in self.source_rates):
            raise ValueError("source rate exceeds relay rate; no field embedding")
        if any(not 0 <= c < (1 << self.relay_rate) for c in self.coefficients):
            raise ValueError("coefficient outside GF(2^relay_rate)")

    def encode(self, indices: Sequence[int]) -> int:
        idx = _check_indices(self.source_rates, indices)
        mul = mul_table(self.relay_rate)
        out = 0
        for c, i in zip(self.coefficients, idx):
            out ^= int(mul[c, i])
        return out


def _band_counts(r1: int) -> int:
    """Number of k_1 groups in the middle band, (2^R1 - 4) / 4."""
    return max(((1 << r1) - 4) // 4, 0)


@dataclass(frozen=True, eq=False)
class StructuredCode:
    """Banded nonlinear relay code.

    Source 0 is split into a low band (indices 0, 1), a middle band cut into
    groups of four, and a high band (last two indices). In the outer bands the
    other sources contribute only their top bit; in the middle band they
    contribute their top two bits. Each resulting cell gets its own relay
    index from ``assignments``, listed as all ``a`` slots, then ``b``, then
    ``e``, each in row-major order of its k-tuple.
    """

    source_rates: tuple[int, ...]
    relay_rate: int
    assignments: tuple[int, ...]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        rates = tuple(int(r) for r in self.source_rates)
        object.__setattr__(self, "source_rates", rates)
        object.__setattr__(self, "assignments", tuple(int(a) for a in self.assignments))
        if any(r < 2 for r in rates):
            raise ValueError("structured codes need every source rate >= 2")
        n = num_structured_slots(rates)
        if len(self.assignments) != n:
            raise ValueError(f"expected {n} slot assignments, got {len(self.assignments)}")
        if n > (1 << self.relay_rate):
            raise ValueError(f"{n} slots do not fit a {self.relay_rate}-bit relay alphabet")
        if len(set(self.assignments)) != n:
            raise ValueError("slot assignments must be distinct")
        if any(not 0 <= a < (1 << self.relay_rate) for a in self.assignments):
            raise ValueError("assignment outside the relay alphabet")

    @property
    def band_degenerate(self) -> bool:
        return _band_counts(self.source_rates[0]) == 0

    def encode(self, indices: Sequence[int]) -> int:
        idx = _check_indices(self.source_rates, indices)
        return self.assignments[structured_slot(self.source_rates, idx)]

    def families(self) -> dict[str, np.ndarray]:
        rates = self.source_rates
        n_other = len(rates) - 1
        outer = 1 << n_other
        nb = _band_counts(rates[0]) * 4 ** n_other
        a = np.array(self.assignments[:outer]).reshape((2,) * n_other)
        b = np.array(self.assignments[outer:outer + nb]).reshape((_band_counts(rates[0]),) + (4,) * n_other)
        e = np.array(self.assignments[outer + nb:]).reshape((2,) * n_other)
        return {"a": a, "b": b, "e": e}


def num_structured_slots(rates: Sequence[int]) -> int:
    n_other = len(rates) - 1
    return 2 * (1 << n_other) + _band_counts(rates[0]) * 4 ** n_other


def structured_slot(rates: Sequence[int], idx: Sequence[int]) -> int:
    """Slot number of a source index tuple under the banded partition."""
    r1 = rates[0]
    i1 = idx[0]
    n_other = len(rates) - 1
    outer = 1 << n_other
    if i1 < 2 or i1 >= (1 << r1) - 2:
        k = 0
        for i, r in zip(idx[1:], rates[1:]):
            k = 2 * k + (1 if i >= (1 << (r - 1)) else 0)
        return k if i1 < 2 else outer + _band_counts(r1) * 4 ** n_other + k
    k = (i1 - 2) // 4
    for i, r in zip(idx[1:], rates[1:]):
        k = 4 * k + (i >> (r - 2))
    return outer + k


def slot_table(rates: Sequence[int]) -> np.ndarray:
    """Slot number for every cell of the source index grid."""
    shape = tuple(1 << r for r in rates)
    out = np.empty(shape, dtype=np.int64)
    for idx in itertools.product(*(range(n) for n in shape)):
        out[idx] = structured_slot(rates, idx)
    return out


def encode(code, indices: Sequence[int]) -> int:
    return code.encode(indices)


def to_table(code) -> TableCode:
    """Evaluate any code over the full source index grid."""
    if isinstance(code, TableCode):
        return code
    rates = code.source_rates
    if isinstance(code, LinearCode):
        mul = mul_table(code.relay_rate)
        grids = np.meshgrid(*(np.arange(1 << r) for r in rates), indexing="ij")
        out = np.zeros(grids[0].shape, dtype=np.int64)
        for c, g in zip(code.coefficients, grids):
            out ^= mul[c][g]
        return TableCode(out, code.relay_rate, dict(code.metadata))
    if isinstance(code, StructuredCode):
        slots = slot_table(rates)
        return TableCode(np.asarray(code.assignments)[slots], code.relay_rate, dict(code.metadata))
    raise TypeError(f"unsupported code type {type(code).__name__}")


def _xor_grid(rates: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    shape = tuple(1 << r for r in rates)
    cells = np.array(list(itertools.product(*(range(n) for n in shape))), dtype=np.int64)
    flat = np.ravel_multi_index(cells.T, shape)
    xor = cells[:, None, :] ^ cells[None, :, :]
    xor_flat = np.ravel_multi_index(np.moveaxis(xor, -1, 0), shape)
    return flat, xor_flat


def is_linear(code, *, allow_mixed_rates: bool = False) -> bool:
    """Exhaustive check of f(I) xor f(I') == f(I xor I') over all pairs.

    The definition works inside one field, so every source rate must equal
    the relay rate unless ``allow_mixed_rates`` is set; then each source is
    XOR-ed inside its own alphabet (the zero-padding embedding).
    """
    table = to_table(code)
    rates = table.source_rates
    if not allow_mixed_rates and any(r != table.relay_rate for r in rates):
        raise NotApplicableError("linearity is defined only when every source rate equals the relay rate")
    flat, xor_flat = _xor_grid(rates)
    f = table.table.ravel()
    lhs = f[flat][:, None] ^ f[flat][None, :]
    return bool(np.array_equal(lhs, f[xor_flat]))


def network_code_rate(source_rates: Sequence[int], relay_rate: int) -> Fraction:
    if relay_rate < 1 or any(r < 1 for r in source_rates):
        raise ValueError("rates must be >= 1")
    return Fraction(int(relay_rate), int(sum(source_rates)))


def structured_relay_rate(n: int, r: int) -> int:
    """Relay bits needed by the banded code with N sources of rate R each."""
    if n < 1 or r < 2:
        raise ValueError("need N >= 1 and R >= 2")
    return math.ceil(math.log2(num_structured_slots([r] * n)))


def code_to_dict(code) -> dict:
    doc: dict = {"schema_version": SCHEMA_VERSION, "relay_rate": code.relay_rate,
                 "source_rates": list(code.source_rates)}
    if isinstance(code, TableCode):
        doc["form"] = "table"
        doc["table"] = code.table.tolist()
    elif isinstance(code, LinearCode):
        doc["form"] = "linear"
        doc["coefficients"] = list(code.coefficients)
    elif isinstance(code, StructuredCode):
        doc["form"] = "structured"
        doc["assignments"] = list(code.assignments)
    else:
        raise TypeError(f"unsupported code type {type(code).__name__}")
    doc["metadata"] = dict(code.metadata)
    return doc


def code_from_dict(doc: dict):
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"code schema version {version!r} is not supported (expected {SCHEMA_VERSION})")
    form = doc["form"]
    meta = dict(doc.get("metadata", {}))
    if form == "table":
        code = TableCode(np.asarray(doc["table"], dtype=np.int64), int(doc["relay_rate"]), meta)
        if "source_rates" in doc and list(code.source_rates) != list(doc["source_rates"]):
            raise ValueError("table shape disagrees with source_rates")
        return code
    if form == "linear":
        return LinearCode(tuple(doc["source_rates"]), int(doc["relay_rate"]), tuple(doc["coefficients"]), meta)
    if form == "structured":
        return StructuredCode(tuple(doc["source_rates"]), int(doc["relay_rate"]), tuple(doc["assignments"]), meta)
    raise ValueError(f"unknown code form {form!r}")
