"""Arithmetic in GF(2^m), 1 <= m <= 8, over fixed primitive polynomials."""
from __future__ import annotations

from functools import lru_cache

import numpy as np

# Bit masks include the leading x^m term.
PRIMITIVE_POLYS = {
    1: 0b11,          # x + 1
    2: 0b111,         # x^2 + x + 1
    3: 0b1011,        # x^3 + x + 1
    4: 0b10011,       # x^4 + x + 1
    5: 0b100101,      # x^5 + x^2 + 1
    6: 0b1000011,     # x^6 + x + 1
    7: 0b10000011,    # x^7 + x + 1
    8: 0b100011101,   # x^8 + x^4 + x^3 + x^2 + 1
}


def _check(m: int, *xs: int) -> None:
    if m not in PRIMITIVE_POLYS:
        raise ValueError(f"field degree m={m} not supported (1..8)")
    size = 1 << m
    for x in xs:
        if not 0 <= x < size:
            raise ValueError(f"{x} is not an element of GF(2^{m})")


def gf_add(x: int, y: int) -> int:
    return x ^ y


def poly_mulmod(x: int, y: int, m: int) -> int:
    """Carry-less product of x and y reduced modulo the degree-m primitive polynomial."""
    poly = PRIMITIVE_POLYS[m]
    out = 0
    while y:
        if y & 1:
            out ^= x
        y >>= 1
        x <<= 1
        if x >> m:
            x ^= poly
    return out


@lru_cache(maxsize=None)
def mul_table(m: int) -> np.ndarray:
    size = 1 << m
    tab = np.array([[poly_mulmod(a, b, m) for b in range(size)] for a in range(size)], dtype=np.int64)
    tab.flags.writeable = False
    return tab


def gf_mul(x: int, y: int, m: int) -> int:
    _check(m, x, y)
    return int(mul_table(m)[x, y])


def gf_inv(x: int, m: int) -> int:
    _check(m, x)
    if x == 0:
        raise ZeroDivisionError("0 has no inverse")
    row = mul_table(m)[x]
    return int(np.flatnonzero(row == 1)[0])
