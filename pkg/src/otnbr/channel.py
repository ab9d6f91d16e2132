"""BPSK over AWGN links, their hard-decision equivalents and the relay MAP decoder.

SNR is Es/N0 per BPSK symbol. Indices are labelled in natural binary with
the most significant bit sent first; bit value 0 maps to +sqrt(Es).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import erfc


@dataclass(frozen=True)
class AwgnBpskLink:
    snr_db: float
    bits: int

    def __post_init__(self):
        if self.bits < 1:
            raise ValueError("bits must be >= 1")
        if np.isnan(self.snr_db) or self.snr_db == np.inf:
            raise ValueError("snr_db must be finite (or -inf for a dead link)")

    @property
    def gamma(self) -> float:
        return 10.0 ** (self.snr_db / 10.0)

    @property
    def amplitude(self) -> float:
        """sqrt(Es); Es is fixed to 1."""
        return 1.0

    @property
    def noise_std(self) -> float:
        """Per-dimension noise standard deviation sqrt(N0/2)."""
        g = self.gamma
        return np.inf if g == 0 else float(np.sqrt(0.5 / g))

    @property
    def size(self) -> int:
        return 1 << self.bits

    @property
    def p(self) -> float:
        return bit_error_prob(self.snr_db)


class DiscreteChannel:
    """Row-stochastic transition matrix P(out | in)."""

    def __init__(self, matrix):
        m = np.array(matrix, dtype=float)
        if m.ndim != 2 or np.any(m < 0) or not np.allclose(m.sum(axis=1), 1.0, rtol=0, atol=1e-12):
            raise ValueError("transition matrix must be 2-D, nonnegative and row-stochastic")
        m.flags.writeable = False
        self.matrix = m

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)

    def __getitem__(self, item):
        return self.matrix[item]

    @property
    def shape(self):
        return self.matrix.shape

    def __repr__(self):
        return f"DiscreteChannel({self.matrix.shape[0]}x{self.matrix.shape[1]})"


def bit_error_prob(snr_db: float) -> float:
    """Q(sqrt(2 Es/N0)) for antipodal signalling."""
    if snr_db == -np.inf:
        return 0.5
    gamma = 10.0 ** (snr_db / 10.0)
    return float(0.5 * erfc(np.sqrt(gamma)))


@lru_cache(maxsize=16)
def bit_table(bits: int) -> np.ndarray:
    """(2**bits, bits) array of index bits, MSB first."""
    idx = np.arange(1 << bits)
    shifts = np.arange(bits - 1, -1, -1)
    tab = (idx[:, None] >> shifts) & 1
    tab.flags.writeable = False
    return tab


def constellation(bits: int) -> np.ndarray:
    """(2**bits, bits) antipodal symbols for each index."""
    return 1.0 - 2.0 * bit_table(bits)


def hamming_matrix(bits: int) -> np.ndarray:
    t = bit_table(bits)
    return np.sum(t[:, None, :] != t[None, :, :], axis=2)


def hard_matrix_p(p: float, bits: int) -> np.ndarray:
    dist = hamming_matrix(bits)
    return p ** dist * (1.0 - p) ** (bits - dist)


def hard_matrix(link: AwgnBpskLink) -> DiscreteChannel:
    """Index-to-index law after bitwise sign decisions: a BSC applied per bit."""
    return DiscreteChannel(hard_matrix_p(link.p, link.bits))


def sample(link: AwgnBpskLink, index, rng: np.random.Generator) -> np.ndarray:
    """Noisy received vector(s) for ``index`` (scalar or array of indices)."""
    idx = np.asarray(index)
    if np.any(idx < 0) or np.any(idx >= link.size):
        raise ValueError("index out of range for link")
    clean = link.amplitude * constellation(link.bits)[idx]
    return clean + link.noise_std * rng.standard_normal(clean.shape)


def hard_decide(y: np.ndarray) -> np.ndarray:
    """Indices recovered from sign decisions on the last axis (ties read as bit 0)."""
    y = np.asarray(y)
    bits = y.shape[-1]
    weights = 1 << np.arange(bits - 1, -1, -1)
    return ((y < 0).astype(np.int64) * weights).sum(axis=-1)


def log_likelihoods(link: AwgnBpskLink, y: np.ndarray) -> np.ndarray:
    """log p(y | I) for every index I; shape ``y.shape[:-1] + (2**bits,)``."""
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != link.bits:
        raise ValueError(f"observation length {y.shape[-1]} != {link.bits}")
    var = link.noise_std ** 2
    if not np.isfinite(var):
        return np.zeros(y.shape[:-1] + (link.size,))
    pts = link.amplitude * constellation(link.bits)
    sq = np.sum((y[..., None, :] - pts) ** 2, axis=-1)
    return -sq / (2 * var) - 0.5 * link.bits * np.log(2 * np.pi * var)


def soft_likelihood(link: AwgnBpskLink, y, index: int) -> float:
    """Gaussian density of the received vector given the transmitted index."""
    y = np.asarray(y, dtype=float)
    if y.shape != (link.bits,):
        raise ValueError(f"observation length {y.shape} != ({link.bits},)")
    return float(np.exp(log_likelihoods(link, y)[index]))


def relay_map_decode(link: AwgnBpskLink, y, priors) -> int | np.ndarray:
    """MAP index decision; ties go to the smallest index."""
    with np.errstate(divide="ignore"):
        logp = np.log(np.asarray(priors, dtype=float))
    score = log_likelihoods(link, y) + logp
    out = np.argmax(score, axis=-1)
    return int(out) if np.ndim(out) == 0 else out


def map_hard_decision(p: float, bits: int, priors) -> np.ndarray:
    """Decision rule on hard bit vectors: vector index -> MAP index."""
    h = hard_matrix_p(p, bits)
    return np.argmax(np.asarray(priors, dtype=float)[:, None] * h, axis=0)


def equivalent_relay_matrix(p: float, bits: int, priors) -> np.ndarray:
    h = hard_matrix_p(p, bits)
    rule = map_hard_decision(p, bits, priors)
    q = np.zeros_like(h)
    for v, j in enumerate(rule):
        q[:, j] += h[:, v]
    return q


def equivalent_relay_channel(link: AwgnBpskLink, priors) -> DiscreteChannel:
    """P(decoded | sent) for hard bit decisions followed by index MAP at the relay."""
    return DiscreteChannel(equivalent_relay_matrix(link.p, link.bits, priors))
