"""Lloyd-Max scalar quantizers for zero-mean Gaussian sources."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.special import ndtr, ndtri

MAX_ITER = 200_000
REL_TOL = 1e-10


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class ScalarQuantizer:
    rate: int
    boundaries: np.ndarray
    codebook: np.ndarray
    priors: np.ndarray
    cell_distortion: np.ndarray
    variance: float = 1.0

    @property
    def levels(self) -> int:
        return 1 << self.rate

    @property
    def distortion(self) -> float:
        """Mean squared quantisation error (``cell_distortion`` is already weighted by P(I))."""
        return float(np.sum(self.cell_distortion))

    @property
    def sqnr_db(self) -> float:
        return 10.0 * np.log10(self.variance / self.distortion)

    def quantize(self, x):
        return quantize(self, x)

    def to_dict(self) -> dict:
        return {
            "rate": self.rate,
            "variance": self.variance,
            "boundaries": self.boundaries.tolist(),
            "codebook": self.codebook.tolist(),
            "priors": self.priors.tolist(),
            "cell_distortion": self.cell_distortion.tolist(),
            "distortion": self.distortion,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ScalarQuantizer":
        return cls(
            rate=int(doc["rate"]),
            boundaries=np.asarray(doc["boundaries"], dtype=float),
            codebook=np.asarray(doc["codebook"], dtype=float),
            priors=np.asarray(doc["priors"], dtype=float),
            cell_distortion=np.asarray(doc["cell_distortion"], dtype=float),
            variance=float(doc.get("variance", 1.0)),
        )


def _cell_moments(edges: np.ndarray):
    """Zeroth, first and second partial moments of N(0,1) over each cell.

    ``edges`` includes -inf and +inf. Upper-tail cells use the mirrored
    expression to avoid cancellation in ``ndtr(b) - ndtr(a)``.
    """
    a, b = edges[:-1], edges[1:]
    upper = a > 0
    p = np.where(upper, ndtr(-a) - ndtr(-b), ndtr(b) - ndtr(a))
    phi_a = np.where(np.isfinite(a), np.exp(-0.5 * np.square(np.where(np.isfinite(a), a, 0.0))), 0.0)
    phi_b = np.where(np.isfinite(b), np.exp(-0.5 * np.square(np.where(np.isfinite(b), b, 0.0))), 0.0)
    phi_a = phi_a / np.sqrt(2 * np.pi)
    phi_b = phi_b / np.sqrt(2 * np.pi)
    m1 = phi_a - phi_b
    aphi = np.where(np.isfinite(a), np.where(np.isfinite(a), a, 0.0) * phi_a, 0.0)
    bphi = np.where(np.isfinite(b), np.where(np.isfinite(b), b, 0.0) * phi_b, 0.0)
    m2 = p + aphi - bphi
    return p, m1, m2


@lru_cache(maxsize=64)
def design_lloyd_max(rate: int, variance: float = 1.0, *, max_iter: int = MAX_ITER) -> ScalarQuantizer:
    """Design the 2**rate level Lloyd-Max quantizer for N(0, variance).

    Iterates the nearest-neighbour / centroid conditions on the unit normal
    using closed-form truncated-Gaussian moments, then scales by sigma.
    """
    if not 1 <= int(rate) <= 8:
        raise ValueError("rate must be in 1..8")
    if not variance > 0:
        raise ValueError("variance must be positive")
    rate = int(rate)
    levels = 1 << rate
    inner = ndtri(np.arange(1, levels) / levels)
    prev = np.inf
    for _ in range(max_iter):
        edges = np.concatenate(([-np.inf], inner, [np.inf]))
        p, m1, m2 = _cell_moments(edges)
        code = m1 / p
        dist = float(np.sum(m2 - 2 * code * m1 + code * code * p))
        new_inner = 0.5 * (code[:-1] + code[1:])
        shift = np.max(np.abs(new_inner - inner)) if levels > 2 else 0.0
        inner = new_inner
        if abs(prev - dist) <= REL_TOL * dist * 1e-3 and shift < 1e-11:
            break
        prev = dist
    else:
        raise ConvergenceError(f"Lloyd-Max did not converge in {max_iter} iterations")

    # Symmetrise: the N(0,1) optimum is odd-symmetric.
    inner = 0.5 * (inner - inner[::-1])
    edges = np.concatenate(([-np.inf], inner, [np.inf]))
    p, m1, m2 = _cell_moments(edges)
    code = m1 / p
    cell = m2 - 2 * code * m1 + code * code * p
    sigma = float(np.sqrt(variance))
    arrays = [inner * sigma, code * sigma, p, cell * variance]
    for arr in arrays:
        arr.flags.writeable = False  # instances are shared through the cache
    return ScalarQuantizer(rate, *arrays, variance=float(variance))


def quantize(q: ScalarQuantizer, x):
    """Cell index of ``x``; a value on a boundary goes to the upper cell."""
    idx = np.searchsorted(q.boundaries, x, side="right")
    return int(idx) if np.ndim(idx) == 0 else idx


def source_distortion(topology, quantizers: Sequence[ScalarQuantizer]) -> float:
    """Quantisation-only part of the average MSE at the destinations.

    Each source is counted once per destination that decodes it.
    """
    if len(quantizers) != topology.num_sources:
        raise ValueError("need one quantizer per source")
    total = 0.0
    for ds in topology.decode_sets:
        for s in ds:
            total += quantizers[s].distortion
    return total / topology.weight_total
