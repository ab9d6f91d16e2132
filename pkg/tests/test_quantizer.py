import math
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from otnbr.quantizer import ScalarQuantizer, design_lloyd_max, quantize, source_distortion
from otnbr.topology import NetworkTopology, omarc, omcbr, otnbr23


def test_rate1_closed_form(q1):
    c = math.sqrt(2 / math.pi)
    assert np.allclose(q1.codebook, [-c, c], atol=1e-9)
    assert q1.distortion == pytest.approx(1 - 2 / math.pi, abs=1e-9)


def test_rate2_and_rate3_values(q2, q3):
    assert q2.distortion == pytest.approx(0.1175, abs=1e-4)
    assert q3.distortion == pytest.approx(0.03454, abs=1e-4)
    assert q3.sqnr_db == pytest.approx(14.62, abs=0.01)


def test_rate2_against_grid_oracle(q2):
    # dense discretisation of the Gaussian, independent of the design routine
    x = np.linspace(-9, 9, 400_001)
    w = stats.norm.pdf(x) * (x[1] - x[0])
    idx = np.searchsorted(q2.boundaries, x, side="right")
    d = np.sum(w * (x - q2.codebook[idx]) ** 2)
    assert d == pytest.approx(q2.distortion, abs=1e-6)


@pytest.mark.parametrize("rate", [1, 2, 3, 4, 5])
def test_lloyd_conditions(rate):
    q = design_lloyd_max(rate)
    assert q.levels == 2 ** rate
    assert q.priors.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(q.boundaries) > 0) and np.all(np.diff(q.codebook) > 0)
    assert np.allclose(q.boundaries, 0.5 * (q.codebook[1:] + q.codebook[:-1]), atol=1e-8)
    edges = np.concatenate([[-np.inf], q.boundaries, [np.inf]])
    for i in range(q.levels):
        num = integrate.quad(lambda t: t * stats.norm.pdf(t), edges[i], edges[i + 1])[0]
        assert num / q.priors[i] == pytest.approx(q.codebook[i], abs=1e-7)
    assert np.allclose(q.codebook, -q.codebook[::-1], atol=1e-9)
    assert float(q.priors @ q.codebook) == pytest.approx(0.0, abs=1e-9)
    assert q.cell_distortion.sum() + float(q.priors @ q.codebook ** 2) == pytest.approx(1.0, abs=1e-8)


def test_variance_scaling():
    q = design_lloyd_max(3, 4.0)
    assert q.distortion == pytest.approx(4 * design_lloyd_max(3).distortion, rel=1e-9)
    assert q.cell_distortion.sum() + float(q.priors @ q.codebook ** 2) == pytest.approx(4.0, abs=1e-8)


def test_design_is_fast_and_deterministic():
    design_lloyd_max.cache_clear()
    t = time.perf_counter()
    a = design_lloyd_max(3)
    assert time.perf_counter() - t < 1.0
    design_lloyd_max.cache_clear()
    b = design_lloyd_max(3)
    assert np.array_equal(a.codebook, b.codebook) and np.array_equal(a.boundaries, b.boundaries)


@pytest.mark.parametrize("rate,variance", [(0, 1.0), (9, 1.0), (3, 0.0), (3, -1.0)])
def test_bad_arguments(rate, variance):
    with pytest.raises(ValueError):
        design_lloyd_max(rate, variance)


def test_quantize_examples(q1, q3):
    assert quantize(q1, -0.3) == 0
    assert quantize(q3, 10.0) == 7
    assert quantize(q3, -10.0) == 0
    b = q3.boundaries[3]
    assert quantize(q3, b) == 4  # ties go up
    assert quantize(q3, np.nextafter(b, -np.inf)) == 3


@given(st.floats(-50, 50, allow_nan=False))
def test_quantize_cell_contains_point(x):
    q = design_lloyd_max(3)
    i = int(quantize(q, x))
    edges = np.concatenate([[-np.inf], q.boundaries, [np.inf]])
    assert edges[i] <= x < edges[i + 1]


def test_source_distortion(q1, q3):
    for t in (omarc(2), omcbr(3), otnbr23()):
        assert source_distortion(t, [q3] * t.num_sources) == pytest.approx(q3.distortion, abs=1e-12)
    assert source_distortion(NetworkTopology(1, [[0]]), [q1]) == pytest.approx(0.36338, abs=1e-5)
    mixed = source_distortion(otnbr23(), [q1, q3])
    assert mixed == pytest.approx((2 * q1.distortion + 2 * q3.distortion) / 4)


def test_serialisation_roundtrip(q3):
    back = ScalarQuantizer.from_dict(q3.to_dict())
    assert np.array_equal(back.codebook, q3.codebook) and back.rate == 3
