import itertools
import math
import warnings

import numpy as np
import pytest

from otnbr import channel as ch
from otnbr.decoder import (ChannelSnrs, DecoderContext, UnreachableIndexWarning, map_centroid, mmse_c1, mmse_c2,
                           mmse_full, preimage_centroids)
from otnbr.netcode import TableCode
from otnbr.quantizer import design_lloyd_max
from otnbr.topology import NetworkTopology, omarc, omcbr, otnbr23

NOISELESS = ChannelSnrs(200.0, 200.0, 200.0)


def xor_code(bits=1):
    n = 1 << bits
    return TableCode(np.bitwise_xor.outer(np.arange(n), np.arange(n)), bits)


def oracle_equivalent(p, bits, priors):
    """P(decided | sent) for sign decisions followed by MAP on the decided bits."""
    n = 1 << bits
    h = np.array([[p ** bin(i ^ j).count("1") * (1 - p) ** (bits - bin(i ^ j).count("1"))
                   for j in range(n)] for i in range(n)])
    out = np.zeros((n, n))
    for v in range(n):
        dec = int(np.argmax([priors[j] * h[j, v] for j in range(n)]))
        out[:, dec] += h[:, v]
    return h, out


def oracle_posterior_mean(ctx, d, obs_src, obs_relay):
    """E[X_s | hard observations] by summing over every joint index configuration."""
    topo, qs, table = ctx.topology, ctx.quantizers, ctx.code.table
    srcs = ctx.decode_set(d)
    n = topo.num_sources
    sr = [oracle_equivalent(ctx.sr_link(s).p, q.rate, q.priors)[1] for s, q in enumerate(qs)]
    sd = {s: oracle_equivalent(ctx.sd_link(s, d).p, qs[s].rate, qs[s].priors)[0] for s in srcs}
    rd = oracle_equivalent(ctx.rd_link(d).p, ctx.relay_rate, np.ones(ctx.relay_size))[0]
    num = np.zeros(len(srcs))
    den = 0.0
    ranges = [range(q.levels) for q in qs]
    for I in itertools.product(*ranges):
        w0 = math.prod(qs[s].priors[I[s]] for s in range(n))
        w0 *= math.prod(sd[s][I[s], obs_src[k]] for k, s in enumerate(srcs))
        for J in itertools.product(*ranges):
            w = w0 * math.prod(sr[s][I[s], J[s]] for s in range(n)) * rd[table[J], obs_relay]
            den += w
            num += w * np.array([qs[s].codebook[I[s]] for s in srcs])
    return num / den


@pytest.mark.parametrize("topo", [omarc(2), omcbr(2), otnbr23()])
def test_relay_conditional_rows_sum_to_one(topo, q2, rng):
    code = TableCode(rng.integers(0, 4, size=(4, 4)), 2)
    ctx = DecoderContext(topo, [q2, q2], code, ChannelSnrs(-1, 4, 2))
    for d in range(topo.num_destinations):
        assert np.allclose(ctx.relay_conditional(d).sum(axis=1), 1, atol=1e-12)


def test_relay_conditional_noiseless_examples(q2, rng):
    table = rng.integers(0, 4, size=(4, 4))
    code = TableCode(table, 2)
    ctx = DecoderContext(omarc(2), [q2, q2], code, NOISELESS)
    rc = ctx.relay_conditional(0)
    assert np.allclose(rc, np.eye(4)[table.ravel()], atol=1e-12)
    ctx = DecoderContext(otnbr23(), [q2, q2], code, NOISELESS)
    rc = ctx.relay_conditional(0)
    expected = np.zeros((4, 4))
    for i1, i2 in itertools.product(range(4), range(4)):
        expected[i1, table[i1, i2]] += q2.priors[i2]
    assert np.allclose(rc, expected, atol=1e-12)


def test_mmse_full_matches_worked_example(q1):
    """R=1, N=2, XOR, hard observations, p_sd=0.2, p_rd=0.1."""
    snr_sd = 10 * math.log10(ch_inverse(0.2))
    snr_rd = 10 * math.log10(ch_inverse(0.1))
    ctx = DecoderContext(omarc(2), [q1, q1], xor_code(), ChannelSnrs(snr_sd, 200.0, snr_rd))
    assert ctx.sd_link(0, 0).p == pytest.approx(0.2)
    for j1, j2, k in itertools.product(range(2), range(2), range(2)):
        got = mmse_full(ctx, 0, [j1, j2], k, "hard")
        assert np.allclose(got, oracle_posterior_mean(ctx, 0, (j1, j2), k), atol=1e-12)


def ch_inverse(p):
    """gamma such that Q(sqrt(2 gamma)) = p."""
    from scipy.special import erfcinv
    return erfcinv(2 * p) ** 2


@pytest.mark.parametrize("topo", [omarc(2), omcbr(2), otnbr23()])
@pytest.mark.parametrize("rates", [(1, 1), (2, 2), (1, 2)])
def test_mmse_full_brute_force(topo, rates):
    rng = np.random.default_rng(sum(rates) + topo.num_destinations)
    qs = [design_lloyd_max(r) for r in rates]
    rr = int(rng.integers(1, 3))
    code = TableCode(rng.integers(0, 1 << rr, size=tuple(1 << r for r in rates)), rr)
    snrs = ChannelSnrs(*rng.uniform(-4, 6, 3))
    ctx = DecoderContext(topo, qs, code, snrs)
    for d in range(topo.num_destinations):
        srcs = ctx.decode_set(d)
        for obs in itertools.product(*(range(qs[s].levels) for s in srcs)):
            for k in range(1 << rr):
                got = mmse_full(ctx, d, list(obs), k, "hard")
                assert np.allclose(got, oracle_posterior_mean(ctx, d, obs, k), atol=1e-12)


def test_mmse_full_batch_matches_scalar(q2, rng):
    code = TableCode(rng.integers(0, 4, size=(4, 4)), 2)
    ctx = DecoderContext(omarc(2), [q2, q2], code, ChannelSnrs(0, 5, 3))
    y1, y2 = rng.normal(size=(5, 2)), rng.normal(size=(5, 2))
    yr = rng.normal(size=(5, 2))
    batch = mmse_full(ctx, 0, [y1, y2], yr)
    for i in range(5):
        assert np.allclose(batch[i], mmse_full(ctx, 0, [y1[i], y2[i]], yr[i]), atol=1e-14)


def test_noiseless_injective_recovers_codeword(q2):
    code = TableCode(np.arange(16).reshape(4, 4), 4)
    ctx = DecoderContext(omarc(2), [q2, q2], code, NOISELESS)
    pts2, pts4 = ch.constellation(2), ch.constellation(4)
    for i1, i2 in itertools.product(range(4), range(4)):
        est = mmse_full(ctx, 0, [pts2[i1], pts2[i2]], pts4[code.table[i1, i2]])
        assert np.allclose(est, [q2.codebook[i1], q2.codebook[i2]], atol=1e-9)


def test_uninformative_relay(q1):
    ctx = DecoderContext(omarc(2), [q1, q1], xor_code(), ChannelSnrs(0.0, 5.0, -np.inf))
    y = [np.array([0.4]), np.array([-0.9])]
    full = mmse_full(ctx, 0, y, np.array([0.3]))
    # relay-free MMSE: per-source posterior mean using direct observations only
    for k, s in enumerate((0, 1)):
        ll = ch.log_likelihoods(ctx.sd_link(s, 0), y[k])
        w = np.exp(ll) * q1.priors
        assert full[k] == pytest.approx(float(w @ q1.codebook / w.sum()), abs=1e-12)


def test_estimates_in_codebook_hull(q2, rng):
    code = TableCode(rng.integers(0, 4, size=(4, 4)), 2)
    ctx = DecoderContext(otnbr23(), [q2, q2], code, ChannelSnrs(-2, 3, 1))
    for d in range(3):
        ys = [rng.normal(size=(50, 2)) * 3 for _ in ctx.decode_set(d)]
        est = mmse_full(ctx, d, ys, rng.normal(size=(50, 2)) * 3)
        assert np.all(est >= q2.codebook[0] - 1e-12) and np.all(est <= q2.codebook[-1] + 1e-12)


def test_mmse_c1(q2, rng):
    const = TableCode(np.zeros((4, 4), dtype=int), 2)
    ctx = DecoderContext(omarc(2), [q2, q2], const, ChannelSnrs(0, 200, 200))
    y = [rng.normal(size=2), rng.normal(size=2)]
    est = mmse_c1(ctx, 0, y, 0)
    for k in range(2):
        w = np.exp(ch.log_likelihoods(ctx.sd_link(k, 0), y[k])) * q2.priors
        assert est[k] == pytest.approx(float(w @ q2.codebook / w.sum()), abs=1e-12)
    code = TableCode(rng.integers(0, 4, size=(4, 4)), 2)
    clean = DecoderContext(omarc(2), [q2, q2], code, ChannelSnrs(200, 200, 200))
    pts = ch.constellation(2)
    est = mmse_c1(clean, 0, [pts[1], pts[3]], code.table[1, 3])
    assert np.allclose(est, q2.codebook[[1, 3]], atol=1e-9)
    # limit of very clean relay links: c1 and full agree
    ctx = DecoderContext(omarc(2), [q2, q2], code, ChannelSnrs(-1, 60, 60))
    for _ in range(10):
        i1, i2 = rng.integers(0, 4, 2)
        obs = [int(rng.integers(0, 4)), int(rng.integers(0, 4))]
        r = code.table[i1, i2]
        assert np.allclose(mmse_c1(ctx, 0, obs, r, "hard"), mmse_full(ctx, 0, obs, r, "hard"), atol=1e-6)


def test_mmse_c1_unreachable(q2):
    code = TableCode(np.zeros((4, 4), dtype=int), 2)
    ctx = DecoderContext(omarc(2), [q2, q2], code, ChannelSnrs(0, 200, 200))
    with pytest.warns(UnreachableIndexWarning):
        est = mmse_c1(ctx, 0, [0, 0], 3, "hard")
    assert np.allclose(est, 0, atol=1e-12)


def test_mmse_c2(q1, q3, rng):
    ctx = DecoderContext(NetworkTopology(1, [[0]]), [q3], TableCode(np.arange(8), 3), NOISELESS)
    assert np.allclose(mmse_c2(ctx, np.arange(8))[:, 0], q3.codebook)
    ctx = DecoderContext(omarc(2), [q1, q1], xor_code(), NOISELESS)
    assert np.allclose(mmse_c2(ctx, [0, 1]), 0, atol=1e-12)
    table = rng.integers(0, 8, size=(8, 8))
    ctx = DecoderContext(omarc(2), [q3, q3], TableCode(table, 3), NOISELESS)
    got = mmse_c2(ctx, np.arange(8))
    for r in range(8):
        num, den = np.zeros(2), 0.0
        for i1, i2 in itertools.product(range(8), range(8)):
            if table[i1, i2] == r:
                w = q3.priors[i1] * q3.priors[i2]
                num += w * np.array([q3.codebook[i1], q3.codebook[i2]])
                den += w
        expected = num / den if den > 0 else np.zeros(2)
        assert np.allclose(got[r], expected, atol=1e-12)
    assert np.allclose(preimage_centroids(table, 8, [q3, q3]), got, atol=1e-12)


def test_optimality_against_suboptimal_decoders(q2):
    """Empirical MSE of the MMSE estimator is the smallest, up to sampling error."""
    rng = np.random.default_rng(99)
    code = TableCode(rng.integers(0, 4, size=(4, 4)), 2)
    ctx = DecoderContext(omarc(2), [q2, q2], code, ChannelSnrs(-2, 30, 30))
    n = 10 ** 5
    x = rng.normal(size=(2, n))
    idx = np.stack([q2.quantize(x[0]), q2.quantize(x[1])])
    obs = [ch.hard_decide(ch.sample(ctx.sd_link(s, 0), idx[s], rng)) for s in range(2)]
    r = code.table[idx[0], idx[1]]
    yr = ch.hard_decide(ch.sample(ctx.rd_link(0), r, rng))
    ests = {
        "full": mmse_full(ctx, 0, obs, yr, "hard"),
        "map": map_centroid(ctx, 0, obs, yr, "hard"),
        "c1": mmse_c1(ctx, 0, obs, yr, "hard"),
        "c2": mmse_c2(ctx, yr),
    }
    losses = {k: ((x.T - v) ** 2).sum(axis=1) for k, v in ests.items()}
    for k in ("map", "c1", "c2"):
        diff = losses[k] - losses["full"]
        assert diff.mean() >= -3 * diff.std() / math.sqrt(n)


def test_dimension_mismatch(q2):
    ctx = DecoderContext(omarc(2), [q2, q2], TableCode(np.zeros((4, 4), dtype=int), 2), NOISELESS)
    with pytest.raises(ValueError):
        mmse_full(ctx, 0, [np.zeros(2)], np.zeros(2))
    with pytest.raises(ValueError):
        mmse_full(ctx, 0, [np.zeros(3), np.zeros(2)], np.zeros(2))
    with pytest.raises(ValueError):
        DecoderContext(omarc(2), [q2, design_lloyd_max(3)], TableCode(np.zeros((4, 4), dtype=int), 2), NOISELESS)
