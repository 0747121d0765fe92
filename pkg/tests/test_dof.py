"""Constructive scheme and rate-slope estimation tests.

Oracles: zero-forcing orthogonality is checked directly against inner
products with the estimate columns; slope fitting is checked on exact
synthetic lines; the sampled min-rate evaluator is cross-checked with a
hand-rolled rate computation at zero uncertainty radius.
"""

import numpy as np
import pytest

from rsprecoder.dof import (
    RankDeficientChannel,
    SchemeExponents,
    constructive_scheme,
    dof_estimate,
    evaluate_scheme_minrate,
    optimal_dof_pair,
    random_common_precoder,
    zf_private_precoders,
)
from rsprecoder.model import Precoder, precoder_power, sinr_and_rate
from rsprecoder.uncertainty import ChannelInstance, UncertaintyRegion, derived_rng


def random_full_rank(rng, Nt, K):
    while True:
        H = (rng.standard_normal((Nt, K)) + 1j * rng.standard_normal((Nt, K))) / np.sqrt(2)
        if np.linalg.matrix_rank(H) == K:
            return H


def test_zf_columns_null_cross_channels_and_split_power():
    rng = np.random.default_rng(0)
    for trial in range(20):
        Nt = int(rng.integers(2, 5))
        K = int(rng.integers(2, Nt + 1))
        H_hat = random_full_rank(rng, Nt, K)
        alpha = float(rng.uniform(0, 1))
        Pt = float(rng.uniform(1, 100))
        pp = zf_private_precoders(H_hat, alpha, Pt)
        # column k carries exactly Pt^alpha / K power
        np.testing.assert_allclose(np.sum(np.abs(pp) ** 2, axis=0),
                                   Pt ** alpha / K, rtol=1e-12)
        # and is orthogonal to every other user's estimated channel
        cross = H_hat.conj().T @ pp
        off = cross - np.diag(np.diag(cross))
        assert np.max(np.abs(off)) < 1e-9 * np.max(np.abs(cross))


def test_zf_rejects_rank_deficient_and_small_power():
    H = np.array([[1.0, 2.0], [2.0, 4.0]], dtype=complex)
    with pytest.raises(RankDeficientChannel):
        zf_private_precoders(H, 0.5, 10.0)
    with pytest.raises(ValueError):
        zf_private_precoders(np.eye(2, dtype=complex), 0.5, 0.5)


def test_random_common_precoder_norm_and_zero():
    rng = np.random.default_rng(1)
    v = random_common_precoder(rng, 4, 7.5)
    assert np.linalg.norm(v) ** 2 == pytest.approx(7.5, rel=1e-12)
    assert np.all(random_common_precoder(rng, 3, 0.0) == 0)
    with pytest.raises(ValueError):
        random_common_precoder(rng, 3, -1.0)


def test_constructive_scheme_power_budget():
    rng = np.random.default_rng(2)
    H_hat = random_full_rank(rng, 3, 3)
    for alpha in (0.0, 0.5, 1.0):
        P = constructive_scheme(H_hat, alpha, 100.0, np.random.default_rng(5))
        assert precoder_power(P) == pytest.approx(100.0, rel=1e-12)
        if alpha == 1.0:
            assert np.all(P.pc == 0)
        else:
            assert np.linalg.norm(P.pc) ** 2 == pytest.approx(
                100.0 - 100.0 ** alpha, rel=1e-12)


def test_evaluate_scheme_minrate_matches_direct_rates_at_zero_radius():
    rng = np.random.default_rng(3)
    H = random_full_rank(rng, 3, 3)
    P = constructive_scheme(H, 0.5, 50.0, np.random.default_rng(7))
    instances = [ChannelInstance(H[:, k], UncertaintyRegion(H[:, k], 0.0))
                 for k in range(3)]
    got = evaluate_scheme_minrate(P, instances, 1.0, 10, np.random.default_rng(9))
    private = np.empty(3)
    common = np.empty(3)
    for k in range(3):
        _, _, common[k], private[k] = sinr_and_rate(H[:, k], P, 1.0, k)
    want = float(np.min(private + np.min(common) / 3))
    assert got == pytest.approx(want, abs=1e-12)


def test_evaluate_scheme_minrate_no_common_stream():
    rng = np.random.default_rng(4)
    H = random_full_rank(rng, 2, 2)
    pp = zf_private_precoders(H, 1.0, 10.0)
    P = Precoder(np.zeros(2, complex), pp)
    instances = [ChannelInstance(H[:, k], UncertaintyRegion(H[:, k], 0.0))
                 for k in range(2)]
    got = evaluate_scheme_minrate(P, instances, 1.0, 5, np.random.default_rng(0))
    rates = [sinr_and_rate(H[:, k], P, 1.0, k)[3] for k in range(2)]
    assert got == pytest.approx(min(rates), abs=1e-12)


def test_dof_estimate_recovers_exact_line():
    pts = [(2.0 ** p, 0.75 * p + 1.25) for p in range(3, 9)]
    fit = dof_estimate(pts)
    assert fit.slope == pytest.approx(0.75, abs=1e-12)
    assert fit.intercept == pytest.approx(1.25, abs=1e-10)
    assert fit.r2 == pytest.approx(1.0, abs=1e-12)


def test_dof_estimate_validation():
    with pytest.raises(ValueError):
        dof_estimate([(1.0, 0.0), (2.0, 1.0)])
    with pytest.raises(ValueError):
        dof_estimate([(4.0, 0.0), (2.0, 1.0), (8.0, 2.0)])


def test_optimal_dof_pair_values():
    assert optimal_dof_pair(3, 0.0) == (0.0, pytest.approx(1.0 / 3.0))
    assert optimal_dof_pair(3, 0.5) == (0.5, pytest.approx(2.0 / 3.0))
    assert optimal_dof_pair(3, 1.0) == (1.0, pytest.approx(1.0))
    with pytest.raises(ValueError):
        optimal_dof_pair(1, 0.5)
    with pytest.raises(ValueError):
        optimal_dof_pair(3, 1.5)


def test_scheme_exponents_validation():
    SchemeExponents(0.5, 1.0)
    with pytest.raises(ValueError):
        SchemeExponents(-0.1, 0.5)


def test_zf_rate_grows_with_snr_when_nulling_is_partial():
    # with alpha = 1 and zero radius the fully zero-forced private rates
    # scale like log2(Pt): slope must approach 1
    rng = np.random.default_rng(6)
    H = random_full_rank(rng, 3, 3)
    instances = [ChannelInstance(H[:, k], UncertaintyRegion(H[:, k], 0.0))
                 for k in range(3)]
    pts = []
    for p_db in (20, 30, 40, 50):
        Pt = 10.0 ** (p_db / 10)
        P = constructive_scheme(H, 1.0, Pt, derived_rng(0, p_db))
        pts.append((Pt, evaluate_scheme_minrate(P, instances, 1.0, 5,
                                                derived_rng(1, p_db))))
    fit = dof_estimate(pts)
    assert fit.slope == pytest.approx(1.0, abs=0.02)
