"""Augmented WMSE transform: identity, optimal weight, conservative bound."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rsprecoder.model import Precoder
from rsprecoder.wmse import (
    WmseState,
    conservative_rate,
    optimal_weight,
    rate_wmse_identity_check,
    wmse,
)


def test_wmse_formula():
    # closed form: u*eps - log2(u)
    assert wmse(0.5, 2.0) == pytest.approx(1.0 - 1.0)
    assert wmse(1.0, 1.0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        wmse(0.5, 0.0)


def test_optimal_weight_identity_and_descent():
    rng = np.random.default_rng(0)
    for _ in range(50):
        eps = float(rng.uniform(0.01, 1.0))
        u_star = optimal_weight(eps)
        assert u_star == pytest.approx(1.0 / eps)
        # the reciprocal weight realizes the rate identity exactly
        assert wmse(eps, u_star) == pytest.approx(1.0 + np.log2(eps), abs=1e-12)
        # descent property behind the alternating scheme: when the MSE
        # shrinks, switching to the new reciprocal weight cannot increase
        # the WMSE relative to keeping the old one
        eps_old = float(rng.uniform(eps, 1.5))
        assert wmse(eps, optimal_weight(eps)) <= wmse(eps, optimal_weight(eps_old)) + 1e-12
    with pytest.raises(ValueError):
        optimal_weight(0.0)


@settings(max_examples=80, deadline=None)
@given(eps=st.floats(1e-6, 1.0))
def test_min_wmse_closed_form(eps):
    """min_u (u*eps - log2 u) = 1 + log2(eps), attained at u = 1/eps."""
    assert wmse(eps, optimal_weight(eps)) == pytest.approx(
        1.0 + float(np.log2(eps)), abs=1e-9)


def test_rate_identity_random_instances():
    rng = np.random.default_rng(1)
    for _ in range(100):
        Nt = int(rng.integers(2, 4))
        K = Nt
        h = (rng.standard_normal(Nt) + 1j * rng.standard_normal(Nt)) / np.sqrt(2)
        P = Precoder(rng.standard_normal(Nt) + 1j * rng.standard_normal(Nt),
                     rng.standard_normal((Nt, K)) + 1j * rng.standard_normal((Nt, K)))
        sigma2 = float(rng.uniform(0.1, 3.0))
        k = int(rng.integers(K))
        res_c, res_p = rate_wmse_identity_check(h, P, sigma2, k)
        assert res_c <= 1e-10
        assert res_p <= 1e-10


def test_conservative_rate_is_lower_bound_at_certified_tau():
    """With tau equal to the exact worst residual, the bound matches the rate."""
    # no uncertainty: tau = |g h^H p_k - 1|^2 + interference terms evaluated
    # directly, optimal weight; the bound then equals the true rate
    rng = np.random.default_rng(2)
    Nt, K, sigma2 = 3, 2, 0.8
    h = (rng.standard_normal(Nt) + 1j * rng.standard_normal(Nt)) / np.sqrt(2)
    P = Precoder(np.zeros(Nt, complex),
                 rng.standard_normal((Nt, K)) + 1j * rng.standard_normal((Nt, K)))
    from rsprecoder.model import mmse_equalizers, mmse_values, sinr_and_rate

    k = 0
    _, g = mmse_equalizers(h, P, sigma2, k)
    resid = g * (h.conj() @ P.pp)
    resid[k] -= 1.0
    tau = float(np.sum(np.abs(resid) ** 2))
    _, eps = mmse_values(h, P, sigma2, k)
    assert tau + abs(g) ** 2 * sigma2 == pytest.approx(eps, abs=1e-12)
    _, _, _, r = sinr_and_rate(h, P, sigma2, k)
    assert conservative_rate(tau, g, optimal_weight(eps), sigma2) == pytest.approx(
        r, abs=1e-10)


def test_conservative_rate_validation():
    with pytest.raises(ValueError):
        conservative_rate(-0.1, 0.5, 1.0, 1.0)
    with pytest.raises(ValueError):
        conservative_rate(0.1, 0.5, 0.0, 1.0)


def test_wmse_state_validation():
    s = WmseState.initial(3)
    assert s.g.shape == (3,) and np.all(s.u == 1.0)
    with pytest.raises(ValueError):
        WmseState(np.zeros(2), np.zeros(2), np.array([1.0, 0.0]), np.ones(2))
