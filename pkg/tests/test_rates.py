import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fbipg import EstimationError
from fbipg import rates
from fbipg.rates import RateParams


def P(**kw):
    base = dict(a=2, gamma=1.5, beta=1.0, R2=1.0, delta_omega=0.0)
    base.update(kw)
    return RateParams(**base)


# --- sequences ---------------------------------------------------------------


def test_alpha_and_t_examples():
    assert rates.alpha_k(0, 2, 1) == 0.5
    assert rates.alpha_k(0, 2, 3) == 0.125
    assert rates.alpha_k(-1, 2, 1) == 0.0
    for a in (2, 3, 7):
        assert rates.t_explicit(0, a) == 1.0
    assert rates.t_explicit(3, 3) == 2.0
    assert rates.t_explicit(-1, 2) == 0.0
    with pytest.raises(ValueError):
        rates.alpha_k(-2, 2, 1)


def test_t_fista_examples():
    assert rates.t_fista(1.0) == pytest.approx((1 + math.sqrt(5)) / 2)
    assert rates.t_fista(0.0) == 1.0
    for t in np.linspace(1, 1000, 500):
        assert rates.t_fista(t) >= t + 0.5


def test_d_eta_lambda_pi_examples():
    for k in range(1, 200):
        assert rates.d_k(k, 2) == pytest.approx(0.25, abs=1e-12)
        assert rates.eta_k(k, 2, 1.0) == pytest.approx(0.25, abs=1e-12)
    # t_{-1} = 0 makes d_0 = 0 rather than 1/4
    assert rates.d_k(0, 2) == 0.0
    assert rates.eta_k(0, 3, 1.5) == 0.0
    assert rates.lambda_k(1, 5) == 0.0
    assert rates.pi(4, 2, 3) == 1.0


def test_d_closed_form():
    for a in (2, 3, 5):
        for k in range(1, 100):
            assert rates.d_k(k, a) == pytest.approx(((a - 1) ** 2 + (a - 2) * k) / a**2, abs=1e-9)


def test_eta_gamma1_exact():
    for a in (2, 3, 5, 8):
        for k in range(1, 500):
            assert rates.eta_k(k, a, 1.0) == pytest.approx((a - 1) / a**2, abs=1e-12)


@pytest.mark.parametrize("a", [2, 3, 5])
@pytest.mark.parametrize("gamma", [0.5, 1.0, 1.3, 1.5, 2.0, 3.0])
def test_eta_positive_and_identity(a, gamma):
    for k in range(1, 10**4 + 1, 7):
        eta = rates.eta_k(k, a, gamma)
        assert eta > 0
        assert rates.d_k(k, a) >= 0
        tp, t = rates.t_explicit(k - 1, a), rates.t_explicit(k, a)
        ap, al = rates.alpha_k(k - 1, a, gamma), rates.alpha_k(k, a, gamma)
        ident = (ap * tp**2 - al * t**2) + al * t
        assert abs(eta - ident) <= 1e-12 * (1 + ap * tp**2)


def test_lambda_range():
    for a in (2, 3, 5):
        lam = [rates.lambda_k(k, a) for k in range(1, 10**4)]
        assert min(lam) >= 0 and max(lam) < 1


def test_pi_matches_product():
    a = 3
    for s in range(1, 6):
        for k in range(s, s + 8):
            ref = np.prod([(j - 1) / (j + a) for j in range(s, k + 1)])
            assert rates.pi(s, k, a) == pytest.approx(ref, abs=1e-15)


# --- sums --------------------------------------------------------------------


def test_sum_alpha_t_examples():
    assert rates.sum_alpha_t(1, 2, 1) == 0.5
    assert rates.sum_alpha_t(10, 2, 3) <= rates.sum_alpha_t_bound(10, 2, 3)
    assert rates.sum_alpha_t_bound(10, 2, 3) == pytest.approx(1 - 1 / 11)
    assert rates.sum_alpha_t(5, 2, 2) <= math.log(6)
    assert rates.sum_alpha_t_bound(5, 2, 2) == pytest.approx(math.log(6))


def test_sum_alpha_t_brute_force():
    for a in (2, 3, 5):
        for g in (0.5, 1.0, 1.3, 1.5, 2.0, 3.0):
            s = 0.0
            for k in range(1, 3001):
                s += (k - 1 + a) ** (-g) * (k - 1 + a) / a
                assert s <= rates.sum_alpha_t_bound(k, a, g) * (1 + 1e-12)
                if k % 500 == 0:
                    assert rates.sum_alpha_t(k, a, g) == pytest.approx(s, rel=1e-12)


def test_tight_form_is_smaller_by_a():
    assert rates.sum_alpha_t_bound_tight(10, 4, 1.5) == pytest.approx(
        rates.sum_alpha_t_bound(10, 4, 1.5) / 4)
    # valid once the summand is nonincreasing (gamma >= 1)
    for a in (2, 3):
        for g in (1.0, 1.5, 3.0):
            for k in (1, 10, 1000):
                assert rates.sum_alpha_t(k, a, g) <= rates.sum_alpha_t_bound_tight(k, a, g) + 1e-12


def test_techsum_examples():
    assert rates.techsum_bound(2, 10, 0.5) == pytest.approx(2 * (math.sqrt(10) - 1))
    brute = math.fsum(n ** -0.5 for n in range(2, 11))
    assert brute == pytest.approx(4.0209978992926665, rel=1e-14)
    assert brute <= rates.techsum_bound(2, 10, 0.5)
    assert rates.techsum_bound(2, math.inf, 2) == 1.0
    assert rates.techsum_bound(2, 2, 0.5) >= 2 ** -0.5
    with pytest.raises(ValueError):
        rates.techsum_bound(2, 10, 1.0)
    with pytest.raises(ValueError):
        rates.techsum_bound(1, 10, 2.0)
    with pytest.raises(ValueError):
        rates.techsum_bound(5, 2, 0.5)


@pytest.mark.parametrize("r", [0.3, 0.5, 1.3, 2.0, 3.0])
def test_techsum_brute_force(r):
    n1 = 2 if r > 1 else 1
    terms = np.arange(n1, 10**5 + 1, dtype=float) ** (-r)
    partial = np.cumsum(terms)
    for n2 in (n1, n1 + 1, 10, 99, 1000, 12345, 10**5):
        assert partial[n2 - n1] <= rates.techsum_bound(n1, n2, r) * (1 + 1e-12)


# --- bounds ------------------------------------------------------------------


def test_inner_bound_fast_examples():
    assert rates.inner_bound_fast(1, P(gamma=3)) == pytest.approx(0.5)
    assert rates.inner_bound_fast(9, P(gamma=4, beta=2, delta_omega=1)) == pytest.approx(0.06)
    # Delta-omega = 0: same shape as single-level FISTA at a = 2
    for k in (1, 5, 50):
        assert rates.inner_bound_fast(k, P(gamma=3)) == pytest.approx(
            rates.fista_fixed_rate(k, 1.0, 1.0))
    with pytest.raises(ValueError):
        rates.inner_bound_fast(1, P(gamma=2))


def test_inner_bound_examples():
    assert rates.inner_bound(1, P(gamma=1, delta_omega=1)) == pytest.approx(2.5)
    expected = 4 / 8 + 4 * math.log(2) * 1 / 4
    assert rates.inner_bound(1, P(gamma=2, delta_omega=1)) == pytest.approx(expected)
    for g in (0.5, 1, 2):
        assert rates.inner_bound(7, P(gamma=g)) == pytest.approx(4 / (2 * 64))
    with pytest.raises(ValueError):
        rates.inner_bound(1, P(gamma=2.5))


def test_outer_bound_examples():
    assert rates.outer_bound(3, P(gamma=1)) == pytest.approx(0.5)
    vals = [rates.outer_bound(k, P(gamma=1.5)) for k in range(1, 100)]
    assert all(x >= y for x, y in zip(vals, vals[1:]))
    near0 = rates.outer_bound(9, P(gamma=1e-12))
    assert near0 == pytest.approx(4 / (2 * 100), rel=1e-9)
    with pytest.raises(ValueError):
        rates.outer_bound(3, P(gamma=2))


def test_simul_bounds_gamma1_examples():
    inner, outer = rates.simul_bounds_gamma1(1, P(gamma=1))
    assert inner == pytest.approx(math.pi**2 / 3)
    assert outer == pytest.approx(1.0)
    inner1, _ = rates.simul_bounds_gamma1(1, P(gamma=1, delta_omega=1))
    assert inner1 - inner == pytest.approx(4 * math.log(2))
    seq = [math.log(k + 1) / k for k in range(3, 2000)]
    assert all(x > y for x, y in zip(seq, seq[1:]))


def test_holder_examples():
    p = P(gamma=1.5, rho=1.0, tau=1.0)
    assert rates.holder_constant_C(p) == pytest.approx(128.0)
    i, ii, iii = rates.holder_bounds(1, p)
    assert ii == pytest.approx(16.0)
    assert i == pytest.approx(2 * 128 / 4)
    assert iii == pytest.approx(128 / 2**0.5)
    big_tau = P(gamma=1.5, rho=1.0, tau=1e300, delta_omega=0.5)
    assert rates.holder_constant_C(big_tau) == pytest.approx(4 * 1.5)
    with pytest.raises(ValueError):
        rates.holder_constant_C(P(gamma=1.5))
    with pytest.raises(ValueError):
        rates.holder_constant_C(P(gamma=2.5, rho=1.0, tau=1.0))


def test_generic_fixed_bounds_examples():
    assert rates.generic_fixed_bounds(0.01, 0.1, 1.0) == pytest.approx((0.11, 0.1))
    assert rates.generic_fixed_bounds(0.01, 0.1, 0.0)[0] == 0.01
    outs = [rates.generic_fixed_bounds(1.0 / K**2, 1.0 / K, 1.0)[1] * K for K in (10, 100, 1000)]
    assert outs == pytest.approx([1.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        rates.generic_fixed_bounds(0.1, 0.0, 1.0)


def test_rate_params_validation():
    with pytest.raises(ValueError):
        P(a=1)
    with pytest.raises(ValueError):
        P(gamma=0)
    with pytest.raises(ValueError):
        P(R2=-1)
    with pytest.raises(ValueError):
        P(beta=float("nan"))


# --- lemma checks --------------------------------------------------------------


def test_boundeta_examples():
    assert rates.boundeta_check(1, 2, 1.5)
    eta = rates.eta_k(1, 2, 1.5)
    assert eta < 0.5 * 2 ** -0.5
    for g in (1.01, 1.001):
        margins = [0.5 * (k + 1) ** (1 - g) - rates.eta_k(k, 2, g) for k in (10, 1000, 10**5)]
        assert all(m > 0 for m in margins)


def test_sumtechnical_examples():
    assert rates.sumtechnical_check(1, 3, 10**5)
    for a in (3, 4):
        for s in (2, 10, 100):
            assert rates.sumtechnical_check(s, a, 10**5)
    # brute force against the product definition
    direct = sum(rates.pi(3, k, 3) for k in range(0, 200))
    assert rates.sumtechnical_partial(3, 3, 199) == pytest.approx(direct, rel=1e-12)


# --- slope fitting -------------------------------------------------------------


def test_fit_loglog_slope_examples():
    k = np.arange(1, 10001)
    assert rates.fit_loglog_slope({"k": k, "m": 1.0 / k**2}, "m", 10, 10**4) == pytest.approx(
        -2, abs=1e-6)
    assert rates.fit_loglog_slope({"k": k, "m": np.full(k.size, 3.0)}, "m", 10, 10**4) == \
        pytest.approx(0, abs=1e-12)
    s = rates.fit_loglog_slope({"k": k, "m": np.log(k) / k}, "m", 100, 10**4)
    assert -1.2 < s < -0.8


def test_fit_loglog_slope_errors():
    k = np.arange(1, 20)
    m = np.where(k > 5, -1.0, 1.0 / k)
    with pytest.raises(EstimationError):
        rates.fit_loglog_slope({"k": k, "m": m}, "m", 1, 19)


@settings(max_examples=50, deadline=None)
@given(st.floats(-4, 4), st.floats(0.01, 100))
def test_fit_recovers_power_law(p, c):
    k = np.arange(1, 500)
    assert rates.fit_loglog_slope({"k": k, "m": c * k**p}, "m", 1, 499) == pytest.approx(
        p, abs=1e-8)
