import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fbipg import DimensionError
from fbipg import functions as fn
from oracles import finite_difference_grad, grid_argmin_1d, jacobi_eigenvalues


def _smooth_catalog(rng):
    A = rng.standard_normal((7, 4))
    z = (rng.random(7) < 0.5).astype(float)
    return [fn.LeastSquares(A, rng.standard_normal(7)),
            fn.Logistic(A, z),
            fn.SquaredL2(2.5, rng.standard_normal(4)),
            fn.Zero(4)]


# --- values and gradients -------------------------------------------------


def test_least_squares_values():
    assert fn.LeastSquares(np.eye(2), [0, 0], N=2).value([0, 0]) == 0.0
    assert fn.LeastSquares(np.eye(2), [1, 1], N=2).value([0, 0]) == pytest.approx(0.5)


def test_logistic_value_at_zero():
    assert fn.Logistic([[0.0]], [1.0], N=1).value([0.0]) == pytest.approx(math.log(2), abs=1e-15)


def test_logistic_is_negative_log_likelihood(rng):
    A = rng.standard_normal((5, 3))
    z = np.array([1.0, 0.0, 1.0, 1.0, 0.0])
    x = rng.standard_normal(3)
    w = 1.0 / (1.0 + np.exp(-(A @ x)))
    nll = -np.mean(z * np.log(w) + (1 - z) * np.log(1 - w))
    assert fn.Logistic(A, z).value(x) == pytest.approx(nll, rel=1e-12)


def test_logistic_no_overflow():
    f = fn.Logistic([[1.0], [-1.0]], [1.0, 0.0])
    assert np.isfinite(f.value([1e4]))
    assert np.all(np.isfinite(f.grad([1e4])))
    assert f.value([1e4]) == pytest.approx(0.0, abs=1e-300)


def test_gradient_examples():
    np.testing.assert_allclose(fn.SquaredL2(1.0).grad(np.array([3.0, -1.0])), [3, -1])
    np.testing.assert_allclose(fn.LeastSquares(np.eye(2), [1, 1], N=2).grad(np.zeros(2)),
                               [-0.5, -0.5])
    np.testing.assert_allclose(fn.Logistic([[1.0]], [1.0], N=1).grad(np.zeros(1)), [-0.5])


def test_gradients_match_finite_differences(rng):
    for f in _smooth_catalog(rng):
        for _ in range(5):
            x = rng.standard_normal(4)
            fd = finite_difference_grad(f.value, x)
            g = f.grad(x)
            assert np.linalg.norm(g - fd) <= 1e-6 * max(1.0, np.linalg.norm(g))


def test_lipschitz_examples():
    assert fn.Zero().lipschitz == 0.0
    assert fn.LeastSquares(np.eye(2), [0, 0], N=2).lipschitz == pytest.approx(0.5)
    assert fn.Logistic(np.eye(2), [0, 1], N=2).lipschitz == pytest.approx(0.125)
    assert fn.SquaredL2(3.0).lipschitz == 3.0
    assert fn.LeastSquares(np.eye(2), [0, 0], lipschitz=7.0).lipschitz == 7.0


def test_lipschitz_bounds_gradient_differences(rng):
    for f in _smooth_catalog(rng):
        for _ in range(100):
            u, v = rng.standard_normal(4) * 3, rng.standard_normal(4) * 3
            lhs = np.linalg.norm(f.grad(u) - f.grad(v))
            assert lhs <= f.lipschitz * np.linalg.norm(u - v) * (1 + 1e-9) + 1e-12


def test_midpoint_convexity(rng):
    for f in _smooth_catalog(rng):
        for _ in range(50):
            u, v = rng.standard_normal(4) * 3, rng.standard_normal(4) * 3
            assert f.value(0.5 * u + 0.5 * v) <= 0.5 * f.value(u) + 0.5 * f.value(v) + 1e-12
    for h in (fn.L1(2.0), fn.Box(-1, 2, 4), fn.NonNegative(), fn.SquaredL2(1.0)):
        for _ in range(50):
            u, v = rng.standard_normal(4), rng.standard_normal(4)
            mid = h.value(0.5 * u + 0.5 * v)
            assert mid <= 0.5 * h.value(u) + 0.5 * h.value(v) + 1e-12


def test_dimension_mismatch_raises():
    f = fn.LeastSquares(np.eye(2), [1, 1])
    with pytest.raises(DimensionError):
        f.value(np.zeros(3))
    with pytest.raises(DimensionError):
        f.grad(np.zeros((2, 2)))
    with pytest.raises(DimensionError):
        fn.LeastSquares(np.eye(2), [1, 1, 1])
    with pytest.raises(DimensionError):
        fn.SquaredL2(1.0, np.zeros(2)).prox(np.zeros(3), 1.0)


def test_logistic_rejects_non_binary_labels():
    with pytest.raises(ValueError):
        fn.Logistic(np.eye(2), [0.0, 2.0])


# --- spectral norm ---------------------------------------------------------


@pytest.mark.parametrize("A,expected", [(np.eye(3), 1.0), (np.diag([2.0, 1.0]), 4.0),
                                        (np.ones((2, 2)), 4.0)])
def test_spectral_norm_examples(A, expected):
    assert fn.estimate_spectral_norm(A) == pytest.approx(expected, rel=1e-12)


def test_jacobi_oracle_itself():
    S = np.array([[2.0, 1.0], [1.0, 2.0]])
    np.testing.assert_allclose(jacobi_eigenvalues(S), [1.0, 3.0], atol=1e-13)


@pytest.mark.parametrize("shape", [(5, 3), (20, 20), (50, 50), (50, 10), (8, 30)])
def test_spectral_norm_against_jacobi(shape):
    A = np.random.default_rng(shape[0] * 100 + shape[1]).standard_normal(shape)
    exact = jacobi_eigenvalues(A.T @ A)[-1]
    assert fn.estimate_spectral_norm(A, iters=1000, seed=3) == pytest.approx(exact, rel=1e-4)


def test_spectral_norm_deterministic_and_errors(rng):
    A = rng.standard_normal((6, 4))
    assert fn.estimate_spectral_norm(A, seed=5) == fn.estimate_spectral_norm(A, seed=5)
    with pytest.raises(DimensionError):
        fn.estimate_spectral_norm(np.zeros((0, 3)))
    with pytest.raises(ValueError):
        fn.estimate_spectral_norm(A, iters=0)


# --- prox ------------------------------------------------------------------


def test_prox_examples():
    np.testing.assert_allclose(fn.L1(1.0).prox(np.array([3.0, -0.5]), 1.0), [2.0, 0.0])
    np.testing.assert_allclose(fn.L1(0.0).prox(np.array([3.0, -0.5]), 1.0), [3.0, -0.5])
    np.testing.assert_allclose(fn.NonNegative().prox(np.array([-2.0, 5.0]), 0.3), [0.0, 5.0])
    np.testing.assert_allclose(fn.Zero().prox(np.array([1.0, 2.0]), 7.0), [1.0, 2.0])


def test_soft_threshold_tie_is_exact_zero():
    out = fn.soft_threshold(np.array([1.0, -1.0]), 1.0)
    assert np.all(out == 0.0)


def _separable_prox_cases():
    return [
        (fn.L1(0.7), lambda u: 0.7 * abs(u)),
        (fn.NonNegative(), lambda u: 0 if u >= 0 else mpmath.inf),
        (fn.Box(-0.5, 1.5), lambda u: 0 if -0.5 <= u <= 1.5 else mpmath.inf),
        (fn.SquaredL2(2.0, np.array([0.3])), lambda u: (u - 0.3) ** 2),
        (fn.Zero(), lambda u: 0),
    ]


@pytest.mark.parametrize("step", [0.1, 1.0, 3.0])
def test_prox_matches_grid_search(step, rng):
    for h, scalar in _separable_prox_cases():
        for v in rng.standard_normal(6) * 3:
            v = float(v)
            ref = grid_argmin_1d(lambda u: scalar(u) + (u - v) ** 2 / (2 * step), -10, 10)
            got = h.prox(np.array([v]), step)[0]
            assert got == pytest.approx(ref, abs=1e-8)


def test_separable_pair_prox_blockwise():
    h = fn.SeparablePair(fn.L1(1.0), fn.NonNegative(), 2)
    out = h.prox(np.array([3.0, -0.5, -2.0, 4.0]), 1.0)
    np.testing.assert_allclose(out, [2.0, 0.0, 0.0, 4.0])
    assert h.value(np.array([1.0, -1.0, 0.0, 2.0])) == 2.0
    assert h.value(np.array([1.0, -1.0, -1.0, 2.0])) == np.inf


def test_prox_nonexpansive(rng):
    cases = [h for h, _ in _separable_prox_cases()]
    cases.append(fn.SeparablePair(fn.L1(1.0), fn.Box(-1, 1, 3), 2))
    for h in cases:
        for _ in range(100):
            v1, v2 = rng.standard_normal(5) * 4, rng.standard_normal(5) * 4
            if isinstance(h, fn.SquaredL2):
                h = fn.SquaredL2(2.0, np.full(5, 0.3))
            d = np.linalg.norm(h.prox(v1, 0.8) - h.prox(v2, 0.8))
            assert d <= np.linalg.norm(v1 - v2) + 1e-10


def test_prox_gradient_inequality(rng):
    """Descent inequality of one forward-backward step with step 1/L."""
    for trial in range(10):
        A = rng.standard_normal((6, 4))
        s = fn.LeastSquares(A, rng.standard_normal(6))
        L = s.lipschitz
        for q in (fn.L1(0.5), fn.NonNegative()):
            y = rng.standard_normal(4)
            xp = q.prox(y - s.grad(y) / L, 1.0 / L)
            for _ in range(20):
                u = np.abs(rng.standard_normal(4)) if q.kind == "indicator_nonneg" \
                    else rng.standard_normal(4)
                lhs = q.value(xp) + s.value(xp) - (q.value(u) + s.value(u))
                rhs = 0.5 * L * (np.sum((u - y) ** 2) - np.sum((u - xp) ** 2))
                scale = 1 + abs(s.value(u)) + abs(q.value(u))
                assert lhs <= rhs + 1e-9 * scale


def test_box_validation():
    with pytest.raises(ValueError):
        fn.Box(1.0, 0.0)
    with pytest.raises(DimensionError):
        fn.Box(np.zeros(2), np.ones(3))
    assert fn.Box(-1, 1).contains_origin
    assert not fn.Box(0.5, 1).contains_origin


def test_l1_subgradient():
    np.testing.assert_array_equal(fn.l1_subgradient(np.array([2.0, 0.0, -3.0]), 2.0),
                                  [2.0, 0.0, -2.0])
    np.testing.assert_array_equal(fn.L1(1.0).subgradient(np.array([0.0, 1.0])), [0.0, 1.0])


# --- CSV ---------------------------------------------------------------------


def test_csv_round_trip(tmp_path, rng):
    A = rng.standard_normal((4, 3))
    v = rng.standard_normal(5)
    fn.save_matrix(tmp_path / "A.csv", A)
    fn.save_vector(tmp_path / "v.csv", v)
    np.testing.assert_array_equal(fn.load_matrix(tmp_path / "A.csv"), A)
    np.testing.assert_array_equal(fn.load_vector(tmp_path / "v.csv"), v)
    assert "," in (tmp_path / "A.csv").read_text().splitlines()[0]


# --- property-based --------------------------------------------------------

finite = st.floats(-1e3, 1e3, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(arrays(float, 6, elements=finite), st.floats(0.0, 10.0), st.floats(1e-3, 10.0))
def test_soft_threshold_optimality(v, w, step):
    u = fn.L1(w).prox(v, step)
    # optimality: (v - u)/step lies in w * subdifferential of |.| at u
    r = (v - u) / step
    nz = u != 0
    np.testing.assert_allclose(r[nz], w * np.sign(u[nz]), atol=1e-9 * (1 + np.abs(v[nz]).max(initial=0)) / step)
    assert np.all(np.abs(r[~nz]) <= w + 1e-9)


@settings(max_examples=200, deadline=None)
@given(arrays(float, 5, elements=finite), arrays(float, 5, elements=finite))
def test_box_projection_is_closest_point(v, probe):
    box = fn.Box(-1.0, 2.0, 5)
    p = box.prox(v, 1.0)
    assert box.value(p) == 0.0
    q = np.clip(probe, -1.0, 2.0)
    assert np.linalg.norm(v - p) <= np.linalg.norm(v - q) + 1e-12
