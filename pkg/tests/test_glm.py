import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize

from dbaexplain.glm import (
    FitError,
    fit_logistic,
    fit_wls,
    logistic_objective,
    weighted_r2,
)


def _overlapping(n=300, d=3, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    beta = np.arange(1, d + 1, dtype=float) / d
    p = 1 / (1 + np.exp(-(X @ beta + 0.2)))
    y = np.where(rng.random(n) < p, 1.0, -1.0)
    return X, y, beta


# --- objective ------------------------------------------------------------


@pytest.mark.parametrize("lam", [0.0, 0.7])
def test_gradient_and_hessian_match_finite_differences(lam):
    X, y, _ = _overlapping(60, 3, seed=1)
    w = np.random.default_rng(2).uniform(0.1, 2.0, 60)
    params = np.array([0.3, -0.5, 0.8, 0.1])
    _, grad, hess = logistic_objective(params, X, y, lam, w)
    h = 1e-6
    fd_grad = np.empty(4)
    fd_hess = np.empty((4, 4))
    for j in range(4):
        e = np.zeros(4)
        e[j] = h
        fp, gp, _ = logistic_objective(params + e, X, y, lam, w)
        fm, gm, _ = logistic_objective(params - e, X, y, lam, w)
        fd_grad[j] = (fp - fm) / (2 * h)
        fd_hess[:, j] = (gp - gm) / (2 * h)
    np.testing.assert_allclose(grad, fd_grad, rtol=1e-6, atol=1e-6)
    np.testing.assert_allclose(hess, fd_hess, rtol=1e-5, atol=1e-6)


def test_objective_stable_for_huge_margins():
    X = np.array([[1e4], [-1e4]])
    y = np.array([1.0, -1.0])
    value, grad, _ = logistic_objective(np.array([0.0, 1.0]), X, y)
    assert np.isfinite(value) and value >= 0 and np.isfinite(grad).all()
    value, _, _ = logistic_objective(np.array([0.0, -1.0]), X, y)
    assert value == pytest.approx(2e4)


# --- logistic fits --------------------------------------------------------


def test_one_dimensional_penalized_fit_matches_independent_minimizer():
    X = np.array([[-2.0], [-1.0], [-0.5], [0.0], [0.5], [1.0], [2.0]])
    y = np.array([-1, -1, 1, -1, 1, 1, 1], dtype=float)
    model = fit_logistic(X, y, lam=1.0)
    ref = optimize.minimize(lambda p: logistic_objective(p, X, y, 1.0)[0], np.zeros(2),
                            method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 10_000}).x
    assert model.converged
    np.testing.assert_allclose([model.intercept, *model.coefficients], ref, atol=1e-6)
    # coarse grid check: nothing on the grid beats the fit
    grid = np.linspace(-3, 3, 121)
    best = min(logistic_objective(np.array([b0, b1]), X, y, 1.0)[0] for b0 in grid for b1 in grid)
    fitted = logistic_objective(np.array([model.intercept, *model.coefficients]), X, y, 1.0)[0]
    assert fitted <= best + 1e-12


def test_converged_fit_has_small_gradient():
    X, y, _ = _overlapping()
    m = fit_logistic(X, y)
    assert m.converged and m.gradient_norm <= 1e-8 and m.notes == ()


def test_permutation_invariance():
    X, y, _ = _overlapping(200, 2, seed=4)
    order = np.random.default_rng(0).permutation(200)
    a, b = fit_logistic(X, y), fit_logistic(X[order], y[order])
    np.testing.assert_allclose(a.coefficients, b.coefficients, atol=1e-9)
    assert a.intercept == pytest.approx(b.intercept, abs=1e-9)


def test_duplication_with_half_weights_is_invariant():
    X, y, _ = _overlapping(150, 2, seed=5)
    a = fit_logistic(X, y, lam=0.3)
    b = fit_logistic(np.vstack([X, X]), np.concatenate([y, y]), lam=0.3, weights=np.full(300, 0.5))
    np.testing.assert_allclose(a.coefficients, b.coefficients, atol=1e-9)


def test_large_sample_recovers_direction():
    X, y, beta = _overlapping(5000, 3, seed=6)
    m = fit_logistic(X, y)
    cos = m.coefficients @ beta / (np.linalg.norm(m.coefficients) * np.linalg.norm(beta))
    assert cos >= 0.99


def test_separable_data_flagged_and_direction_stable():
    rng = np.random.default_rng(7)
    X = rng.standard_normal((80, 2))
    y = np.where(X @ [1.0, 2.0] > 0, 1.0, -1.0)
    short = fit_logistic(X, y, max_iter=15)
    long = fit_logistic(X, y, max_iter=30)
    assert not long.converged and "separable" in long.notes
    assert np.all(y * long.decision(X) > 0)
    assert short.direction @ long.direction > 1 - 1e-3


def test_separable_with_penalty_converges():
    X = np.array([[-1.0], [1.0]])
    y = np.array([-1.0, 1.0])
    m = fit_logistic(X, y, lam=0.5)
    assert m.converged and "separable" not in m.notes


def test_collinear_features_do_not_crash():
    X, y, _ = _overlapping(100, 1, seed=8)
    Xc = np.column_stack([X, 2 * X])
    m = fit_logistic(Xc, y)
    assert np.isfinite(m.coefficients).all()


@pytest.mark.parametrize("bad", [
    dict(X=np.zeros((3, 1)), y=np.ones(3)),
    dict(X=np.array([[0.0], [np.nan]]), y=np.array([1.0, -1.0])),
    dict(X=np.zeros((2, 1)), y=np.array([1.0, 0.0])),
    dict(X=np.zeros((2, 1)), y=np.array([1.0, -1.0]), lam=-1.0),
    dict(X=np.zeros((2, 1)), y=np.array([1.0, -1.0]), weights=np.array([1.0, -1.0])),
])
def test_invalid_inputs_raise(bad):
    with pytest.raises(FitError):
        fit_logistic(**bad)


# --- weighted least squares ----------------------------------------------


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_wls_residuals_orthogonal_to_design(seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((40, 3))
    y = rng.standard_normal(40)
    w = rng.uniform(0.0, 3.0, 40)
    m = fit_wls(X, y, w)
    A = np.column_stack([np.ones(40), X])
    resid = y - m.decision(X)
    np.testing.assert_allclose(A.T @ (w * resid), 0.0, atol=1e-9)


def test_wls_interpolates_exact_linear_target():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((30, 4))
    y = X @ [1.0, -2.0, 0.5, 3.0] - 1.5
    m = fit_wls(X, y, rng.uniform(0.5, 1.0, 30))
    np.testing.assert_allclose(m.coefficients, [1.0, -2.0, 0.5, 3.0], atol=1e-10)
    assert weighted_r2(m, X, y) == pytest.approx(1.0, abs=1e-12)


def test_wls_rank_deficient_adds_jitter(caplog):
    X = np.column_stack([np.arange(5.0), np.arange(5.0)])
    with caplog.at_level("WARNING"):
        m = fit_wls(X, np.arange(5.0))
    assert "ridge-jitter" in m.notes
    np.testing.assert_allclose(m.decision(X), np.arange(5.0), atol=1e-6)


def test_r2_edge_cases():
    X = np.arange(6.0)[:, None]
    m = fit_wls(X, np.arange(6.0))
    with pytest.raises(FitError):
        weighted_r2(m, X, np.ones(6))
    with pytest.raises(FitError):
        fit_wls(X, np.ones(6), np.zeros(6))
    # R^2 can be negative for a poor model
    bad = fit_wls(X, -np.arange(6.0))
    assert weighted_r2(bad, X, np.arange(6.0)) < 0
