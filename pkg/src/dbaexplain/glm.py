"""Logistic regression and weighted least squares for small dense problems.

Logistic fits minimize

    sum_i w_i log(1 + exp(-y_i (x_i @ beta + beta0))) + lam / 2 |beta|^2

by damped Newton steps with step halving.  The intercept is never
penalized.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

logger = logging.getLogger(__name__)

TOLERANCE = 1e-8
MAX_ITER = 200
MICRO_RIDGE = 1e-10


class FitError(ValueError):
    """Raised when the inputs cannot be fitted."""


@dataclass(frozen=True)
class LinearModel:
    coefficients: np.ndarray
    intercept: float
    converged: bool
    iterations: int
    gradient_norm: float
    notes: tuple[str, ...] = field(default=())

    def decision(self, X: np.ndarray) -> np.ndarray:
        return np.atleast_2d(X) @ self.coefficients + self.intercept

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return expit(self.decision(X))

    @property
    def direction(self) -> np.ndarray:
        norm = np.linalg.norm(self.coefficients)
        return self.coefficients / norm if norm > 0 else self.coefficients


def _design(X: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones(X.shape[0]), X])


def _validate(X, y, weights):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise FitError(f"X must be 2-D, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise FitError("features contain non-finite values")
    y = np.asarray(y, dtype=float)
    if y.shape != (X.shape[0],):
        raise FitError(f"{y.shape[0]} targets for {X.shape[0]} rows")
    if weights is None:
        w = np.ones(X.shape[0])
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != (X.shape[0],):
            raise FitError("one weight per row required")
        if np.any(w < 0) or not np.isfinite(w).all():
            raise FitError("weights must be finite and non-negative")
    return X, y, w


def logistic_objective(params: np.ndarray, X: np.ndarray, y: np.ndarray, lam: float = 0.0,
                       weights: np.ndarray | None = None):
    """Penalized logistic loss together with its first and second derivatives.

    ``params`` is ``[beta0, beta_1, ..., beta_d]``; ``y`` is in {-1, +1}.
    """
    X, y, w = _validate(X, y, weights)
    A = _design(X)
    eta = A @ params
    margin = y * eta
    value = np.sum(w * np.logaddexp(0.0, -margin)) + 0.5 * lam * np.dot(params[1:], params[1:])
    # d/d eta of log(1 + exp(-y eta)) = -y * sigmoid(-y eta)
    s = expit(-margin)
    grad = A.T @ (-w * y * s)
    grad[1:] += lam * params[1:]
    curv = w * s * (1.0 - s)
    hess = A.T @ (curv[:, None] * A)
    hess[1:, 1:] += lam * np.eye(X.shape[1])
    return value, grad, hess


def _newton_step(grad, hess):
    try:
        step = np.linalg.solve(hess, -grad)
        if np.isfinite(step).all():
            return step, False
    except np.linalg.LinAlgError:
        pass
    ridge = MICRO_RIDGE * max(1.0, np.trace(hess) / hess.shape[0])
    step = np.linalg.lstsq(hess + ridge * np.eye(hess.shape[0]), -grad, rcond=None)[0]
    return step, True


def fit_logistic(X: np.ndarray, y: np.ndarray, lam: float = 0.0, weights: np.ndarray | None = None,
                 tol: float = TOLERANCE, max_iter: int = MAX_ITER) -> LinearModel:
    """(Penalized) logistic regression by damped Newton / IRLS.

    When ``lam == 0`` and the classes are linearly separable no minimizer
    exists.  The fit then runs until the gradient vanishes numerically or
    the iteration cap is hit and returns ``converged=False``; the direction
    of the coefficients is still meaningful.
    """
    X, y, w = _validate(X, y, weights)
    if lam < 0:
        raise FitError("penalty must be non-negative")
    if not np.isin(y, (-1.0, 1.0)).all():
        raise FitError("labels must be in {-1, +1}")
    active = w > 0
    if len(np.unique(y[active])) < 2:
        raise FitError("logistic regression needs both classes")
    if X.shape[0] < 2:
        raise FitError("need at least two rows")

    params = np.zeros(X.shape[1] + 1)
    value, grad, hess = logistic_objective(params, X, y, lam, w)
    notes = []
    it = 0
    while it < max_iter and np.linalg.norm(grad) > tol:
        it += 1
        step, ridged = _newton_step(grad, hess)
        if ridged and "micro-ridge" not in notes:
            notes.append("micro-ridge")
        t = 1.0
        slope = grad @ step
        for _ in range(60):
            cand = params + t * step
            cand_value = logistic_objective(cand, X, y, lam, w)[0]
            if cand_value <= value + 1e-4 * t * slope:
                break
            t *= 0.5
        else:
            break
        params = cand
        value, grad, hess = logistic_objective(params, X, y, lam, w)

    gnorm = float(np.linalg.norm(grad))
    converged = gnorm <= tol
    if lam == 0 and np.all(y[active] * (_design(X[active]) @ params) > 0):
        # perfectly separated: the infimum is not attained
        converged = False
        notes.append("separable")
    return LinearModel(params[1:].copy(), float(params[0]), converged, it, gnorm, tuple(notes))


def fit_wls(X: np.ndarray, y: np.ndarray, weights: np.ndarray | None = None) -> LinearModel:
    """Weighted least squares with an unpenalized intercept.

    Solves the normal equations; if they are rank deficient a tiny ridge
    is added and noted on the returned model.
    """
    X, y, w = _validate(X, y, weights)
    if not np.any(w > 0):
        raise FitError("all weights are zero")
    A = _design(X)
    G = A.T @ (w[:, None] * A)
    rhs = A.T @ (w * y)
    notes = ()
    if np.linalg.matrix_rank(G) < G.shape[0]:
        jitter = MICRO_RIDGE * max(1.0, np.trace(G) / G.shape[0])
        reg = np.eye(G.shape[0]) * jitter
        reg[0, 0] = 0.0
        G = G + reg
        notes = ("ridge-jitter",)
        logger.warning("weighted least squares is rank deficient; added ridge %.3g", jitter)
    params = np.linalg.solve(G, rhs)
    resid = y - A @ params
    gnorm = float(np.linalg.norm(A.T @ (w * resid)))
    return LinearModel(params[1:], float(params[0]), True, 1, gnorm, notes)


def weighted_r2(model: LinearModel, X: np.ndarray, y: np.ndarray, weights: np.ndarray | None = None) -> float:
    """``1 - SSE_w / SST_w`` with SST taken about the weighted mean of ``y``."""
    X, y, w = _validate(X, y, weights)
    if not np.any(w > 0):
        raise FitError("all weights are zero")
    ybar = np.sum(w * y) / np.sum(w)
    sst = np.sum(w * (y - ybar) ** 2)
    # constant targets leave only rounding noise in sst
    if sst <= 1e-24 * max(1.0, float(np.sum(w * y * y))):
        raise FitError("targets have zero weighted variance; R^2 is undefined")
    sse = np.sum(w * (y - model.decision(X)) ** 2)
    return float(1.0 - sse / sst)
