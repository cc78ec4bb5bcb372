"""Local decision boundary approximation on tabular features.

The procedure has three stages:

1. *Detection*: bisect the segments from ``x0`` to its ``k`` nearest
   training points of the opposite class and keep the boundary point
   closest to ``x0``.
2. *Simulation*: sample ``m`` points from the convex hull of the ``2d``
   vertices ``x_b +/- alpha e_j`` using uniform simplex weights, with
   ``alpha = r |x_b - x0|``, and label them with the classifier.
3. *Explanation*: fit an unpenalized logistic surrogate on the sample.

``r`` is picked from a grid as the value whose surrogate direction reaches
the decision boundary from ``x0`` in the shortest distance.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import Classifier, Dataset, Explanation, make_rng, sign_labels, substream
from .glm import FitError, LinearModel, fit_logistic

logger = logging.getLogger(__name__)

DEFAULT_R_GRID = tuple(np.round(np.concatenate([np.arange(1, 10) / 10, np.arange(2, 21) / 2]), 10).tolist())
MOONS_R_GRID = tuple(np.round(np.concatenate([np.arange(2, 16) / 10, np.arange(4, 11) / 2]), 10).tolist())


class DetectionError(RuntimeError):
    """No boundary point could be found."""


class DegenerateSampleError(RuntimeError):
    """Every candidate radius failed to produce a usable surrogate."""


@dataclass(frozen=True)
class DbaParams:
    k: int = 1000
    m: int = 500
    r_grid: tuple[float, ...] = DEFAULT_R_GRID
    tol: float = 1e-4
    max_iter: int = 60
    gamma_offset: float = 0.1

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.m < 1:
            raise ValueError("m must be at least 1")
        grid = tuple(float(r) for r in self.r_grid)
        if not grid or any(r <= 0 for r in grid) or list(grid) != sorted(grid):
            raise ValueError("r_grid must be a non-empty ascending list of positive values")
        object.__setattr__(self, "r_grid", grid)


@dataclass(frozen=True)
class BoundaryDetection:
    x_b: np.ndarray
    x_j: np.ndarray
    distance: float
    candidates: int
    bracket: tuple[np.ndarray, np.ndarray]
    candidate_distances: np.ndarray = field(repr=False)
    label_deviations: int = 0


@dataclass(frozen=True)
class SimulationSample:
    points: np.ndarray
    labels: np.ndarray
    alpha: float
    vertices: np.ndarray
    weights: np.ndarray = field(repr=False)

    @property
    def class_balance(self) -> float:
        return float(np.mean(self.labels == 1))


# ---------------------------------------------------------------------------
# Detection
# ---------------------------------------------------------------------------


def nearest_opposite(D: Dataset, x0: np.ndarray, f: Classifier, k: int,
                     return_index: bool = False):
    """The ``k`` training points nearest to ``x0`` that ``f`` puts in the other class.

    Class membership comes from querying ``f``, not from the stored labels.
    Sorted by ascending distance; ties keep dataset order.
    """
    x0 = np.asarray(x0, dtype=float)
    y0 = f.predict(x0)
    fy = np.asarray(f.predict(D.points))
    opposite = np.flatnonzero(fy != y0)
    if opposite.size == 0:
        raise DetectionError("no training point is classified in the opposite class")
    if opposite.size < k:
        # constant text so the default filter reports it once, not once per x0
        warnings.warn(f"fewer than k={k} opposite-class points available; using all",
                      RuntimeWarning, stacklevel=2)
        logger.debug("%d opposite-class points for k=%d", opposite.size, k)
    dist = np.linalg.norm(D.points[opposite] - x0, axis=1)
    order = np.argsort(dist, kind="stable")[:k]
    idx = opposite[order]
    if return_index:
        return D.points[idx], idx
    return D.points[idx]


def _bisect_many(f: Classifier, a: np.ndarray, B: np.ndarray, tol: float, max_iter: int):
    """Bisect all segments ``a -> B[i]`` at once.

    Returns the midpoints of the final brackets and the bracket ends, as
    positions ``t`` along each segment.
    """
    ya = f.predict(a)
    yb = np.asarray(f.predict(B))
    if np.any(yb == ya):
        raise ValueError("bisection needs endpoints with different labels")
    lo = np.zeros(B.shape[0])
    hi = np.ones(B.shape[0])
    diff = B - a
    it = 1
    while it < max_iter and np.max(hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        ym = np.asarray(f.predict(a + mid[:, None] * diff))
        same = ym == ya
        lo = np.where(same, mid, lo)
        hi = np.where(same, hi, mid)
        it += 1
    return 0.5 * (lo + hi), lo, hi


def bisect_boundary(f: Classifier, a: np.ndarray, b: np.ndarray, tol: float = 1e-4,
                    max_iter: int = 60) -> np.ndarray:
    """Locate a label change of ``f`` on the segment ``[a, b]``.

    Halves the bracket until its length is at most ``tol * |b - a|`` and
    returns the midpoint of the final bracket.  ``max_iter`` counts
    midpoints, the returned one included, so ``max_iter=1`` gives the
    midpoint of ``[a, b]``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    t, _, _ = _bisect_many(f, a, b[None, :], tol, max_iter)
    return a + t[0] * (b - a)


def detect(D: Dataset, x0: np.ndarray, f: Classifier, params: DbaParams = DbaParams()) -> BoundaryDetection:
    """Closest boundary point to ``x0`` over bisections towards opposite-class neighbours."""
    x0 = np.asarray(x0, dtype=float)
    cands, idx = nearest_opposite(D, x0, f, params.k, return_index=True)
    t, lo, hi = _bisect_many(f, x0, cands, params.tol, params.max_iter)
    diff = cands - x0
    points = x0 + t[:, None] * diff
    dists = np.linalg.norm(points - x0, axis=1)
    best = int(np.argmin(dists))  # first minimum wins ties
    deviations = int(np.sum(np.asarray(f.predict(D.points)) != D.labels))
    return BoundaryDetection(
        x_b=points[best],
        x_j=cands[best],
        distance=float(dists[best]),
        candidates=int(cands.shape[0]),
        bracket=(x0 + lo[best] * diff[best], x0 + hi[best] * diff[best]),
        candidate_distances=dists,
        label_deviations=deviations,
    )


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------


def sample_simplex(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` draws from the uniform distribution on the ``k``-point probability simplex.

    Normalized i.i.d. standard exponentials are exactly Dirichlet(1, ..., 1).
    """
    e = rng.standard_exponential((n, k))
    return e / e.sum(axis=1, keepdims=True)


def simulate(f: Classifier, x_b: np.ndarray, x0: np.ndarray, r: float, m: int,
             basis: np.ndarray | None = None, rng: np.random.Generator | int = 0) -> SimulationSample:
    """Sample ``m`` labelled points from the hull of ``x_b +/- alpha * basis_j``.

    ``basis`` holds one direction per row and defaults to the coordinate
    axes.  Weight columns are ordered ``(j=1,-1), (j=1,+1), (j=2,-1), ...``.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    if m < 1:
        raise ValueError("m must be at least 1")
    x_b = np.asarray(x_b, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    alpha = r * float(np.linalg.norm(x_b - x0))
    if alpha == 0:
        raise ValueError("boundary point coincides with x0; sampling radius is zero")
    basis = np.eye(x_b.size) if basis is None else np.atleast_2d(np.asarray(basis, dtype=float))
    if basis.shape[1] != x_b.size:
        raise ValueError("basis vectors must match the dimension of x_b")
    p = basis.shape[0]
    vertices = np.empty((2 * p, x_b.size))
    vertices[0::2] = x_b - alpha * basis
    vertices[1::2] = x_b + alpha * basis
    rng = make_rng(rng)
    w = sample_simplex(m, 2 * p, rng)
    points = w @ vertices
    return SimulationSample(points, np.asarray(f.predict(points)), alpha, vertices, w)


# ---------------------------------------------------------------------------
# Distance along a direction and tuning
# ---------------------------------------------------------------------------


def boundary_distance_along(f: Classifier, x0: np.ndarray, direction: np.ndarray, gamma: float,
                            tol: float = 1e-4, max_iter: int = 60) -> float:
    """Distance from ``x0`` to the boundary when moving along ``direction``.

    Moves towards the other class, ``x' = x0 - f(x0) * gamma * u`` with
    ``u`` the unit direction, and bisects ``[x0, x']``.  Returns ``inf`` if
    ``x'`` has the same label as ``x0`` (no crossing within ``gamma``).
    """
    x0 = np.asarray(x0, dtype=float)
    direction = np.asarray(direction, dtype=float)
    norm = np.linalg.norm(direction)
    if not norm > 0:
        raise ValueError("direction must be non-zero")
    y0 = f.predict(x0)
    x_far = x0 - y0 * gamma * direction / norm
    if f.predict(x_far) == y0:
        return math.inf
    root = bisect_boundary(f, x0, x_far, tol, max_iter)
    return float(np.linalg.norm(root - x0))


def surrogate_fidelity(model: LinearModel | Explanation, X: np.ndarray, labels: np.ndarray) -> float:
    return float(np.mean(sign_labels(model.decision(X)) == np.asarray(labels)))


@dataclass
class _Candidate:
    r: float
    model: LinearModel
    sample: SimulationSample
    direction: np.ndarray
    distance: float
    extra: dict = field(default_factory=dict)


def tune_radius(
    f: Classifier,
    x0: np.ndarray,
    detection: BoundaryDetection,
    params: DbaParams,
    seed,
    basis: np.ndarray | None = None,
    features: Callable[[np.ndarray], tuple[np.ndarray, dict]] | None = None,
    direction: Callable[[LinearModel, dict], np.ndarray] | None = None,
) -> tuple[_Candidate, dict[float, float]]:
    """Shared radius search used by the tabular and attribute variants.

    ``features`` maps sample points to surrogate inputs (plus metadata);
    ``direction`` turns a fitted surrogate into a direction in the sampling
    space.  Each grid value gets its own random stream.
    """
    dim = np.asarray(x0).size if basis is None else np.atleast_2d(basis).shape[0]
    if params.m < dim + 1:
        raise ValueError(f"m={params.m} is too small for a surrogate with {dim} features; need m >= {dim + 1}")
    features = features or (lambda X: (X, {}))
    direction = direction or (lambda model, meta: model.coefficients)
    gamma = float(np.linalg.norm(np.asarray(x0) - detection.x_b)) + params.gamma_offset
    best: _Candidate | None = None
    distances: dict[float, float] = {}
    for i, r in enumerate(params.r_grid):
        sample = simulate(f, detection.x_b, x0, r, params.m, basis, make_rng(substream(seed, "simulation", i)))
        if len(np.unique(sample.labels)) < 2:
            logger.warning("r=%g: sample is single-class; skipped", r)
            distances[r] = math.nan
            continue
        try:
            Xs, meta = features(sample.points)
            model = fit_logistic(Xs, sample.labels)
        except (FitError, DegenerateSampleError) as exc:
            logger.warning("r=%g: %s; skipped", r, exc)
            distances[r] = math.nan
            continue
        u = direction(model, meta)
        if not np.any(u):
            distances[r] = math.inf
            continue
        dist = boundary_distance_along(f, x0, u, gamma, params.tol, params.max_iter)
        distances[r] = dist
        # strict "<" keeps the smallest r on ties
        if best is None or dist < best.distance:
            best = _Candidate(r, model, sample, u, dist, meta)
    if best is None:
        raise DegenerateSampleError(f"no radius in the grid gave a usable two-class sample: {distances}")
    if math.isinf(best.distance):
        raise DegenerateSampleError(
            f"no surrogate direction crossed the decision boundary within gamma={gamma:.4g}"
        )
    return best, distances


def tune_and_explain(D: Dataset, x0: np.ndarray, f: Classifier, params: DbaParams = DbaParams(),
                     seed: int | np.random.SeedSequence = 0,
                     detection: BoundaryDetection | None = None) -> Explanation:
    """Full tabular procedure: one detection, then a surrogate fit for every ``r``.

    The returned explanation carries the winning sample in ``.sample`` and
    per-radius boundary distances in ``diagnostics["distances"]``
    (``nan`` marks a skipped radius, ``inf`` a surrogate that never crossed).
    A precomputed ``detection`` for the same ``x0`` skips the detection step.
    """
    x0 = np.asarray(x0, dtype=float)
    if detection is None:
        detection = detect(D, x0, f, params)
    best, distances = tune_radius(f, x0, detection, params, seed)
    fidelity = surrogate_fidelity(best.model, best.sample.points, best.sample.labels)
    return Explanation(
        coefficients=best.model.coefficients,
        intercept=best.model.intercept,
        names=D.feature_names,
        method="dba-tab",
        boundary_point=detection.x_b,
        bisected_point=detection.x_j,
        chosen_r=best.r,
        sample_size=params.m,
        diagnostics={
            "x0": x0,
            "label_x0": int(f.predict(x0)),
            "boundary_distance": best.distance,
            "detection_distance": detection.distance,
            "candidates": detection.candidates,
            "label_deviations": detection.label_deviations,
            "alpha": best.sample.alpha,
            "distances": {repr(r): d for r, d in distances.items()},
            "fidelity": fidelity,
            "class_balance": best.sample.class_balance,
            "surrogate_converged": best.model.converged,
            "surrogate_iterations": best.model.iterations,
            "surrogate_notes": list(best.model.notes),
        },
        sample=best.sample,
    )


def radius_profile(D: Dataset, x0: np.ndarray, f: Classifier, params: DbaParams = DbaParams(),
                   seed: int | np.random.SeedSequence = 0) -> list[dict]:
    """Per-radius statistics behind :func:`tune_and_explain`.

    One row per grid value with the surrogate's boundary distance, fidelity,
    class balance and coefficients.  Uses the same random streams as tuning,
    so the row with the smallest distance is the radius tuning picks.
    """
    x0 = np.asarray(x0, dtype=float)
    detection = detect(D, x0, f, params)
    gamma = float(np.linalg.norm(x0 - detection.x_b)) + params.gamma_offset
    rows = []
    for i, r in enumerate(params.r_grid):
        sample = simulate(f, detection.x_b, x0, r, params.m, None, make_rng(substream(seed, "simulation", i)))
        row = {"r": r, "alpha": sample.alpha, "class_balance": sample.class_balance,
               "distance": math.nan, "fidelity": None, "coefficients": None, "status": "ok"}
        if len(np.unique(sample.labels)) < 2:
            row["status"] = "single-class"
        else:
            try:
                model = fit_logistic(sample.points, sample.labels)
            except FitError as exc:
                row["status"] = f"fit failed: {exc}"
            else:
                row["fidelity"] = surrogate_fidelity(model, sample.points, sample.labels)
                row["coefficients"] = model.coefficients
                if np.any(model.coefficients):
                    row["distance"] = boundary_distance_along(f, x0, model.coefficients, gamma,
                                                              params.tol, params.max_iter)
                else:
                    row["distance"] = math.inf
                if math.isinf(row["distance"]):
                    row["status"] = "no crossing"
        rows.append(row)
    return rows


def explain_many(D: Dataset, X0: Sequence[np.ndarray], f: Classifier, params: DbaParams = DbaParams(),
                 seed: int = 0) -> list[Explanation]:
    return [tune_and_explain(D, x0, f, params, substream(seed, "point", i)) for i, x0 in enumerate(X0)]
