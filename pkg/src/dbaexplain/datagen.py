"""Synthetic benchmarks with a known decision boundary.

Two generators: the interleaving half-circles ("moons") and the tabular
AIris flowers, whose class is a conjunction of two half-spaces over five
shape/colour parameters.  Class A is always labelled +1.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .core import Dataset, make_rng

logger = logging.getLogger(__name__)

AIRIS_FEATURES = ("PL", "PW", "SL", "SW", "C")
AIRIS_RANGES = np.array([
    [0.3, 0.7],
    [0.1, 0.7],
    [0.3, 0.7],
    [0.1, 0.7],
    [0.1, 0.8],
])
AIRIS_MIDPOINTS = AIRIS_RANGES.mean(axis=1)
# sd of U[a, b] is (b - a) / sqrt(12)
AIRIS_SDS = (AIRIS_RANGES[:, 1] - AIRIS_RANGES[:, 0]) / math.sqrt(12.0)

# Class A iff   0.33 (PL + PW + C)  < 0.5
#         and   0.33 (PL + PW + SL) > 0.4
_H1_RAW = np.array([0.33, 0.33, 0.0, 0.0, 0.33])
_H2_RAW = np.array([0.33, 0.33, 0.33, 0.0, 0.0])
_H1_THRESHOLD = 0.5
_H2_THRESHOLD = 0.4


@dataclass(frozen=True)
class AirisParams:
    PL: float
    PW: float
    SL: float
    SW: float
    C: float

    def as_array(self) -> np.ndarray:
        return np.array([self.PL, self.PW, self.SL, self.SW, self.C])

    def in_range(self) -> bool:
        v = self.as_array()
        return bool(np.all((v >= AIRIS_RANGES[:, 0]) & (v <= AIRIS_RANGES[:, 1])))


@dataclass(frozen=True)
class Hyperplane:
    """The plane ``coefficients @ x + intercept = 0``.

    ``orientation`` is the sign of ``coefficients @ x + intercept`` on the
    class-A side.
    """

    coefficients: np.ndarray
    intercept: float
    orientation: int
    name: str = ""

    def __post_init__(self):
        coef = np.asarray(self.coefficients, dtype=float)
        if not np.any(coef):
            raise ValueError("hyperplane coefficients must not all be zero")
        object.__setattr__(self, "coefficients", coef)

    @property
    def threshold(self) -> float:
        return -self.intercept

    def value(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.coefficients + self.intercept

    def class_a_side(self, X: np.ndarray) -> np.ndarray:
        return self.orientation * self.value(X) > 0

    def distance(self, x: np.ndarray) -> np.ndarray:
        return np.abs(self.value(x)) / np.linalg.norm(self.coefficients)


def airis_class_rule(p: AirisParams | np.ndarray, warn: bool = True) -> int | np.ndarray:
    """+1 (class A) iff both defining inequalities hold, else -1.

    Accepts an :class:`AirisParams` or an array of raw parameters (one
    vector or an ``(n, 5)`` batch) in the order PL, PW, SL, SW, C.  Out-of-range values
    are evaluated as given; ``warn`` controls whether that is logged.
    """
    if isinstance(p, AirisParams):
        p = p.as_array()
    X = np.asarray(p, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != 5:
        raise ValueError(f"AIris parameters have 5 components, got {X.shape[1]}")
    if warn:
        out = (X < AIRIS_RANGES[:, 0] - 1e-12) | (X > AIRIS_RANGES[:, 1] + 1e-12)
        if out.any():
            logger.warning("%d AIris parameter vectors lie outside their ranges", int(out.any(axis=1).sum()))
    a = (X @ _H1_RAW < _H1_THRESHOLD) & (X @ _H2_RAW > _H2_THRESHOLD)
    y = np.where(a, 1, -1)
    return int(y[0]) if single else y


def airis_attributes(X: np.ndarray) -> np.ndarray:
    """Binarize each parameter: +1 iff strictly above the midpoint of its range."""
    return np.where(np.asarray(X) > AIRIS_MIDPOINTS, 1, -1)


def gen_airis_tab(n: int, seed: int, stream: str = "train") -> Dataset:
    """Sample ``n`` flowers uniformly over the parameter box.

    ``stream`` names an independent random stream so train and test sets
    drawn with the same seed do not overlap.  Row ``i`` does not depend on
    ``n``.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    rng = make_rng(seed, "airis", stream)
    u = rng.random((n, 5))
    X = AIRIS_RANGES[:, 0] + u * (AIRIS_RANGES[:, 1] - AIRIS_RANGES[:, 0])
    return Dataset(
        X,
        airis_class_rule(X),
        AIRIS_FEATURES,
        attributes=airis_attributes(X),
        attribute_names=tuple(f"large_{f}" for f in AIRIS_FEATURES),
        label_mapping={"B": -1, "A": 1},
    )


def standardized_hyperplanes(means: np.ndarray | None = None,
                             sds: np.ndarray | None = None) -> tuple[Hyperplane, Hyperplane]:
    """Both class-defining planes re-expressed in standardized coordinates.

    Defaults to the exact uniform-distribution means and standard deviations.
    Pass an empirical standardizer's ``means``/``sds`` to get the planes in
    the coordinates that standardizer produces.
    """
    means = AIRIS_MIDPOINTS if means is None else np.asarray(means, dtype=float)
    sds = AIRIS_SDS if sds is None else np.asarray(sds, dtype=float)
    # w @ x < t  with  x = mean + sd * s   <=>   (w * sd) @ s < t - w @ mean
    h1 = Hyperplane(_H1_RAW * sds, -(_H1_THRESHOLD - _H1_RAW @ means), -1, "H1")
    h2 = Hyperplane(_H2_RAW * sds, -(_H2_THRESHOLD - _H2_RAW @ means), +1, "H2")
    return h1, h2


def gen_moons(n: int, noise: float = 0.15, seed: int = 0) -> Dataset:
    """Two interleaving half-circles with isotropic Gaussian noise.

    Class A (+1): ``(cos t, sin t)``; class B (-1): ``(1 - cos t, 0.5 - sin t)``,
    with ``t`` evenly spaced on ``[0, pi]``.  Class A gets ``n // 2`` points.
    Rows are shuffled.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if noise < 0:
        raise ValueError("noise must be non-negative")
    n_a = n // 2
    n_b = n - n_a
    t_a = np.linspace(0.0, math.pi, n_a)
    t_b = np.linspace(0.0, math.pi, n_b)
    X = np.vstack([
        np.column_stack([np.cos(t_a), np.sin(t_a)]),
        np.column_stack([1.0 - np.cos(t_b), 0.5 - np.sin(t_b)]),
    ])
    y = np.concatenate([np.ones(n_a, dtype=int), -np.ones(n_b, dtype=int)])
    rng = make_rng(seed, "moons")
    if noise > 0:
        X = X + rng.normal(scale=noise, size=X.shape)
    order = rng.permutation(n)
    return Dataset(X[order], y[order], ("x1", "x2"), label_mapping={"B": -1, "A": 1})


def train_test_split(data: Dataset, n_train: int, seed: int) -> tuple[Dataset, Dataset]:
    """Random split into the first ``n_train`` rows of a permutation and the rest."""
    if not 0 < n_train < data.n:
        raise ValueError("n_train must leave both parts non-empty")
    order = make_rng(seed, "split").permutation(data.n)
    return data.subset(np.sort(order[:n_train])), data.subset(np.sort(order[n_train:]))
