"""Shared domain types: datasets, standardization, classifiers, explanations.

Points are stored as ``(n, d)`` float arrays and labels as ``int`` arrays with
values in ``{-1, +1}``.  Every type here is immutable after construction.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

ATTRIBUTE_PREFIX = "attr_"


class DatasetError(ValueError):
    """Raised when a dataset cannot be loaded or violates its invariants."""


class ConsistencyError(RuntimeError):
    """Raised when a classifier's labels disagree with its probabilities."""


# ---------------------------------------------------------------------------
# Randomness
# ---------------------------------------------------------------------------


def substream(seed: int | np.random.SeedSequence, *keys: int | str) -> np.random.SeedSequence:
    """Derive a named, order-independent child seed.

    String keys are hashed with CRC32 so that stream identity depends only on
    the names, never on how many streams were created before.
    """
    if isinstance(seed, np.random.SeedSequence):
        entropy, base = seed.entropy, tuple(seed.spawn_key)
    else:
        entropy, base = int(seed), ()
    ints = tuple(zlib.crc32(k.encode()) if isinstance(k, str) else int(k) for k in keys)
    return np.random.SeedSequence(entropy, spawn_key=base + ints)


def make_rng(seed: int | np.random.SeedSequence | np.random.Generator, *keys: int | str) -> np.random.Generator:
    """Counter-based (Philox) generator for ``seed`` and optional sub-stream keys."""
    if isinstance(seed, np.random.Generator):
        if keys:
            raise ValueError("cannot derive sub-streams from an existing Generator")
        return seed
    return np.random.Generator(np.random.Philox(substream(seed, *keys)))


# ---------------------------------------------------------------------------
# Dataset
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Dataset:
    points: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...]
    attributes: np.ndarray | None = None
    attribute_names: tuple[str, ...] = ()
    label_mapping: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        labels = np.asarray(self.labels, dtype=int)
        if points.ndim != 2 or points.shape[1] < 1:
            raise DatasetError(f"points must be a 2-D array with d >= 1, got shape {points.shape}")
        if labels.shape != (points.shape[0],):
            raise DatasetError(f"{labels.shape[0]} labels for {points.shape[0]} points")
        if not np.isin(labels, (-1, 1)).all():
            raise DatasetError("labels must be in {-1, +1}")
        if len(self.feature_names) != points.shape[1]:
            raise DatasetError(f"{len(self.feature_names)} feature names for d={points.shape[1]}")
        points.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        if self.attributes is not None:
            attrs = np.asarray(self.attributes, dtype=int)
            if attrs.ndim != 2 or attrs.shape[0] != points.shape[0]:
                raise DatasetError("attribute matrix must have one row per point")
            if len(self.attribute_names) != attrs.shape[1]:
                raise DatasetError("attribute names do not match attribute columns")
            attrs.setflags(write=False)
            object.__setattr__(self, "attributes", attrs)
            object.__setattr__(self, "attribute_names", tuple(self.attribute_names))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def subset(self, index: Sequence[int] | np.ndarray) -> "Dataset":
        index = np.asarray(index)
        return Dataset(
            self.points[index],
            self.labels[index],
            self.feature_names,
            None if self.attributes is None else self.attributes[index],
            self.attribute_names,
            dict(self.label_mapping),
        )

    def with_points(self, points: np.ndarray) -> "Dataset":
        return Dataset(points, self.labels, self.feature_names, self.attributes,
                       self.attribute_names, dict(self.label_mapping))

    def require_both_classes(self) -> None:
        if len(np.unique(self.labels)) < 2:
            raise DatasetError("dataset contains a single class")


def _map_labels(raw: list[str], source: str) -> tuple[np.ndarray, dict[str, int]]:
    values = sorted(set(raw))
    if len(values) != 2:
        raise DatasetError(f"{source}: label column must contain exactly two distinct values, found {values[:5]}")
    mapping = {values[0]: -1, values[1]: 1}
    return np.array([mapping[v] for v in raw], dtype=int), mapping


def load_dataset(path: str | Path, label_column: str = "label") -> Dataset:
    """Load a comma-separated file with a header row.

    Columns named ``attr_<name>`` are read as binary attribute annotations;
    every other column except ``label_column`` is a numeric feature.  The
    lexicographically smaller label value maps to -1.
    """
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        rows = [row for row in reader if row]
    header = [h.strip() for h in header]
    if label_column not in header:
        raise DatasetError(f"{path}: no label column {label_column!r} in header {header}")
    label_idx = header.index(label_column)
    attr_idx = [i for i, h in enumerate(header) if h.startswith(ATTRIBUTE_PREFIX)]
    feat_idx = [i for i in range(len(header)) if i != label_idx and i not in attr_idx]
    if not feat_idx:
        raise DatasetError(f"{path}: no feature columns")

    points = np.empty((len(rows), len(feat_idx)))
    attrs = np.empty((len(rows), len(attr_idx)), dtype=int)
    raw_labels = []
    for r, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise DatasetError(f"{path}: row {r} has {len(row)} cells, expected {len(header)}")
        for j, c in enumerate(feat_idx):
            try:
                value = float(row[c])
            except ValueError:
                raise DatasetError(
                    f"{path}: non-numeric value {row[c]!r} at row {r}, column {header[c]!r}"
                ) from None
            if not math.isfinite(value):
                raise DatasetError(f"{path}: non-finite value at row {r}, column {header[c]!r}")
            points[r - 2, j] = value
        for j, c in enumerate(attr_idx):
            try:
                attrs[r - 2, j] = int(float(row[c]))
            except ValueError:
                raise DatasetError(
                    f"{path}: non-numeric attribute {row[c]!r} at row {r}, column {header[c]!r}"
                ) from None
        raw_labels.append(row[label_idx].strip())
    labels, mapping = _map_labels(raw_labels, str(path))
    if attr_idx and not np.isin(attrs, (-1, 1)).all():
        raise DatasetError(f"{path}: attribute columns must contain only -1/+1")
    return Dataset(
        points,
        labels,
        tuple(header[i] for i in feat_idx),
        attrs if attr_idx else None,
        tuple(header[i][len(ATTRIBUTE_PREFIX):] for i in attr_idx),
        mapping,
    )


def write_dataset(data: Dataset, path: str | Path, label_column: str = "label") -> None:
    """Write ``data`` in the format read by :func:`load_dataset`.

    Floats are written with ``repr`` so a round trip is exact.
    """
    header = list(data.feature_names) + [label_column]
    if data.attributes is not None:
        header += [ATTRIBUTE_PREFIX + a for a in data.attribute_names]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i in range(data.n):
            row = [repr(float(v)) for v in data.points[i]] + [int(data.labels[i])]
            if data.attributes is not None:
                row += [int(a) for a in data.attributes[i]]
            writer.writerow(row)


# ---------------------------------------------------------------------------
# Standardizer
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Standardizer:
    means: np.ndarray
    sds: np.ndarray
    feature_names: tuple[str, ...] = ()

    def __post_init__(self):
        means = np.array(self.means, dtype=float)
        sds = np.array(self.sds, dtype=float)
        if means.shape != sds.shape or means.ndim != 1:
            raise ValueError("means and sds must be vectors of equal length")
        if not (sds > 0).all():
            raise ValueError("standard deviations must be positive")
        means.setflags(write=False)
        sds.setflags(write=False)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "sds", sds)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    def apply(self, x: np.ndarray) -> np.ndarray:
        return apply_standardizer(self, x)

    def invert(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        _check_width(z, self.means.size)
        return z * self.sds + self.means

    def transform(self, data: Dataset) -> Dataset:
        return data.with_points(self.apply(data.points))

    def to_dict(self) -> dict[str, Any]:
        return {"means": self.means.tolist(), "sds": self.sds.tolist(),
                "feature_names": list(self.feature_names)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Standardizer":
        return cls(d["means"], d["sds"], tuple(d.get("feature_names", ())))


def _check_width(x: np.ndarray, d: int) -> None:
    if x.shape[-1] != d:
        raise ValueError(f"vector length {x.shape[-1]} does not match standardizer length {d}")


def fit_standardizer(data: Dataset) -> Standardizer:
    """Per-column mean and population (divide-by-n) standard deviation."""
    if data.n < 2:
        raise DatasetError("need at least two points to standardize")
    means = data.points.mean(axis=0)
    sds = data.points.std(axis=0)
    for name, sd in zip(data.feature_names, sds):
        if not sd > 0:
            raise DatasetError(f"column {name!r} is constant and cannot be standardized")
    return Standardizer(means, sds, data.feature_names)


def apply_standardizer(s: Standardizer, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    _check_width(x, s.means.size)
    return (x - s.means) / s.sds


# ---------------------------------------------------------------------------
# Classifier contract
# ---------------------------------------------------------------------------


def sign_labels(values: np.ndarray) -> np.ndarray:
    """Map real scores to {-1, +1}; zero goes to +1."""
    return np.where(np.asarray(values) >= 0, 1, -1)


class Classifier:
    """Black-box binary classifier.

    Subclasses implement ``_predict`` (hard labels) and optionally
    ``_predict_proba`` (probability of +1).  Both receive a 2-D array.  The
    public methods accept a single vector or a batch.
    """

    name = "classifier"
    has_proba = False
    consistent = True
    concurrent_safe = True
    check_consistency = False

    def predict(self, x: np.ndarray) -> np.ndarray | int:
        X, single = _as_batch(x)
        y = np.asarray(self._predict(X), dtype=int)
        if self.check_consistency and self.has_proba and self.consistent:
            p = np.asarray(self._predict_proba(X), dtype=float)
            decided = p != 0.5
            if np.any(np.where(p[decided] > 0.5, 1, -1) != y[decided]):
                raise ConsistencyError(f"{self.name}: labels disagree with probabilities")
        return int(y[0]) if single else y

    def predict_proba(self, x: np.ndarray) -> np.ndarray | float:
        if not self.has_proba:
            raise NotImplementedError(f"{self.name} does not provide probabilities")
        X, single = _as_batch(x)
        p = np.asarray(self._predict_proba(X), dtype=float)
        return float(p[0]) if single else p

    def soft_or_hard(self, x: np.ndarray) -> np.ndarray:
        """Probabilities if available, else hard labels mapped to {0, 1}."""
        if self.has_proba:
            return np.asarray(self.predict_proba(np.atleast_2d(x)))
        return (np.asarray(self.predict(np.atleast_2d(x))) > 0).astype(float)

    def _predict(self, X: np.ndarray) -> np.ndarray:
        return np.where(self._predict_proba(X) >= 0.5, 1, -1)

    def _predict_proba(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def describe(self) -> dict[str, Any]:
        return {"name": self.name}


def _as_batch(x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return x[None, :], True
    if x.ndim != 2:
        raise ValueError(f"expected a vector or a 2-D batch, got shape {x.shape}")
    return x, False


class FunctionClassifier(Classifier):
    """Wrap plain callables.  ``label_fn`` and ``proba_fn`` take an (n, d) batch."""

    def __init__(
        self,
        label_fn: Callable[[np.ndarray], np.ndarray] | None = None,
        proba_fn: Callable[[np.ndarray], np.ndarray] | None = None,
        *,
        consistent: bool = True,
        concurrent_safe: bool = True,
        name: str = "function",
        check_consistency: bool = True,
    ):
        if label_fn is None and proba_fn is None:
            raise ValueError("need a label function or a probability function")
        self._label_fn = label_fn
        self._proba_fn = proba_fn
        self.has_proba = proba_fn is not None
        self.consistent = consistent
        self.concurrent_safe = concurrent_safe
        self.name = name
        self.check_consistency = check_consistency and label_fn is not None

    def _predict(self, X):
        if self._label_fn is None:
            return super()._predict(X)
        return self._label_fn(X)

    def _predict_proba(self, X):
        return self._proba_fn(X)


# ---------------------------------------------------------------------------
# Explanation
# ---------------------------------------------------------------------------


def _jsonable(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return _jsonable(value.item())
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


@dataclass(frozen=True)
class Explanation:
    """A fitted local linear surrogate ``g(x) = x @ coefficients + intercept``."""

    coefficients: np.ndarray
    intercept: float
    names: tuple[str, ...]
    method: str
    boundary_point: np.ndarray | None = None
    bisected_point: np.ndarray | None = None
    chosen_r: float | None = None
    sample_size: int = 0
    diagnostics: dict[str, Any] = field(default_factory=dict)
    # the winning local sample; kept out of JSON and comparisons
    sample: Any = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        coef = np.asarray(self.coefficients, dtype=float)
        if coef.ndim != 1 or len(self.names) != coef.size:
            raise ValueError(f"{coef.size} coefficients for {len(self.names)} names")
        object.__setattr__(self, "coefficients", coef)
        object.__setattr__(self, "names", tuple(self.names))

    def decision(self, X: np.ndarray) -> np.ndarray:
        return np.atleast_2d(X) @ self.coefficients + self.intercept

    def to_dict(self) -> dict[str, Any]:
        return _jsonable({
            "method": self.method,
            "names": list(self.names),
            "coefficients": self.coefficients,
            "intercept": float(self.intercept),
            "boundary_point": self.boundary_point,
            "bisected_point": self.bisected_point,
            "chosen_r": self.chosen_r,
            "sample_size": self.sample_size,
            "diagnostics": self.diagnostics,
        })


jsonable = _jsonable
