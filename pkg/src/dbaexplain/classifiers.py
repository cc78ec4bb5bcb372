"""Built-in black boxes and adapters for external models.

Every built-in classifier is deterministic and vectorized over batches.
A tie at probability 0.5 resolves to +1.
"""
from __future__ import annotations

import csv
import json
import subprocess
import threading
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import expit

from .core import Classifier, Standardizer, sign_labels
from .datagen import airis_class_rule


class GroundTruthClassifier(Classifier):
    """The AIris labelling rule as a black box with probabilities in {0, 1}.

    If ``standardizer`` is given the classifier accepts standardized
    features and maps them back to raw parameters before applying the rule.
    """

    name = "airis-ground-truth"
    has_proba = True

    def __init__(self, standardizer: Standardizer | None = None):
        self.standardizer = standardizer

    def _raw(self, X):
        if X.shape[1] != 5:
            raise ValueError(f"AIris classifier expects 5 features, got {X.shape[1]}")
        return X if self.standardizer is None else self.standardizer.invert(X)

    def _predict(self, X):
        return airis_class_rule(self._raw(X), warn=False)

    def _predict_proba(self, X):
        return (self._predict(X) > 0).astype(float)

    def describe(self):
        return {"name": self.name,
                "space": "raw" if self.standardizer is None else "standardized"}


def ground_truth_classifier(standardizer: Standardizer | None = None) -> GroundTruthClassifier:
    return GroundTruthClassifier(standardizer)


class LinearClassifier(Classifier):
    """``f(x) = sign(w @ x + b)`` with ``c(x) = sigmoid(w @ x + b)``."""

    name = "linear"
    has_proba = True

    def __init__(self, w: Sequence[float], b: float = 0.0):
        w = np.asarray(w, dtype=float)
        if w.ndim != 1 or not np.any(w):
            raise ValueError("weight vector must be a non-zero vector")
        self.w = w
        self.b = float(b)

    def score(self, X):
        return np.atleast_2d(X) @ self.w + self.b

    def distance(self, x):
        """Euclidean distance from ``x`` to the decision hyperplane."""
        return np.abs(self.score(x)) / np.linalg.norm(self.w)

    def _predict(self, X):
        return sign_labels(self.score(X))

    def _predict_proba(self, X):
        return expit(self.score(X))

    def describe(self):
        return {"name": self.name, "w": self.w.tolist(), "b": self.b}


def linear_classifier(w: Sequence[float], b: float = 0.0) -> LinearClassifier:
    return LinearClassifier(w, b)


class KernelSmoother(Classifier):
    """Nadaraya-Watson estimate of P(y = +1) with a Gaussian kernel.

    ``c(x) = sum_i y_i K(x, x_i) / sum_i K(x, x_i)`` where ``y_i`` in {0, 1}
    and ``K(x, x') = exp(-|x - x'|^2 / (2 h^2))``.
    """

    name = "kernel-smoother"
    has_proba = True

    def __init__(self, points: np.ndarray, labels: np.ndarray, bandwidth: float):
        if not bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        points = np.atleast_2d(np.asarray(points, dtype=float))
        labels = np.asarray(labels)
        if points.shape[0] < 1:
            raise ValueError("need at least one reference point")
        if labels.shape != (points.shape[0],):
            raise ValueError("one label per reference point")
        self.points = points
        # accept {-1, +1} or {0, 1}
        self.targets = (labels > 0).astype(float)
        self.bandwidth = float(bandwidth)
        self._sq_norms = np.einsum("ij,ij->i", points, points)

    def _predict_proba(self, X, chunk: int = 2048):
        out = np.empty(X.shape[0])
        for start in range(0, X.shape[0], chunk):
            Xc = X[start:start + chunk]
            sq = (np.einsum("ij,ij->i", Xc, Xc)[:, None] - 2.0 * Xc @ self.points.T
                  + self._sq_norms[None, :])
            logk = -np.maximum(sq, 0.0) / (2.0 * self.bandwidth ** 2)
            # shift by the row max so far-away queries don't underflow to 0/0
            logk -= logk.max(axis=1, keepdims=True)
            k = np.exp(logk)
            out[start:start + chunk] = k @ self.targets / k.sum(axis=1)
        return np.clip(out, 0.0, 1.0)

    def describe(self):
        return {"name": self.name, "bandwidth": self.bandwidth, "n_reference": int(self.points.shape[0])}


def kernel_smoother_prob(ks: KernelSmoother, x: np.ndarray) -> float | np.ndarray:
    return ks.predict_proba(x)


class KNNClassifier(Classifier):
    """Majority vote of the ``k`` nearest reference points; c(x) is the vote share."""

    name = "knn"
    has_proba = True

    def __init__(self, points: np.ndarray, labels: np.ndarray, k: int = 5):
        if k < 1:
            raise ValueError("k must be positive")
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        self.targets = (np.asarray(labels) > 0).astype(float)
        self.k = min(int(k), self.points.shape[0])

    def _predict_proba(self, X):
        d2 = ((X[:, None, :] - self.points[None, :, :]) ** 2).sum(axis=2)
        idx = np.argsort(d2, axis=1, kind="stable")[:, :self.k]
        return self.targets[idx].mean(axis=1)

    def describe(self):
        return {"name": self.name, "k": self.k}


class ScoredTableClassifier(Classifier):
    """Precomputed probabilities on a finite set of points.

    Queries are answered by the probability of the nearest scored point, so
    the table should cover the region being explained densely.
    """

    name = "scored-csv"
    has_proba = True

    def __init__(self, points: np.ndarray, probabilities: np.ndarray):
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        self.probabilities = np.asarray(probabilities, dtype=float)
        if self.probabilities.shape != (self.points.shape[0],):
            raise ValueError("one probability per scored point")
        if np.any((self.probabilities < 0) | (self.probabilities > 1)):
            raise ValueError("probabilities must lie in [0, 1]")

    @classmethod
    def from_csv(cls, path: str | Path, probability_column: str = "p") -> "ScoredTableClassifier":
        with Path(path).open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = [h.strip() for h in next(reader)]
            rows = [[float(v) for v in row] for row in reader if row]
        j = header.index(probability_column)
        arr = np.array(rows)
        return cls(np.delete(arr, j, axis=1), arr[:, j])

    def _predict_proba(self, X):
        d2 = ((X[:, None, :] - self.points[None, :, :]) ** 2).sum(axis=2)
        return self.probabilities[np.argmin(d2, axis=1)]


class SubprocessClassifier(Classifier):
    """Score points with an external process speaking newline-delimited JSON.

    Each request is ``{"x": [...]}`` on the child's stdin; the child answers
    ``{"p": 0.73}`` on one stdout line.  Declared serial.
    """

    name = "subprocess"
    has_proba = True
    concurrent_safe = False

    def __init__(self, command: Sequence[str]):
        self.command = list(command)
        self._proc = subprocess.Popen(
            self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True, bufsize=1
        )
        self._lock = threading.Lock()

    def _query(self, x: np.ndarray) -> float:
        self._proc.stdin.write(json.dumps({"x": [float(v) for v in x]}) + "\n")
        self._proc.stdin.flush()
        line = self._proc.stdout.readline()
        if not line:
            raise RuntimeError(f"scoring process {self.command} closed its output")
        return float(json.loads(line)["p"])

    def _predict_proba(self, X):
        with self._lock:
            return np.array([self._query(x) for x in X])

    def close(self) -> None:
        if self._proc.poll() is None:
            self._proc.stdin.close()
            self._proc.wait(timeout=10)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def describe(self):
        return {"name": self.name, "command": self.command}


def train_accuracy(clf: Classifier, X: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean(clf.predict(np.atleast_2d(X)) == np.asarray(y)))
