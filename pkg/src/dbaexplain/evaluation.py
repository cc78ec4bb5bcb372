"""Evaluation statistics and aggregate reports.

Each explained point gets a record of surrogate quality: fidelity (sign
accuracy on the DBA sample, or weighted R^2 for LIME) and the class balance
of the method's sample.  The record also holds the distance travelled along
the explanation direction until the label flips.  When the true boundary is
known, cosine similarities with the true hyperplane normals are added.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .core import Classifier, Explanation, jsonable, sign_labels
from .datagen import Hyperplane
from .dba_tab import boundary_distance_along

REPORT_SCHEMA_VERSION = "1.0"
TABLE_COLUMNS = (
    "Method",
    "DBA Fidelity",
    "LIME R2-Fidelity",
    "Class Balance",
    "Decision Boundary Distance",
    "Cosine Similarity-",
    "Cosine Similarity+",
    "Failure to Cross Decision Boundary",
)


def dba_fidelity(expl, sample) -> float:
    """Share of sample points where the surrogate's sign matches ``f``'s label."""
    points = np.atleast_2d(sample.points)
    if points.shape[0] == 0:
        raise ValueError("empty sample")
    return float(np.mean(sign_labels(expl.decision(points)) == np.asarray(sample.labels)))


def class_balance(sample) -> float:
    labels = np.asarray(getattr(sample, "labels", sample))
    if labels.size == 0:
        raise ValueError("empty sample")
    return float(np.mean(labels == 1))


def _abs_cosine(a: np.ndarray, b: np.ndarray) -> float:
    return float(abs(a @ b) / (np.linalg.norm(a) * np.linalg.norm(b)))


def cosine_similarity_pm(beta: np.ndarray, hyperplanes: Sequence[Hyperplane],
                         x0: np.ndarray | None = None) -> tuple[float, float]:
    """``(cos-, cos+)`` between ``beta`` and the true hyperplane normals.

    ``cos+`` is the best absolute cosine over all planes.  ``cos-`` is the
    absolute cosine with the plane closest to ``x0`` (point-to-plane
    distance); without ``x0`` it falls back to the first plane.  Absolute
    values make the scores independent of which class the surrogate calls
    positive.
    """
    beta = np.asarray(beta, dtype=float)
    if not np.any(beta):
        raise ValueError("beta must be non-zero")
    cosines = [_abs_cosine(beta, h.coefficients) for h in hyperplanes]
    nearest = 0 if x0 is None else int(np.argmin([float(h.distance(np.asarray(x0))) for h in hyperplanes]))
    return cosines[nearest], max(cosines)


def probe_distance(f: Classifier, x0: np.ndarray, direction: np.ndarray, gamma0: float,
                   max_factor: float = 8.0, tol: float = 1e-4) -> tuple[float, float]:
    """Boundary distance along ``direction``, widening the probe if needed.

    Starts at ``gamma0`` and doubles up to ``max_factor * gamma0``.  Returns
    ``(distance, gamma_used)``; distance is ``inf`` if nothing crossed.
    """
    if not np.any(direction):
        return math.inf, gamma0
    gamma = gamma0
    while gamma <= max_factor * gamma0 * (1 + 1e-12):
        d = boundary_distance_along(f, x0, direction, gamma, tol)
        if math.isfinite(d):
            return d, gamma
        gamma *= 2.0
    return math.inf, gamma / 2.0


def probability_curve(c: Callable[[np.ndarray], np.ndarray], x0: np.ndarray, direction: np.ndarray,
                      length: float, step: float = 0.05, towards: int = -1) -> np.ndarray:
    """Probabilities along ``x0 + towards * t * u`` for ``t = 0, step, ..., length``.

    Returns an ``(n, 2)`` array of ``(t, c)``.  ``towards=-f(x0)`` walks
    towards the other class, matching the distance probe.
    """
    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    t = np.arange(0.0, length + step / 2, step)
    X = np.asarray(x0, dtype=float) + towards * t[:, None] * u
    return np.column_stack([t, np.asarray(c(X), dtype=float)])


@dataclass
class PointRecord:
    index: int
    method: str
    fidelity: float | None = None
    r2: float | None = None
    class_balance: float | None = None
    distance: float = math.nan
    failed: bool = False
    cos_minus: float | None = None
    cos_plus: float | None = None
    chosen_r: float | None = None
    gamma: float | None = None
    direction: list[float] | None = None
    error: str | None = None

    def to_dict(self) -> dict[str, Any]:
        d = jsonable(self.__dict__.copy())
        if math.isinf(self.distance):
            d["distance"] = "failure"
        return d


@dataclass
class EvaluationReport:
    records: list[PointRecord]
    config: dict[str, Any] = field(default_factory=dict)

    def methods(self) -> list[str]:
        seen = []
        for r in self.records:
            if r.method not in seen:
                seen.append(r.method)
        return seen

    def _comparable(self) -> set[int]:
        """Point indices where no method failed to cross."""
        failed = {r.index for r in self.records if r.failed or r.error}
        return {r.index for r in self.records} - failed

    def aggregate(self) -> dict[str, dict[str, Any]]:
        ok = self._comparable()
        out = {}
        for method in self.methods():
            recs = [r for r in self.records if r.method == method]
            done = [r for r in recs if r.error is None]

            def mean(attr, pool=done):
                vals = [getattr(r, attr) for r in pool if getattr(r, attr) is not None]
                return float(np.mean(vals)) if vals else None

            dist_pool = [r for r in done if r.index in ok]
            out[method] = {
                "n_points": len(recs),
                "n_errors": len(recs) - len(done),
                "fidelity": mean("fidelity"),
                "r2": mean("r2"),
                "class_balance": mean("class_balance"),
                "distance": float(np.mean([r.distance for r in dist_pool])) if dist_pool else None,
                "distance_n": len(dist_pool),
                "cos_minus": mean("cos_minus"),
                "cos_plus": mean("cos_plus"),
                "failure_pct": 100.0 * sum(r.failed for r in done) / len(done) if done else 100.0,
            }
        return out

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "config": jsonable(self.config),
            "aggregate": jsonable(self.aggregate()),
            "records": [r.to_dict() for r in self.records],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False)

    def to_table(self) -> str:
        """CSV table with one row per method."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TABLE_COLUMNS)

        def fmt(v, pct=False):
            if v is None:
                return "-"
            return f"{100 * v:.1f}%" if pct else f"{v:.3f}"

        for method, agg in self.aggregate().items():
            writer.writerow([
                method,
                fmt(agg["fidelity"], pct=True),
                fmt(agg["r2"], pct=True),
                fmt(agg["class_balance"], pct=True),
                fmt(agg["distance"]),
                fmt(agg["cos_minus"]),
                fmt(agg["cos_plus"]),
                f"{agg['failure_pct']:.1f}%",
            ])
        return buf.getvalue()


def evaluate_point(
    index: int,
    method: str,
    expl,
    f: Classifier,
    x0: np.ndarray,
    x_b: np.ndarray,
    hyperplanes: Sequence[Hyperplane] | None = None,
    max_factor: float = 8.0,
    direction: np.ndarray | None = None,
    gamma_offset: float = 0.1,
) -> PointRecord:
    """Score one explanation.

    ``x_b`` is the boundary point a DBA detection found for the same ``x0``
    (in the space where ``f`` and ``direction`` live); it fixes the initial
    probe length ``|x0 - x_b| + gamma_offset`` shared by all methods.
    ``direction`` defaults to the explanation's coefficients; cosines are
    taken against it.
    """
    rec = PointRecord(index=index, method=method, chosen_r=getattr(expl, "chosen_r", None))
    sample = expl.sample
    if method.startswith("dba"):
        rec.fidelity = dba_fidelity(expl, sample)
    else:
        rec.r2 = expl.diagnostics.get("r2")
    rec.class_balance = class_balance(sample)
    u = np.asarray(expl.coefficients if direction is None else direction, dtype=float)
    rec.direction = u.tolist()
    gamma0 = float(np.linalg.norm(np.asarray(x0) - np.asarray(x_b))) + gamma_offset
    rec.distance, rec.gamma = probe_distance(f, x0, u, gamma0, max_factor)
    rec.failed = math.isinf(rec.distance)
    if hyperplanes is not None and np.any(u):
        rec.cos_minus, rec.cos_plus = cosine_similarity_pm(u, hyperplanes, x0)
    return rec
