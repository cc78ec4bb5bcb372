"""Boundary approximation in a latent space with user-specified attributes.

A :class:`Codec` maps inputs to latent vectors and back.  Detection and
simulation run in the latent space, with labels obtained as
``z -> decode(z) -> f``.  The simulation vertices are ``z_b +/- alpha *
theta_j`` where ``theta_j`` are the coefficient vectors of linear
*annotators* (penalized logistic models predicting binary attributes from
latents).  The surrogate is fitted on the annotator outputs, standardized
over the local sample.
"""
from __future__ import annotations

import json
import logging
import math
import subprocess
import threading
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from scipy.special import expit

from .core import Classifier, Dataset, jsonable
from .dba_tab import BoundaryDetection, DbaParams, DegenerateSampleError, detect, surrogate_fidelity, tune_radius
from .glm import LinearModel, fit_logistic

logger = logging.getLogger(__name__)

DEFAULT_ANNOTATOR_PENALTY = 0.1


class LabelInstabilityError(RuntimeError):
    """The codec round trip changes the classifier's label of the input."""


# ---------------------------------------------------------------------------
# Codecs
# ---------------------------------------------------------------------------


class Codec:
    """Encoder/decoder pair between inputs (width d) and latents (width l)."""

    name = "codec"
    concurrent_safe = True

    def encode(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def decode(self, Z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def roundtrip(self, X: np.ndarray) -> np.ndarray:
        return self.decode(self.encode(X))

    def describe(self) -> dict[str, Any]:
        return {"name": self.name}


class IdentityCodec(Codec):
    name = "identity"

    def encode(self, X):
        return np.array(X, dtype=float)

    def decode(self, Z):
        return np.array(Z, dtype=float)


class AffineCodec(Codec):
    """PCA whitening learned from data: ``z = (x - mean) @ V / s``.

    With fewer components than input features the codec is lossy; decoding
    returns the projection onto the retained principal subspace.
    """

    name = "affine"

    def __init__(self, mean: np.ndarray, components: np.ndarray, scales: np.ndarray):
        self.mean = np.asarray(mean, dtype=float)
        self.components = np.asarray(components, dtype=float)  # (l, d), orthonormal rows
        self.scales = np.asarray(scales, dtype=float)
        if np.any(self.scales <= 0):
            raise ValueError("whitening scales must be positive")

    @classmethod
    def fit(cls, X: np.ndarray, n_components: int | None = None) -> "AffineCodec":
        X = np.asarray(X, dtype=float)
        mean = X.mean(axis=0)
        _, s, vt = np.linalg.svd(X - mean, full_matrices=False)
        l = vt.shape[0] if n_components is None else int(n_components)
        if not 1 <= l <= vt.shape[0]:
            raise ValueError(f"n_components must be in [1, {vt.shape[0]}]")
        scales = s[:l] / math.sqrt(X.shape[0])
        if np.any(scales <= 1e-12):
            raise ValueError("data has (near) zero variance along a retained component")
        return cls(mean, vt[:l], scales)

    @property
    def latent_dim(self) -> int:
        return self.components.shape[0]

    def encode(self, X):
        return ((np.asarray(X, dtype=float) - self.mean) @ self.components.T) / self.scales

    def decode(self, Z):
        return (np.asarray(Z, dtype=float) * self.scales) @ self.components + self.mean

    def describe(self):
        return {"name": self.name, "latent_dim": self.latent_dim}


class FunctionCodec(Codec):
    def __init__(self, encode: Callable, decode: Callable, name: str = "function",
                 concurrent_safe: bool = True):
        self._encode = encode
        self._decode = decode
        self.name = name
        self.concurrent_safe = concurrent_safe

    def encode(self, X):
        return np.asarray(self._encode(np.asarray(X, dtype=float)), dtype=float)

    def decode(self, Z):
        return np.asarray(self._decode(np.asarray(Z, dtype=float)), dtype=float)


class SubprocessCodec(Codec):
    """External codec over newline-delimited JSON.

    Requests are ``{"op": "encode" | "decode", "v": [...]}``; each reply is one
    line ``{"v": [...]}``.  Declared serial.
    """

    name = "subprocess"
    concurrent_safe = False

    def __init__(self, command: Sequence[str]):
        self.command = list(command)
        self._proc = subprocess.Popen(self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                                      text=True, bufsize=1)
        self._lock = threading.Lock()

    def _call(self, op: str, V: np.ndarray) -> np.ndarray:
        V = np.asarray(V, dtype=float)
        single = V.ndim == 1
        out = []
        with self._lock:
            for v in np.atleast_2d(V):
                self._proc.stdin.write(json.dumps({"op": op, "v": [float(t) for t in v]}) + "\n")
                self._proc.stdin.flush()
                line = self._proc.stdout.readline()
                if not line:
                    raise RuntimeError(f"codec process {self.command} closed its output")
                out.append(json.loads(line)["v"])
        arr = np.array(out, dtype=float)
        return arr[0] if single else arr

    def encode(self, X):
        return self._call("encode", X)

    def decode(self, Z):
        return self._call("decode", Z)

    def close(self):
        if self._proc.poll() is None:
            self._proc.stdin.close()
            self._proc.wait(timeout=10)


class LatentClassifier(Classifier):
    """Label latent points by decoding them and querying the input-space classifier."""

    def __init__(self, f: Classifier, codec: Codec):
        self.f = f
        self.codec = codec
        self.has_proba = f.has_proba
        self.consistent = f.consistent
        self.concurrent_safe = f.concurrent_safe and codec.concurrent_safe
        self.name = f"{f.name}@{codec.name}"

    def _predict(self, Z):
        return np.asarray(self.f.predict(np.atleast_2d(self.codec.decode(Z))))

    def _predict_proba(self, Z):
        return np.asarray(self.f.predict_proba(np.atleast_2d(self.codec.decode(Z))))


def label_stability(codec: Codec, f: Classifier, X: np.ndarray) -> float:
    """Share of points whose label survives ``x -> encode -> decode``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return float(np.mean(np.asarray(f.predict(X)) == np.asarray(f.predict(codec.roundtrip(X)))))


def probability_stability(codec: Codec, c: Callable[[np.ndarray], np.ndarray] | Classifier,
                          X: np.ndarray) -> float:
    """Mean absolute change ``(1/n) sum |c(x_i) - c(x'_i)|`` over a codec round trip."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    prob = c.predict_proba if isinstance(c, Classifier) else c
    return float(np.mean(np.abs(np.asarray(prob(X)) - np.asarray(prob(codec.roundtrip(X))))))


# ---------------------------------------------------------------------------
# Annotators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Annotator:
    """``a(z) = sigmoid(theta @ z + theta0)``: probability that an attribute holds."""

    theta: np.ndarray
    theta0: float
    name: str

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        if not np.isfinite(theta).all():
            raise ValueError("annotator coefficients must be finite")
        object.__setattr__(self, "theta", theta)

    def __call__(self, Z: np.ndarray) -> np.ndarray:
        return expit(np.atleast_2d(Z) @ self.theta + self.theta0)


def train_annotator(Z: np.ndarray, labels: np.ndarray, lam: float = DEFAULT_ANNOTATOR_PENALTY,
                    name: str = "attribute") -> Annotator:
    if not lam > 0:
        raise ValueError("annotators use a strictly positive L2 penalty")
    labels = np.asarray(labels)
    if len(np.unique(labels)) < 2:
        raise ValueError(f"annotation {name!r} contains a single class")
    model = fit_logistic(Z, labels, lam=lam)
    return Annotator(model.coefficients, model.intercept, name)


def train_annotators(Z: np.ndarray, attributes: np.ndarray, names: Sequence[str],
                     lam: float = DEFAULT_ANNOTATOR_PENALTY) -> list[Annotator]:
    attributes = np.atleast_2d(attributes)
    return [train_annotator(Z, attributes[:, j], lam, name) for j, name in enumerate(names)]


def coordinate_annotators(dim: int, scale: float = 1.0, names: Sequence[str] | None = None) -> list[Annotator]:
    """Annotators ``theta_j = scale * e_j``, ``theta0 = 0``: one per latent coordinate."""
    names = names or [f"z{j}" for j in range(dim)]
    return [Annotator(scale * np.eye(dim)[j], 0.0, names[j]) for j in range(dim)]


@dataclass(frozen=True)
class AttributeMap:
    """Annotator outputs, standardized by their mean and sd over a sample.

    Attributes that are constant over the sample are dropped.
    """

    annotators: tuple[Annotator, ...]
    retained: tuple[int, ...]
    means: np.ndarray
    sds: np.ndarray

    @classmethod
    def fit(cls, annotators: Sequence[Annotator], Z: np.ndarray, standardize: bool = True) -> "AttributeMap":
        A = np.column_stack([a(Z) for a in annotators])
        means = A.mean(axis=0)
        sds = A.std(axis=0)
        degenerate = [a.name for a, s in zip(annotators, sds) if not s > 1e-12]
        if degenerate:
            if len(degenerate) == len(annotators):
                raise DegenerateSampleError(f"all attributes are constant over the sample: {degenerate}")
            logger.warning("dropping attributes constant over the sample: %s", degenerate)
        keep = tuple(j for j, s in enumerate(sds) if s > 1e-12)
        if not standardize:
            means = np.zeros_like(means)
            sds = np.ones_like(sds)
        return cls(tuple(annotators), keep, means[list(keep)], sds[list(keep)])

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.annotators[j].name for j in self.retained)

    @property
    def dropped(self) -> tuple[str, ...]:
        return tuple(a.name for j, a in enumerate(self.annotators) if j not in self.retained)

    def raw(self, Z: np.ndarray) -> np.ndarray:
        return np.column_stack([self.annotators[j](Z) for j in self.retained])

    def transform(self, Z: np.ndarray) -> np.ndarray:
        return (self.raw(Z) - self.means) / self.sds

    def thetas(self) -> np.ndarray:
        return np.array([self.annotators[j].theta for j in self.retained])


# ---------------------------------------------------------------------------
# Explanation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AttributeExplanation:
    """Surrogate over standardized attributes plus its latent-space direction.

    ``latent_direction`` is ``sum_j (beta_j / sd_j) theta_j`` (coefficients
    rescaled to raw annotator outputs); ``latent_direction_standardized`` is
    ``sum_j beta_j theta_j`` with the reported standardized coefficients.
    """

    coefficients: np.ndarray
    intercept: float
    names: tuple[str, ...]
    attribute_means: np.ndarray
    attribute_sds: np.ndarray
    latent_direction: np.ndarray
    latent_direction_standardized: np.ndarray
    method: str
    z0: np.ndarray
    z_b: np.ndarray | None = None
    chosen_r: float | None = None
    sample_size: int = 0
    dropped: tuple[str, ...] = ()
    diagnostics: dict[str, Any] = field(default_factory=dict)
    sample: Any = field(default=None, repr=False, compare=False)
    attribute_map: AttributeMap | None = field(default=None, repr=False, compare=False)

    @classmethod
    def build(cls, *, model: LinearModel, attribute_map: AttributeMap, annotators, method, z0, z_b,
              chosen_r, sample_size, diagnostics, sample):
        return cls(
            coefficients=model.coefficients,
            intercept=model.intercept,
            names=attribute_map.names,
            attribute_means=attribute_map.means,
            attribute_sds=attribute_map.sds,
            latent_direction=latent_direction(model.coefficients, attribute_map, rescale=True),
            latent_direction_standardized=latent_direction(model.coefficients, attribute_map, rescale=False),
            method=method,
            z0=np.asarray(z0, dtype=float),
            z_b=z_b,
            chosen_r=chosen_r,
            sample_size=sample_size,
            dropped=attribute_map.dropped,
            diagnostics=diagnostics,
            sample=sample,
            attribute_map=attribute_map,
        )

    def decision(self, Z: np.ndarray) -> np.ndarray:
        """Surrogate score of latent points."""
        return self.attribute_map.transform(Z) @ self.coefficients + self.intercept

    def to_dict(self) -> dict[str, Any]:
        return jsonable({
            "method": self.method,
            "names": list(self.names),
            "coefficients": self.coefficients,
            "intercept": float(self.intercept),
            "attribute_means": self.attribute_means,
            "attribute_sds": self.attribute_sds,
            "latent_direction": self.latent_direction,
            "latent_direction_standardized": self.latent_direction_standardized,
            "latent_direction_convention": "coefficients divided by attribute sd",
            "z0": self.z0,
            "z_b": self.z_b,
            "chosen_r": self.chosen_r,
            "sample_size": self.sample_size,
            "dropped_attributes": list(self.dropped),
            "diagnostics": self.diagnostics,
        })


def latent_direction(coefficients: np.ndarray, attribute_map: AttributeMap | Sequence[Annotator],
                     rescale: bool = True) -> np.ndarray:
    """``sum_j c_j theta_j`` over retained annotators.

    With ``rescale`` each coefficient is first divided by its attribute's
    sample sd, so the direction refers to raw annotator probabilities.  A
    plain list of annotators is treated as all-retained and unstandardized.
    """
    coefficients = np.asarray(coefficients, dtype=float)
    if isinstance(attribute_map, AttributeMap):
        thetas = attribute_map.thetas()
        sds = attribute_map.sds
    else:
        thetas = np.array([a.theta for a in attribute_map])
        sds = np.ones(len(thetas))
    if coefficients.size != thetas.shape[0] or coefficients.size < 1:
        raise ValueError("one coefficient per retained annotator is required")
    weights = coefficients / sds if rescale else coefficients
    return weights @ thetas


def _latent_dataset(D: Dataset, codec: Codec) -> Dataset:
    Z = np.atleast_2d(codec.encode(D.points))
    return Dataset(Z, D.labels, tuple(f"z{j}" for j in range(Z.shape[1])))


def explain_att(D: Dataset, x0: np.ndarray, f: Classifier, codec: Codec, annotators: Sequence[Annotator],
                params: DbaParams = DbaParams(), seed=0,
                detection: BoundaryDetection | None = None) -> AttributeExplanation:
    """Attribute-based boundary approximation for ``x0``.

    Refuses with :class:`LabelInstabilityError` when the codec round trip
    changes ``f``'s label of ``x0``.  ``detection`` may carry a precomputed
    latent-space detection for ``encode(x0)``.
    """
    x0 = np.asarray(x0, dtype=float)
    y0 = f.predict(x0)
    if f.predict(codec.roundtrip(x0)) != y0:
        raise LabelInstabilityError(
            "the codec round trip changes the label of x0; its latent representation "
            "cannot be used to explain the decision boundary"
        )
    annotators = tuple(annotators)
    if not annotators:
        raise ValueError("at least one annotator is required")
    z0 = np.asarray(codec.encode(x0), dtype=float)
    f_z = LatentClassifier(f, codec)
    Dz = _latent_dataset(D, codec)
    if detection is None:
        detection = detect(Dz, z0, f_z, params)
    basis = np.array([a.theta for a in annotators])

    def features(Z):
        amap = AttributeMap.fit(annotators, Z)
        return amap.transform(Z), {"map": amap}

    def direction(model, meta):
        return latent_direction(model.coefficients, meta["map"], rescale=True)

    best, distances = tune_radius(f_z, z0, detection, params, seed, basis, features, direction)
    amap = best.extra["map"]
    A = amap.transform(best.sample.points)
    return AttributeExplanation.build(
        model=best.model,
        attribute_map=amap,
        annotators=annotators,
        method="dba-att",
        z0=z0,
        z_b=detection.x_b,
        chosen_r=best.r,
        sample_size=params.m,
        diagnostics={
            "label_x0": int(y0),
            "boundary_distance": best.distance,
            "detection_distance": detection.distance,
            "z_j": detection.x_j,
            "alpha": best.sample.alpha,
            "distances": {repr(r): d for r, d in distances.items()},
            "fidelity": surrogate_fidelity(best.model, A, best.sample.labels),
            "class_balance": best.sample.class_balance,
            "surrogate_converged": best.model.converged,
        },
        sample=best.sample,
    )
