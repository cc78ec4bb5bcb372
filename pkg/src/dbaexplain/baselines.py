"""LIME-style baselines for comparison.

Continuous-feature LIME: draw a Gaussian sample with the training means and
per-feature variances, weight by ``exp(-|x - x0|^2 / sigma^2)`` and fit a
weighted least-squares surrogate to the class probabilities.  No LASSO
pre-selection and no L2 penalty.

The attribute variant does the same in a codec's latent space and fits the
surrogate on standardized annotator outputs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Classifier, Explanation, Standardizer, make_rng
from .glm import FitError, fit_wls, weighted_r2


@dataclass(frozen=True)
class LimeParams:
    m: int = 500
    sigma: float | None = None  # None -> 0.75 * sqrt(dimension)
    standardize_attributes: bool = True

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be at least 1")
        if self.sigma is not None and not self.sigma > 0:
            raise ValueError("sigma must be positive")

    def kernel_width(self, dim: int) -> float:
        return default_sigma(dim) if self.sigma is None else float(self.sigma)


def default_sigma(dim: int) -> float:
    return 0.75 * math.sqrt(dim)


def lime_sample(means: np.ndarray, sds: np.ndarray, m: int, rng) -> np.ndarray:
    """``m`` draws from the diagonal Gaussian N(means, diag(sds^2))."""
    means = np.asarray(means, dtype=float)
    sds = np.asarray(sds, dtype=float)
    if np.any(sds <= 0):
        raise ValueError("standard deviations must be positive")
    rng = make_rng(rng)
    return means + sds * rng.standard_normal((m, means.size))


def lime_weights(samples: np.ndarray, x0: np.ndarray, sigma: float) -> np.ndarray:
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    d2 = np.sum((np.atleast_2d(samples) - np.asarray(x0)) ** 2, axis=1)
    return np.exp(-d2 / sigma ** 2)


def lime_explain(stats: Standardizer, x0: np.ndarray, f: Classifier, params: LimeParams = LimeParams(),
                 rng=0, names: tuple[str, ...] | None = None) -> Explanation:
    """Fit a weighted linear surrogate to ``f``'s probabilities around ``x0``.

    ``stats`` supplies the sampling means and standard deviations (for data
    that is already standardized these are zeros and ones).  Without
    probabilities, hard labels are used as 0/1 targets.  The weighted R^2 is
    returned in ``diagnostics["r2"]``; it is ``None`` when the targets are
    constant over the sample.
    """
    x0 = np.asarray(x0, dtype=float)
    sigma = params.kernel_width(x0.size)
    X = lime_sample(stats.means, stats.sds, params.m, rng)
    target = f.soft_or_hard(X)
    labels = np.asarray(f.predict(X))
    w = lime_weights(X, x0, sigma)
    model = fit_wls(X, target, w)
    try:
        r2 = weighted_r2(model, X, target, w)
    except FitError:
        r2 = None
    return Explanation(
        coefficients=model.coefficients,
        intercept=model.intercept,
        names=names or stats.feature_names or tuple(f"x{j}" for j in range(x0.size)),
        method="lime-tab",
        sample_size=params.m,
        diagnostics={
            "x0": x0,
            "label_x0": int(f.predict(x0)),
            "r2": r2,
            "sigma": sigma,
            "class_balance": float(np.mean(labels == 1)),
            "used_probabilities": f.has_proba,
            "wls_notes": list(model.notes),
        },
        sample=LimeSample(X, labels, target, w),
    )


@dataclass(frozen=True)
class LimeSample:
    points: np.ndarray
    labels: np.ndarray
    targets: np.ndarray
    weights: np.ndarray

    @property
    def class_balance(self) -> float:
        return float(np.mean(self.labels == 1))


def lime_att_explain(latent_stats: Standardizer, z0: np.ndarray, f_latent: Classifier, annotators,
                     params: LimeParams = LimeParams(), rng=0):
    """LIME in a latent space with an attribute-space surrogate.

    ``f_latent`` labels latent points (typically ``z -> f(decode(z))``).
    Samples are drawn from the diagonal Gaussian of the encoded training
    data, weighted by latent distance to ``z0``, mapped to attribute
    probabilities, standardized over the sample, and fitted by WLS.
    """
    # imported here to keep module dependencies one-directional
    from .dba_att import AttributeExplanation, AttributeMap

    z0 = np.asarray(z0, dtype=float)
    sigma = params.kernel_width(z0.size)
    Z = lime_sample(latent_stats.means, latent_stats.sds, params.m, rng)
    target = f_latent.soft_or_hard(Z)
    labels = np.asarray(f_latent.predict(Z))
    w = lime_weights(Z, z0, sigma)
    amap = AttributeMap.fit(annotators, Z, standardize=params.standardize_attributes)
    A = amap.transform(Z)
    model = fit_wls(A, target, w)
    try:
        r2 = weighted_r2(model, A, target, w)
    except FitError:
        r2 = None
    return AttributeExplanation.build(
        model=model,
        attribute_map=amap,
        annotators=annotators,
        method="lime-att",
        z0=z0,
        z_b=None,
        chosen_r=None,
        sample_size=params.m,
        diagnostics={
            "label_z0": int(f_latent.predict(z0)),
            "r2": r2,
            "sigma": sigma,
            "class_balance": float(np.mean(labels == 1)),
        },
        sample=LimeSample(Z, labels, target, w),
    )
