"""Build a run from a resolved configuration, then explain and evaluate.

All randomness flows from ``config["seed"]`` through named sub-streams:

========================  ==========================================
``airis``/``moons``       data generation (see :mod:`.datagen`)
``split``                 train/test split
``evaluation``            choice of explained test points
``simulation``, i         DBA-Tab sample for test point i
``simulation-att``, i     DBA-Att sample for test point i
``lime``, i               LIME-Tab sample for test point i
``lime-att``, i           LIME-Att sample for test point i
========================  ==========================================

so switching a method on or off never changes another method's draws.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .baselines import LimeParams, lime_att_explain, lime_explain
from .classifiers import (
    GroundTruthClassifier,
    KernelSmoother,
    KNNClassifier,
    LinearClassifier,
    ScoredTableClassifier,
    SubprocessClassifier,
)
from .config import ConfigError
from .core import Classifier, Dataset, Standardizer, fit_standardizer, load_dataset, make_rng, substream
from .datagen import Hyperplane, gen_airis_tab, gen_moons, standardized_hyperplanes, train_test_split
from .dba_att import (
    AffineCodec,
    Codec,
    IdentityCodec,
    LabelInstabilityError,
    LatentClassifier,
    SubprocessCodec,
    coordinate_annotators,
    explain_att,
    label_stability,
    probability_stability,
    train_annotators,
)
from .dba_tab import (
    MOONS_R_GRID,
    DEFAULT_R_GRID,
    DbaParams,
    DegenerateSampleError,
    DetectionError,
    detect,
    radius_profile,
    tune_and_explain,
)
from .evaluation import EvaluationReport, PointRecord, evaluate_point, probability_curve
from .glm import FitError

logger = logging.getLogger(__name__)

TAB_METHODS = ("dba-tab", "lime-tab")
ATT_METHODS = ("dba-att", "lime-att")
METHODS = TAB_METHODS + ATT_METHODS

# per-point problems that are recorded rather than aborting the run
POINT_ERRORS = (DetectionError, DegenerateSampleError, LabelInstabilityError, FitError)


class RawSpaceClassifier(Classifier):
    """Accept standardized inputs for a classifier defined on raw features."""

    def __init__(self, inner: Classifier, standardizer: Standardizer):
        self.inner = inner
        self.standardizer = standardizer
        self.name = inner.name
        self.has_proba = inner.has_proba
        self.consistent = inner.consistent
        self.concurrent_safe = inner.concurrent_safe

    def _predict(self, X):
        return self.inner.predict(self.standardizer.invert(X))

    def _predict_proba(self, X):
        return self.inner.predict_proba(self.standardizer.invert(X))

    def describe(self):
        return {**self.inner.describe(), "input": "standardized"}


@dataclass
class Run:
    """Everything a resolved config describes, in the explanation space.

    ``train``/``test`` and ``classifier`` live in standardized coordinates
    when ``config["standardize"]`` is set; ``raw_train``/``raw_test`` keep
    the original values.
    """

    config: dict[str, Any]
    raw_train: Dataset
    raw_test: Dataset
    train: Dataset
    test: Dataset
    standardizer: Standardizer | None
    classifier: Classifier
    hyperplanes: tuple[Hyperplane, ...] | None
    dba: DbaParams
    lime: LimeParams
    _codec: Codec | None = field(default=None, repr=False)
    _annotators: tuple | None = field(default=None, repr=False)

    @property
    def seed(self) -> int:
        return int(self.config["seed"])

    @property
    def codec(self) -> Codec:
        if self._codec is None:
            self._codec = _build_codec(self.config["codec"], self.train)
        return self._codec

    @property
    def annotators(self) -> tuple:
        if self._annotators is None:
            self._annotators = _build_annotators(self.config["annotators"], self.codec, self.train)
        return self._annotators

    def latent_train(self) -> Dataset:
        Z = np.atleast_2d(self.codec.encode(self.train.points))
        return Dataset(Z, self.classifier.predict(self.train.points), tuple(f"z{j}" for j in range(Z.shape[1])))

    def latent_stats(self) -> Standardizer:
        return fit_standardizer(self.latent_train())

    def train_stats(self) -> Standardizer:
        return fit_standardizer(self.train)

    def select_points(self) -> list[int]:
        """Test-set indices to explain: explicit ``indices`` or a seeded draw."""
        ev = self.config["evaluation"]
        if ev.get("indices"):
            idx = [int(i) for i in ev["indices"]]
            bad = [i for i in idx if i >= self.test.n]
            if bad:
                raise ConfigError(f"test indices {bad} out of range for {self.test.n} test points")
            return idx
        n = int(ev["points"])
        if n > self.test.n:
            raise ConfigError(f"asked for {n} points but the test set has {self.test.n}")
        return sorted(make_rng(self.seed, "evaluation").choice(self.test.n, size=n, replace=False).tolist())

    def close(self) -> None:
        for obj in (self.classifier, getattr(self.classifier, "inner", None), self._codec):
            if hasattr(obj, "close"):
                obj.close()


def _r_grid(value) -> tuple[float, ...]:
    if value == "default":
        return DEFAULT_R_GRID
    if value == "moons":
        return MOONS_R_GRID
    grid = tuple(float(r) for r in value)
    if list(grid) != sorted(grid):
        raise ConfigError("dba.r_grid must be ascending")
    return grid


def _build_data(section: dict[str, Any], seed: int) -> tuple[Dataset, Dataset]:
    kind = section["kind"]
    if kind == "airis-tab":
        return gen_airis_tab(section["n_train"], seed, "train"), gen_airis_tab(section["n_test"], seed, "test")
    if kind == "moons":
        full = gen_moons(section["n"], section["noise"], seed)
        return train_test_split(full, section["n_train"], seed)
    if kind == "csv":
        train = load_dataset(section["train"], section["label_column"])
        test = load_dataset(section["test"], section["label_column"]) if section.get("test") else train
        if test.feature_names != train.feature_names:
            raise ConfigError("train and test CSVs have different feature columns")
        return train, test
    raise ConfigError(f"unknown dataset kind {kind!r}")


def _build_classifier(section: dict[str, Any], dataset_kind: str, train: Dataset,
                      standardizer: Standardizer | None) -> Classifier:
    kind = section["kind"]
    if kind == "ground-truth":
        if dataset_kind != "airis-tab":
            raise ConfigError("the ground-truth classifier is only defined for the airis-tab dataset")
        return GroundTruthClassifier(standardizer)
    # these are fitted or defined in the explanation space
    if kind == "kernel-smoother":
        return KernelSmoother(train.points, train.labels, section["bandwidth"])
    if kind == "knn":
        return KNNClassifier(train.points, train.labels, section["k"])
    if kind == "linear":
        if len(section["w"]) != train.d:
            raise ConfigError(f"linear classifier has {len(section['w'])} weights for {train.d} features")
        return LinearClassifier(section["w"], section["b"])
    # external models score raw features
    if kind == "scored-csv":
        inner = ScoredTableClassifier.from_csv(section["path"], section["column"])
    elif kind == "subprocess":
        inner = SubprocessClassifier(section["command"])
    else:
        raise ConfigError(f"unknown classifier kind {kind!r}")
    return inner if standardizer is None else RawSpaceClassifier(inner, standardizer)


def _build_codec(section: dict[str, Any], train: Dataset) -> Codec:
    kind = section["kind"]
    if kind == "identity":
        return IdentityCodec()
    if kind == "affine":
        return AffineCodec.fit(train.points, section.get("n_components"))
    if kind == "subprocess":
        return SubprocessCodec(section["command"])
    raise ConfigError(f"unknown codec kind {kind!r}")


def _build_annotators(section: dict[str, Any], codec: Codec, train: Dataset) -> tuple:
    Z = np.atleast_2d(codec.encode(train.points))
    if section["kind"] == "coordinate":
        names = train.feature_names if isinstance(codec, IdentityCodec) else None
        return tuple(coordinate_annotators(Z.shape[1], section["scale"], names))
    if section["kind"] == "trained":
        if train.attributes is None:
            raise ConfigError("trained annotators need attribute columns in the training data")
        return tuple(train_annotators(Z, train.attributes, train.attribute_names, section["lambda"]))
    raise ConfigError(f"unknown annotator kind {section['kind']!r}")


def build_run(config: dict[str, Any]) -> Run:
    """Materialize a resolved config (see :func:`.config.resolve_config`)."""
    seed = int(config["seed"])
    raw_train, raw_test = _build_data(config["dataset"], seed)
    standardizer = fit_standardizer(raw_train) if config["standardize"] else None
    train = raw_train if standardizer is None else standardizer.transform(raw_train)
    test = raw_test if standardizer is None else standardizer.transform(raw_test)
    kind = config["dataset"]["kind"]
    clf = _build_classifier(config["classifier"], kind, train, standardizer)
    hyperplanes = None
    if kind == "airis-tab":
        if standardizer is None:
            # unit sds and zero means leave the raw planes unchanged
            hyperplanes = standardized_hyperplanes(np.zeros(5), np.ones(5))
        else:
            hyperplanes = standardized_hyperplanes(standardizer.means, standardizer.sds)
    d = config["dba"]
    dba = DbaParams(k=d["k"], m=d["m"], r_grid=_r_grid(d["r_grid"]), tol=d["tol"],
                    max_iter=d["max_iter"], gamma_offset=d["gamma_offset"])
    lime = LimeParams(m=config["lime"]["m"], sigma=config["lime"]["sigma"])
    return Run(config, raw_train, raw_test, train, test, standardizer, clf, hyperplanes, dba, lime)


# ---------------------------------------------------------------------------
# Explaining
# ---------------------------------------------------------------------------


def explain_point(run: Run, method: str, index: int, detection=None):
    """Explain test point ``index`` with ``method``; seeds are keyed by the index."""
    x0 = run.test.points[index]
    f = run.classifier
    if method == "dba-tab":
        return tune_and_explain(run.train, x0, f, run.dba, substream(run.seed, "simulation", index), detection)
    if method == "lime-tab":
        return lime_explain(run.train_stats(), x0, f, run.lime, make_rng(run.seed, "lime", index),
                            run.train.feature_names)
    if method == "dba-att":
        return explain_att(run.train, x0, f, run.codec, run.annotators, run.dba,
                           substream(run.seed, "simulation-att", index), detection)
    if method == "lime-att":
        _require_stable(run, x0)
        f_z = LatentClassifier(f, run.codec)
        return lime_att_explain(run.latent_stats(), run.codec.encode(x0), f_z, run.annotators, run.lime,
                                make_rng(run.seed, "lime-att", index))
    raise ConfigError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")


def _require_stable(run: Run, x0: np.ndarray) -> None:
    if run.classifier.predict(run.codec.roundtrip(x0)) != run.classifier.predict(x0):
        raise LabelInstabilityError("the codec round trip changes the label of x0")


def _is_stable(run: Run, x0: np.ndarray) -> bool:
    return bool(run.classifier.predict(run.codec.roundtrip(x0)) == run.classifier.predict(x0))


# ---------------------------------------------------------------------------
# Evaluating
# ---------------------------------------------------------------------------


@dataclass
class _Context:
    """Per-run objects shared by all points (built once, read-only)."""

    train_stats: Standardizer
    latent_train: Dataset | None = None
    latent_stats: Standardizer | None = None
    latent_classifier: Classifier | None = None


def _evaluate_one(run: Run, ctx: _Context, methods: Sequence[str], index: int) -> list[PointRecord]:
    ev = run.config["evaluation"]
    x0 = run.test.points[index]
    f = run.classifier
    out: list[PointRecord] = []

    def failed(method: str, exc: Exception) -> PointRecord:
        logger.warning("point %d, %s: %s", index, method, exc)
        return PointRecord(index=index, method=method, error=f"{type(exc).__name__}: {exc}")

    tab = [m for m in methods if m in TAB_METHODS]
    if tab:
        try:
            det = detect(run.train, x0, f, run.dba)
        except POINT_ERRORS as exc:
            out.extend(failed(m, exc) for m in tab)
        else:
            for m in tab:
                try:
                    if m == "dba-tab":
                        expl = tune_and_explain(run.train, x0, f, run.dba,
                                                substream(run.seed, "simulation", index), det)
                    else:
                        expl = lime_explain(ctx.train_stats, x0, f, run.lime, make_rng(run.seed, "lime", index),
                                            run.train.feature_names)
                    out.append(evaluate_point(index, m, expl, f, x0, det.x_b, run.hyperplanes,
                                              ev["max_factor"], gamma_offset=run.dba.gamma_offset))
                except POINT_ERRORS as exc:
                    out.append(failed(m, exc))

    att = [m for m in methods if m in ATT_METHODS]
    if att:
        f_z = ctx.latent_classifier
        z0 = np.asarray(run.codec.encode(x0), dtype=float)
        # latent directions only compare with feature-space planes when the codec is the identity
        planes = run.hyperplanes if isinstance(run.codec, IdentityCodec) else None
        try:
            if not _is_stable(run, x0):
                raise LabelInstabilityError("the codec round trip changes the label of x0")
            det_z = detect(ctx.latent_train, z0, f_z, run.dba)
        except POINT_ERRORS as exc:
            out.extend(failed(m, exc) for m in att)
        else:
            for m in att:
                try:
                    if m == "dba-att":
                        expl = explain_att(run.train, x0, f, run.codec, run.annotators, run.dba,
                                           substream(run.seed, "simulation-att", index), det_z)
                    else:
                        expl = lime_att_explain(ctx.latent_stats, z0, f_z, run.annotators, run.lime,
                                                make_rng(run.seed, "lime-att", index))
                    out.append(evaluate_point(index, m, expl, f_z, z0, det_z.x_b, planes, ev["max_factor"],
                                              direction=expl.latent_direction, gamma_offset=run.dba.gamma_offset))
                except POINT_ERRORS as exc:
                    out.append(failed(m, exc))
    order = {m: i for i, m in enumerate(methods)}
    return sorted(out, key=lambda r: order[r.method])


def _parallel_ok(run: Run, methods: Sequence[str]) -> bool:
    safe = run.classifier.concurrent_safe
    if any(m in ATT_METHODS for m in methods):
        safe = safe and getattr(run.codec, "concurrent_safe", True)
    return safe


def evaluate_run(run: Run, methods: Sequence[str] | None = None,
                 indices: Sequence[int] | None = None) -> EvaluationReport:
    """Explain and score the selected test points with every method.

    With ``evaluation.label_stable_only`` only points whose label survives
    the codec round trip are admitted for every method; otherwise codec
    methods record such points as errors.  Records are ordered by point, then
    by method, regardless of ``jobs``.
    """
    methods = list(methods or run.config["methods"])
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise ConfigError(f"unknown method(s) {unknown}; choose from {', '.join(METHODS)}")
    indices = list(run.select_points() if indices is None else indices)
    needs_codec = any(m in ATT_METHODS for m in methods) or run.config["evaluation"]["label_stable_only"]
    skipped: list[int] = []
    if run.config["evaluation"]["label_stable_only"]:
        kept = [i for i in indices if _is_stable(run, run.test.points[i])]
        skipped = [i for i in indices if i not in kept]
        indices = kept
    if not indices:
        raise ConfigError("no admissible test points to evaluate")

    ctx = _Context(train_stats=run.train_stats())
    if any(m in ATT_METHODS for m in methods):
        ctx.latent_train = run.latent_train()
        ctx.latent_stats = fit_standardizer(ctx.latent_train)
        ctx.latent_classifier = LatentClassifier(run.classifier, run.codec)
    if needs_codec:
        run.annotators  # build once, before any worker threads start

    jobs = int(run.config["jobs"])
    if jobs > 1 and not _parallel_ok(run, methods):
        logger.warning("classifier or codec is not concurrent-safe; running serially")
        jobs = 1
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            per_point = list(pool.map(lambda i: _evaluate_one(run, ctx, methods, i), indices))
    else:
        per_point = [_evaluate_one(run, ctx, methods, i) for i in indices]

    records = [r for recs in per_point for r in recs]
    config = {
        **run.config,
        "resolved": {
            "methods": methods,
            "indices": indices,
            "label_unstable_skipped": skipped,
            "gamma_policy": f"|x0 - x_b| + {run.dba.gamma_offset}, doubled up to "
                            f"{run.config['evaluation']['max_factor']}x",
            "r_grid": list(run.dba.r_grid),
            "classifier": run.classifier.describe(),
        },
    }
    return EvaluationReport(records, config)


def curves(run: Run, report: EvaluationReport) -> dict[tuple[int, str], np.ndarray]:
    """Probability along each evaluated direction, walking towards the other class.

    Keys are ``(test index, method)``; values are ``(n, 2)`` arrays of
    ``(t, c)`` up to the probe length used for that record.
    """
    step = float(run.config["evaluation"]["curve_step"])
    out = {}
    for rec in report.records:
        if rec.direction is None or not np.any(rec.direction) or rec.gamma is None:
            continue
        x0 = run.test.points[rec.index]
        f = run.classifier
        if rec.method in ATT_METHODS:
            f = LatentClassifier(run.classifier, run.codec)
            x0 = np.asarray(run.codec.encode(x0), dtype=float)
        out[(rec.index, rec.method)] = probability_curve(f.soft_or_hard, x0, np.asarray(rec.direction),
                                                         rec.gamma, step, towards=-int(f.predict(x0)))
    return out


def sweep_radius(run: Run, index: int) -> list[dict]:
    """Per-radius DBA-Tab statistics for test point ``index``."""
    return radius_profile(run.train, run.test.points[index], run.classifier, run.dba,
                          substream(run.seed, "simulation", index))


def stability(run: Run, which: str = "test") -> dict[str, Any]:
    """Codec round-trip diagnostics on the train or test set."""
    data = run.test if which == "test" else run.train
    X = data.points
    out = {
        "n": int(data.n),
        "set": which,
        "label_stability": label_stability(run.codec, run.classifier, X),
        "probability_stability": None,
        "codec": run.codec.describe(),
    }
    if run.classifier.has_proba:
        out["probability_stability"] = probability_stability(run.codec, run.classifier, X)
    return out

