"""Model-agnostic local explanations by decision boundary approximation.

The tabular procedure (:func:`tune_and_explain`) locates the decision
boundary point closest to the instance and fits a logistic surrogate on
labelled samples drawn around it.  The surrogate coefficients are the
explanation.  The attribute
variant (:func:`explain_att`) does the same in a codec's latent space with
annotator outputs as surrogate features.  The package also ships LIME-style
baselines and synthetic benchmarks with known boundaries for evaluation.
"""
from .baselines import LimeParams, lime_att_explain, lime_explain, lime_sample, lime_weights
from .classifiers import (
    GroundTruthClassifier,
    KernelSmoother,
    KNNClassifier,
    LinearClassifier,
    ScoredTableClassifier,
    SubprocessClassifier,
    ground_truth_classifier,
    kernel_smoother_prob,
    linear_classifier,
)
from .config import ConfigError, resolve_config, validate_config
from .core import (
    Classifier,
    ConsistencyError,
    Dataset,
    DatasetError,
    Explanation,
    FunctionClassifier,
    Standardizer,
    apply_standardizer,
    fit_standardizer,
    load_dataset,
    make_rng,
    substream,
    write_dataset,
)
from .datagen import (
    AirisParams,
    Hyperplane,
    airis_class_rule,
    gen_airis_tab,
    gen_moons,
    standardized_hyperplanes,
)
from .dba_att import (
    AffineCodec,
    Annotator,
    AttributeExplanation,
    Codec,
    FunctionCodec,
    IdentityCodec,
    LabelInstabilityError,
    LatentClassifier,
    SubprocessCodec,
    coordinate_annotators,
    explain_att,
    label_stability,
    latent_direction,
    probability_stability,
    train_annotator,
    train_annotators,
)
from .dba_tab import (
    MOONS_R_GRID,
    DEFAULT_R_GRID,
    BoundaryDetection,
    DbaParams,
    DegenerateSampleError,
    DetectionError,
    SimulationSample,
    bisect_boundary,
    boundary_distance_along,
    detect,
    nearest_opposite,
    radius_profile,
    simulate,
    tune_and_explain,
)
from .evaluation import EvaluationReport, class_balance, cosine_similarity_pm, dba_fidelity
from .glm import FitError, LinearModel, fit_logistic, fit_wls, weighted_r2
from .pipeline import build_run, curves, evaluate_run, explain_point, stability, sweep_radius

__version__ = "0.1.0"
