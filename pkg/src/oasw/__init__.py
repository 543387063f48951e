"""Drift-adaptive gradient boosting for data streams.

OASW (optimized adaptive and sliding windowing) tracks prequential accuracy
over two consecutive sliding windows, collects new-concept samples in an
adaptive window once accuracy degrades, and retrains a GBDT classifier on
them. Hyperparameters of both the detector and the classifier are tuned with
particle swarm optimization.
"""

from .engine import CorrectnessRing, EventKind, OaswEngine, OaswEvent, OaswParams, State, run_stream, window_accuracy
from .evaluation import ConfusionCounts, EvaluationReport, compute_metrics, emit_report, memory_proxy, prequential_evaluate
from .gbdt import ClassifierParams, GbdtLearner, GbdtModel, fit, fit_arrays, goss_subsample, predict
from .kernels import BACKEND
from .pso import (
    CLASSIFIER_SPACE,
    OASW_SPACE,
    Dim,
    HyperParamSpace,
    PsoConfig,
    pso_maximize,
    tune_classifier,
    tune_oasw,
)
from .stream import (
    HoldoutSplit,
    LabeledSample,
    StreamSource,
    SyntheticDriftSpec,
    decimate,
    generate_synthetic,
    holdout_split,
    load_csv,
    load_csv_concat,
)

__version__ = "0.1.0"

__all__ = [
    "CorrectnessRing",
    "EventKind",
    "OaswEngine",
    "OaswEvent",
    "OaswParams",
    "State",
    "run_stream",
    "window_accuracy",
    "ConfusionCounts",
    "EvaluationReport",
    "compute_metrics",
    "emit_report",
    "memory_proxy",
    "prequential_evaluate",
    "ClassifierParams",
    "GbdtLearner",
    "GbdtModel",
    "fit",
    "fit_arrays",
    "goss_subsample",
    "predict",
    "BACKEND",
    "CLASSIFIER_SPACE",
    "OASW_SPACE",
    "Dim",
    "HyperParamSpace",
    "PsoConfig",
    "pso_maximize",
    "tune_classifier",
    "tune_oasw",
    "HoldoutSplit",
    "LabeledSample",
    "StreamSource",
    "SyntheticDriftSpec",
    "decimate",
    "generate_synthetic",
    "holdout_split",
    "load_csv",
    "load_csv_concat",
]
