"""Deep echo state networks for whole-sequence classification.

The package builds stacks of fixed, randomly initialized leaky-integrator
reservoirs, summarizes each input sequence by its mean state vector, and
trains only a ridge-regression readout on top. It ships both a
scikit-learn style estimator (:class:`DeepEsnClassifier`) and a seeded,
fully reproducible evaluation pipeline (nested cross-validation, grid
search, multi-guess ensembling, McNemar comparison) exposed through the
``deepesn`` command line tool.
"""

__version__ = "0.1.0"

from .data import (
    ClassLabel,
    Dataset,
    Sequence,
    build_dataset,
    label_from_text,
    label_to_text,
    read_dataset,
    synth_dataset,
    write_dataset,
)
from .estimator import DeepEsnClassifier, check_sequences
from .evaluation import (
    ClassificationMetrics,
    EvaluationReport,
    GridPoint,
    GridSearchResult,
    HyperGrid,
    McNemarResult,
    PurityAudit,
    ensemble_evaluate,
    evaluate_config,
    format_percent,
    grid_search,
    make_fold_plan,
    mcnemar,
    metrics,
)
from .exceptions import (
    AuditError,
    ConstructionError,
    ConvergenceError,
    DatasetError,
    DeepEsnError,
    DimensionError,
    ParseError,
    StratificationError,
    TrainingError,
    UndefinedMetricError,
)
from .numerics import (
    MatrixRole,
    SeedSpec,
    derive_seed,
    generator_for,
    ridge_solve,
    spectral_norm,
    spectral_radius,
    uniform_matrix,
)
from .readout import Readout, classify, classify_many, score, score_many, train_readout
from .reservoir import DeepEsnConfig, ReservoirStack, build_stack, run_sequence
from .bundle import load_bundle, save_bundle

__all__ = [
    "__version__",
    "AuditError",
    "ClassLabel",
    "ClassificationMetrics",
    "ConstructionError",
    "ConvergenceError",
    "Dataset",
    "DatasetError",
    "DeepEsnClassifier",
    "DeepEsnConfig",
    "DeepEsnError",
    "DimensionError",
    "EvaluationReport",
    "GridPoint",
    "GridSearchResult",
    "HyperGrid",
    "McNemarResult",
    "MatrixRole",
    "ParseError",
    "PurityAudit",
    "Readout",
    "ReservoirStack",
    "SeedSpec",
    "Sequence",
    "StratificationError",
    "TrainingError",
    "UndefinedMetricError",
    "build_dataset",
    "build_stack",
    "check_sequences",
    "classify",
    "classify_many",
    "derive_seed",
    "ensemble_evaluate",
    "evaluate_config",
    "format_percent",
    "generator_for",
    "grid_search",
    "label_from_text",
    "label_to_text",
    "load_bundle",
    "make_fold_plan",
    "mcnemar",
    "metrics",
    "read_dataset",
    "ridge_solve",
    "run_sequence",
    "save_bundle",
    "score",
    "score_many",
    "spectral_norm",
    "spectral_radius",
    "synth_dataset",
    "train_readout",
    "uniform_matrix",
    "write_dataset",
]
