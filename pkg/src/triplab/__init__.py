"""Time-series label recovery from triplet comparisons.

Workflow: synthesize or load a construct signal, sample a triplet budget,
collect labels (simulated annotators or the bundled annotation service),
fuse the per-annotator sets by union, fit a 1-D embedding, and evaluate it
against ground truth up to scale and bias.
"""

from .errors import (
    BudgetExceedsUniverseError,
    DuplicateQueryError,
    EmptyInputError,
    FusionConflictError,
    InvalidBinsError,
    InvalidSizeError,
    NotPSDError,
    NumericalOverflowError,
    SignalFormatError,
    UndefinedCorrelationError,
)
from .evaluation import (
    AffineFit,
    SuccessProbabilityCurve,
    affine_align_mse,
    aligned_embedding,
    aligned_pearson,
    estimate_success_probability,
    expected_correct,
    expected_correct_variance,
    pearson,
    triplet_violations,
)
from .experiments import (
    Budget,
    ExperimentConfig,
    ExperimentRecord,
    FusionReport,
    emit_plot_data,
    load_config,
    run_fusion_pipeline,
    run_simulation,
    simulate_human_study,
    write_overlay_csv,
)
from .losses import LossSpec, backend_name, risk_and_gradient
from .signals import (
    Signal,
    StimulusManifest,
    dissimilarity,
    generate_signal,
    load_signal,
    render_stimuli,
)
from .solver import (
    EmbeddingResult,
    SolverConfig,
    fit_embedding,
    recover_from_gram,
    triplet_margin,
)
from .triplets import (
    AnnotatorModel,
    ConstantLink,
    LabeledTriplet,
    LabeledTripletSet,
    LogisticLink,
    TripletQuery,
    canonical_labeled,
    fraction_to_count,
    fuse,
    partition_to_annotators,
    read_jsonl,
    read_jsonl_by_annotator,
    read_jsonl_labels,
    sample_triplets,
    simulate_label,
    simulate_labels,
    triplet_budget,
    triplet_universe_size,
    write_jsonl,
)

__version__ = "0.1.0"

__all__ = [
    "AffineFit",
    "AnnotatorModel",
    "Budget",
    "BudgetExceedsUniverseError",
    "ConstantLink",
    "DuplicateQueryError",
    "EmbeddingResult",
    "EmptyInputError",
    "ExperimentConfig",
    "ExperimentRecord",
    "FusionConflictError",
    "FusionReport",
    "InvalidBinsError",
    "InvalidSizeError",
    "LabeledTriplet",
    "LabeledTripletSet",
    "LogisticLink",
    "LossSpec",
    "NotPSDError",
    "NumericalOverflowError",
    "Signal",
    "SignalFormatError",
    "SolverConfig",
    "StimulusManifest",
    "SuccessProbabilityCurve",
    "TripletQuery",
    "UndefinedCorrelationError",
    "affine_align_mse",
    "aligned_embedding",
    "aligned_pearson",
    "backend_name",
    "canonical_labeled",
    "dissimilarity",
    "emit_plot_data",
    "estimate_success_probability",
    "expected_correct",
    "expected_correct_variance",
    "fit_embedding",
    "fraction_to_count",
    "fuse",
    "generate_signal",
    "load_config",
    "load_signal",
    "partition_to_annotators",
    "pearson",
    "read_jsonl",
    "read_jsonl_by_annotator",
    "read_jsonl_labels",
    "recover_from_gram",
    "render_stimuli",
    "risk_and_gradient",
    "run_fusion_pipeline",
    "run_simulation",
    "sample_triplets",
    "simulate_human_study",
    "simulate_label",
    "simulate_labels",
    "triplet_budget",
    "triplet_margin",
    "triplet_universe_size",
    "triplet_violations",
    "write_jsonl",
    "write_overlay_csv",
]
