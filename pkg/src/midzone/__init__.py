"""Retrieval-head training with gap-band negative sampling.

The package trains a linear composition head that fuses a reference
embedding, a free-text edit embedding, and optional per-attribute edit
embeddings into a single query vector, scored against a fixed corpus by
cosine similarity.  Negatives are drawn from a moderate band of the
target-relative similarity gap rather than from the hardest or easiest
items, which keeps gradients informative without amplifying annotation
noise.  Everything is numpy/scipy; gradients are closed-form.
"""

from .compose import (
    AttributeWeights,
    ComposedQuery,
    CompositionHead,
    forward,
    init_head,
    softplus,
)
from .corpus import (
    ATTRIBUTES,
    EmbeddingMatrix,
    Manifest,
    QueryTriplet,
    l2_normalize,
    load_embeddings,
    load_manifest,
    load_triplets,
    sha256_file,
    triplets_fingerprint,
    write_embeddings,
    write_manifest,
    write_triplets,
)
from .errors import (
    BadMagic,
    ChecksumMismatch,
    ConfigMismatch,
    DegenerateProbability,
    DimMismatch,
    DimTooSmall,
    DuplicateId,
    EmptyAfterExclusion,
    EmptyRelevantSet,
    FormatError,
    MidzoneError,
    MissingSubset,
    NoCandidates,
    NonFiniteEntry,
    NoValidTarget,
    ShapeMismatch,
    TargetNotInSubset,
    TruncatedFile,
    UnknownId,
    ZeroRow,
    ZeroVector,
)
from .losses import (
    GradientBundle,
    LossBreakdown,
    LossConfig,
    backward,
    hinge,
    kl_one_hot,
    softmax_temp,
    total_loss,
)
from .metrics import (
    MetricsReport,
    RankedList,
    cirr_average,
    compute_metrics,
    format_percent,
    map_at_k,
    rank_corpus,
    recall_at_k,
    recall_subset_at_k,
)
from .negatives import (
    MidZoneConfig,
    NegativeSet,
    RefreshSchedule,
    ScoreTable,
    cosine,
    log_set_size,
    mid_zone,
    normalized_ranks,
    sample_negative,
    score_all,
)
from .synth import (
    AttributeSchema,
    SyntheticWorld,
    false_negative_rate,
    generate_triplets,
    generate_world,
    ideal_query,
    relevant_set,
)
from .train import (
    Checkpoint,
    OptimizerState,
    TrainConfig,
    TrainResult,
    adamw_step,
    config_from_dict,
    config_hash,
    config_to_dict,
    cosine_lr,
    init_optimizer,
    load_checkpoint,
    save_checkpoint,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "ATTRIBUTES",
    "AttributeSchema",
    "AttributeWeights",
    "BadMagic",
    "Checkpoint",
    "ChecksumMismatch",
    "ComposedQuery",
    "CompositionHead",
    "ConfigMismatch",
    "DegenerateProbability",
    "DimMismatch",
    "DimTooSmall",
    "DuplicateId",
    "EmbeddingMatrix",
    "EmptyAfterExclusion",
    "EmptyRelevantSet",
    "FormatError",
    "GradientBundle",
    "LossBreakdown",
    "LossConfig",
    "Manifest",
    "MetricsReport",
    "MidZoneConfig",
    "MidzoneError",
    "MissingSubset",
    "NegativeSet",
    "NoCandidates",
    "NoValidTarget",
    "NonFiniteEntry",
    "OptimizerState",
    "QueryTriplet",
    "RankedList",
    "RefreshSchedule",
    "ScoreTable",
    "ShapeMismatch",
    "SyntheticWorld",
    "TargetNotInSubset",
    "TrainConfig",
    "TrainResult",
    "TruncatedFile",
    "UnknownId",
    "ZeroRow",
    "ZeroVector",
    "adamw_step",
    "backward",
    "cirr_average",
    "compute_metrics",
    "config_from_dict",
    "config_hash",
    "config_to_dict",
    "cosine",
    "cosine_lr",
    "false_negative_rate",
    "format_percent",
    "forward",
    "generate_triplets",
    "generate_world",
    "hinge",
    "ideal_query",
    "init_head",
    "init_optimizer",
    "kl_one_hot",
    "l2_normalize",
    "load_checkpoint",
    "load_embeddings",
    "load_manifest",
    "load_triplets",
    "log_set_size",
    "map_at_k",
    "mid_zone",
    "normalized_ranks",
    "rank_corpus",
    "recall_at_k",
    "recall_subset_at_k",
    "relevant_set",
    "sample_negative",
    "save_checkpoint",
    "score_all",
    "sha256_file",
    "softmax_temp",
    "softplus",
    "total_loss",
    "train",
    "triplets_fingerprint",
    "write_embeddings",
    "write_manifest",
    "write_triplets",
]
