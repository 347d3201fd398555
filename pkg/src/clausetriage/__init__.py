"""Deterministic graded clause-rule retrieval and fuzzy compliance triage.

Trains projection, calibration, and fuzzy-gating heads over fixed text
embeddings, tunes two triage thresholds under a hard auto-error
constraint, and emits reproducible, seed-stamped metric and audit
reports.
"""

__version__ = "0.1.0"

from .classifier import (
    CalibrationParams,
    ClassifyTrainConfig,
    FuzzyHeadParams,
    calibrate_probability,
    fuzzy_forward,
    fuzzy_probability,
    train_classifier,
    weighted_bce,
)
from .data import (
    DatasetSplit,
    EmbeddingRecord,
    EmbeddingStore,
    LabeledPair,
    QueryGroup,
    parse_dataset,
    parse_embeddings,
    write_embeddings,
)
from .metrics import BinaryMetrics, RankMetrics, binary_metrics, ndcg_at_k, p4_at_5
from .rank_training import (
    GainTarget,
    RankTrainConfig,
    grade_to_target,
    listwise_loss,
    loss_gradient,
    train_rank,
)
from .retrieval import ProjectionParams, ScoredPair, cosine, project, rank_candidates
from .rng import Pcg32
from .synthetic import SyntheticConfig, generate_synthetic
from .triage import (
    TriageReport,
    TriageThresholds,
    TuneResult,
    decide,
    evaluate_triage,
    tune_thresholds,
)
