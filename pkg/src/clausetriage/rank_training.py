"""Listwise training of the projection heads over frozen base embeddings.

Each query group supplies a gain-derived target distribution
p_k = (gain_base^grade_k - 1) / sum_j (gain_base^grade_j - 1) and the
model's softmax over temperature-scaled cosine scores is pulled toward
it with cross-entropy. Gradients through the softmax, cosine, and
affine projections are analytic (verified against central finite
differences in the test suite); the update is AdamW with global-norm
gradient clipping.

Determinism: a single seeded Pcg32 derives the init stream and the
shuffle stream in that order; batches pack whole groups in shuffled
order until the next group would exceed max_group_pairs, and every
reduction accumulates in batch order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import KIND_CLAUSE, KIND_RULE, DatasetSplit, EmbeddingStore, QueryGroup
from .errors import DegenerateTargetError, EmptyTrainSetError
from .metrics import ndcg_at_k
from .optim import AdamW, clip_global_norm
from .retrieval import DEFAULT_PROJECTION_DIM, ProjectionParams, rank_candidates
from .rng import Pcg32


@dataclass(frozen=True)
class RankTrainConfig:
    seed: int
    learning_rate: float = 2e-5
    weight_decay: float = 0.01
    max_grad_norm: float = 1.0
    epochs: int = 3
    max_group_pairs: int = 96
    temperature: float = 1.0
    gain_base: float = 2.0
    projection_dim: int = DEFAULT_PROJECTION_DIM
    tie_projections: bool = False

    def validate(self) -> None:
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.max_group_pairs < 1:
            raise ValueError("max_group_pairs must be >= 1")
        if self.projection_dim < 1:
            raise ValueError("projection_dim must be >= 1")


@dataclass(frozen=True)
class GainTarget:
    """Normalized gain distribution for one group; degenerate when all
    gains are zero (such groups are skipped, not errors)."""

    gains: np.ndarray
    target: np.ndarray
    degenerate: bool


@dataclass
class TrainingLog:
    epochs: list[dict] = field(default_factory=list)
    best_epoch: int | None = None
    skipped_groups: int = 0


def grade_to_target(grades, gain_base: float) -> GainTarget:
    """Map integer grades to gains gain_base^g - 1 and normalize."""
    g = np.asarray(grades, dtype=np.float64)
    if g.size == 0:
        raise ValueError("grades must be non-empty")
    if np.any(g < 0):
        raise ValueError("grades must be non-negative")
    gains = np.power(gain_base, g) - 1.0
    total = float(np.sum(gains))
    if total <= 0.0:
        return GainTarget(gains, np.zeros_like(gains), True)
    return GainTarget(gains, gains / total, False)


def _log_softmax(scores: np.ndarray, temperature: float) -> np.ndarray:
    logits = scores / temperature
    m = float(np.max(logits))
    shifted = logits - m
    return shifted - math.log(float(np.sum(np.exp(shifted))))


def listwise_loss(scores, target: GainTarget, temperature: float) -> float:
    """Cross-entropy between the gain target and softmax(scores / tau)."""
    if target.degenerate:
        raise DegenerateTargetError("all-zero gains: group carries no signal")
    s = np.asarray(scores, dtype=np.float64)
    if s.shape != target.target.shape:
        raise ValueError("scores and target lengths differ")
    return float(-np.sum(target.target * _log_softmax(s, temperature)))


@dataclass
class ProjectionGrads:
    W_q: np.ndarray
    b_q: np.ndarray
    W_c: np.ndarray
    b_c: np.ndarray

    @classmethod
    def zeros(cls, d: int, dim_base: int) -> "ProjectionGrads":
        return cls(
            np.zeros((d, dim_base)), np.zeros(d), np.zeros((d, dim_base)), np.zeros(d)
        )

    def add(self, other: "ProjectionGrads") -> None:
        self.W_q += other.W_q
        self.b_q += other.b_q
        self.W_c += other.W_c
        self.b_c += other.b_c

    def scale(self, factor: float) -> None:
        self.W_q *= factor
        self.b_q *= factor
        self.W_c *= factor
        self.b_c *= factor


def group_forward(
    group: QueryGroup, store: EmbeddingStore, params: ProjectionParams, config: RankTrainConfig
):
    """Projected vectors and cosine scores for one group."""
    h_q = np.asarray(store.vector(KIND_RULE, group.query_id), dtype=np.float64)
    H = np.stack(
        [np.asarray(store.vector(KIND_CLAUSE, c), dtype=np.float64) for c in group.candidate_ids]
    )
    z_q = params.W_q @ h_q + params.b_q
    Z = H @ params.W_c.T + params.b_c
    n_q = float(np.linalg.norm(z_q))
    n_c = np.linalg.norm(Z, axis=1)
    scores = (Z @ z_q) / (n_c * n_q)
    return h_q, H, z_q, Z, n_q, n_c, scores


def loss_gradient(
    group: QueryGroup,
    store: EmbeddingStore,
    params: ProjectionParams,
    config: RankTrainConfig,
) -> tuple[float, ProjectionGrads]:
    """Loss and analytic gradient of one group w.r.t. all projection entries.

    Chain: dL/ds_k = (softmax_k - p_k) / tau, then through the cosine
      ds/dz_q = z_k/(|z_q||z_k|) - s_k z_q/|z_q|^2
      ds/dz_k = z_q/(|z_q||z_k|) - s_k z_k/|z_k|^2
    and the affine maps dW = dz h^T, db = dz.
    """
    target = grade_to_target(group.grades, config.gain_base)
    if target.degenerate:
        raise DegenerateTargetError(f"group {group.query_id!r} has all-zero gains")
    h_q, H, z_q, Z, n_q, n_c, scores = group_forward(group, store, params, config)
    log_p_hat = _log_softmax(scores, config.temperature)
    loss = float(-np.sum(target.target * log_p_hat))

    ds = (np.exp(log_p_hat) - target.target) / config.temperature  # (K,)
    inv_qc = 1.0 / (n_q * n_c)  # (K,)
    # dL/dz_q = sum_k ds_k * (z_k/(nq*nk)) - (sum_k ds_k s_k) * z_q/nq^2
    dz_q = Z.T @ (ds * inv_qc) - float(np.sum(ds * scores)) / (n_q * n_q) * z_q
    # dL/dz_k = ds_k * z_q/(nq*nk) - ds_k s_k * z_k/nk^2
    dZ = np.outer(ds * inv_qc, z_q) - ((ds * scores) / (n_c * n_c))[:, None] * Z

    grads = ProjectionGrads(
        W_q=np.outer(dz_q, h_q),
        b_q=dz_q,
        W_c=dZ.T @ H,
        b_c=dZ.sum(axis=0),
    )
    return loss, grads


def init_params(dim_base: int, config: RankTrainConfig, rng: Pcg32) -> ProjectionParams:
    """Gaussian init scaled by 1/sqrt(dim_base); W_q then W_c, biases zero."""
    d = config.projection_dim
    scale = 1.0 / math.sqrt(dim_base)
    W_q = (rng.normal_array(d * dim_base) * scale).reshape(d, dim_base)
    if config.tie_projections:
        W_c = W_q.copy()
    else:
        W_c = (rng.normal_array(d * dim_base) * scale).reshape(d, dim_base)
    return ProjectionParams(W_q, np.zeros(d), W_c, np.zeros(d))


def pack_batches(order: list[int], groups: list[QueryGroup], max_pairs: int) -> list[list[int]]:
    """Pack whole groups until the next one would exceed max_pairs.

    Groups are never split (a split group breaks the listwise softmax);
    a single oversized group forms its own batch.
    """
    batches: list[list[int]] = []
    current: list[int] = []
    count = 0
    for gi in order:
        size = len(groups[gi].candidate_ids)
        if current and count + size > max_pairs:
            batches.append(current)
            current = []
            count = 0
        current.append(gi)
        count += size
    if current:
        batches.append(current)
    return batches


def validation_ndcg5(
    groups, store: EmbeddingStore, params: ProjectionParams, gain_base: float
) -> float | None:
    """Mean NDCG@5 over non-degenerate validation groups, in group order."""
    values: list[float] = []
    for group in groups:
        grade_of = dict(zip(group.candidate_ids, group.grades))
        ranked = rank_candidates(
            group.query_id, list(group.candidate_ids), store, params, len(group.candidate_ids)
        )
        v = ndcg_at_k([grade_of[sp.clause_id] for sp in ranked], 5, gain_base)
        if v is not None:
            values.append(v)
    if not values:
        return None
    return sum(values) / len(values)


def train_rank(
    train_split: DatasetSplit,
    validation_split: DatasetSplit,
    store: EmbeddingStore,
    config: RankTrainConfig,
) -> tuple[ProjectionParams, TrainingLog]:
    """Train the projections; returns the best-validation-NDCG@5 epoch.

    Deterministic given (seed, config, data): shuffle order comes from
    the seeded stream, accumulation order is batch order, and epoch ties
    in validation NDCG keep the earlier epoch.
    """
    config.validate()
    groups = [g for g in train_split.groups if not grade_to_target(g.grades, config.gain_base).degenerate]
    skipped = len(train_split.groups) - len(groups)
    if not groups:
        raise EmptyTrainSetError("no trainable group after degenerate-group removal")

    root = Pcg32(config.seed)
    init_rng = root.spawn()
    shuffle_rng = root.spawn()

    params = init_params(store.dim, config, init_rng)
    log = TrainingLog(skipped_groups=skipped)

    if config.tie_projections:
        shapes = [params.W_q.shape, params.b_q.shape]
    else:
        shapes = [params.W_q.shape, params.b_q.shape, params.W_c.shape, params.b_c.shape]
    optimizer = AdamW(shapes, config.learning_rate, config.weight_decay)

    best_params = params.copy()
    best_ndcg = -1.0
    best_epoch: int | None = None

    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(len(groups))
        total_loss = 0.0
        for batch in pack_batches(order, groups, config.max_group_pairs):
            acc = ProjectionGrads.zeros(params.d, params.dim_base)
            for gi in batch:
                loss, grads = loss_gradient(groups[gi], store, params, config)
                total_loss += loss
                acc.add(grads)
            acc.scale(1.0 / len(batch))
            if config.tie_projections:
                grad_list = [acc.W_q + acc.W_c, acc.b_q + acc.b_c]
                param_list = [params.W_q, params.b_q]
            else:
                grad_list = [acc.W_q, acc.b_q, acc.W_c, acc.b_c]
                param_list = [params.W_q, params.b_q, params.W_c, params.b_c]
            clip_global_norm(grad_list, config.max_grad_norm)
            optimizer.step(param_list, grad_list)
            if config.tie_projections:
                params.W_c = params.W_q
                params.b_c = params.b_q

        val_ndcg = validation_ndcg5(validation_split.groups, store, params, config.gain_base)
        log.epochs.append(
            {
                "epoch": epoch,
                "train_loss": total_loss / len(groups),
                "val_ndcg5": val_ndcg,
            }
        )
        if val_ndcg is not None and val_ndcg > best_ndcg:
            best_ndcg = val_ndcg
            best_params = params.copy()
            best_epoch = epoch

    if best_epoch is None:
        # No usable validation signal: fall back to the final epoch.
        best_params = params.copy()
        best_epoch = config.epochs - 1
    log.best_epoch = best_epoch
    return best_params, log
