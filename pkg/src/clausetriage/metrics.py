"""Ranking and classification metrics.

Graded ranking: NDCG@k with exponential gains (gain_base^grade - 1) and
log2 position discounts, plus 4-star precision@5. Binary: precision,
recall, F1, accuracy, rank-statistic AUC with average ranks for ties,
and expected calibration error over 10 equal-width bins.

Every function is a pure, order-invariant function of its input set;
queries whose ideal DCG is zero are excluded from rank aggregates and
counted separately so the reported query count stays auditable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptySetError


@dataclass(frozen=True)
class RankMetrics:
    ndcg_at_5: float
    ndcg_at_10: float
    p4_at_5: float
    n_queries: int  # queries with positive ideal DCG
    n_excluded: int  # all-zero-grade queries left out of the aggregates


@dataclass(frozen=True)
class BinaryMetrics:
    precision: float
    recall: float
    f1: float
    auc: float | None  # None when labels are single-class
    accuracy: float
    ece: float


def dcg(grades, k: int, gain_base: float) -> float:
    g = np.asarray(grades, dtype=np.float64)[:k]
    if g.size == 0:
        return 0.0
    gains = np.power(gain_base, g) - 1.0
    discounts = np.log2(np.arange(2, g.size + 2, dtype=np.float64))
    return float(np.sum(gains / discounts))


def ndcg_at_k(ranked_grades, k: int, gain_base: float = 2.0) -> float | None:
    """NDCG of a ranked grade list; None flags a zero-ideal-DCG query.

    DCG = sum_{i<=min(k,n)} (gain_base^g_i - 1) / log2(i + 1), normalized
    by the DCG of the same grades sorted descending.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    grades = list(ranked_grades)
    if any(g < 0 for g in grades):
        raise ValueError("grades must be non-negative")
    ideal = dcg(sorted(grades, reverse=True), k, gain_base)
    if ideal == 0.0:
        return None
    return dcg(grades, k, gain_base) / ideal


def p4_at_5(ranked_grades, star_threshold: int = 4, *, fixed_denominator: bool = True) -> float:
    """Fraction of the top 5 with grade >= star_threshold.

    The denominator is fixed at 5 even for shorter lists; pass
    fixed_denominator=False for the min(5, n) variant.
    """
    grades = list(ranked_grades)
    if not grades:
        raise EmptySetError("p4_at_5 needs at least one ranked grade")
    top = grades[:5]
    hits = sum(1 for g in top if g >= star_threshold)
    denom = 5 if fixed_denominator else min(5, len(grades))
    return hits / denom


def rank_metrics(ranked_grade_lists, gain_base: float = 2.0, star_threshold: int = 4) -> RankMetrics:
    """Aggregate NDCG@5/@10 and P4@5 over queries with positive ideal DCG."""
    n5: list[float] = []
    n10: list[float] = []
    p4: list[float] = []
    excluded = 0
    for grades in ranked_grade_lists:
        v5 = ndcg_at_k(grades, 5, gain_base)
        if v5 is None:
            excluded += 1
            continue
        v10 = ndcg_at_k(grades, 10, gain_base)
        n5.append(v5)
        n10.append(float(v10))
        p4.append(p4_at_5(grades, star_threshold))
    if not n5:
        raise EmptySetError("no query with positive ideal DCG")
    n = len(n5)
    return RankMetrics(
        ndcg_at_5=sum(n5) / n,
        ndcg_at_10=sum(n10) / n,
        p4_at_5=sum(p4) / n,
        n_queries=n,
        n_excluded=excluded,
    )


def auc_score(scores, labels) -> float | None:
    """Rank-statistic AUC with average ranks for ties.

    Equals the fraction of (positive, negative) pairs ordered correctly,
    counting ties as half. None when only one class is present.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == 0))
    if n_pos == 0 or n_neg == 0:
        return None
    order = np.argsort(s, kind="stable")
    ranks = np.empty(len(s), dtype=np.float64)
    sorted_scores = s[order]
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0  # average 1-based rank
        i = j + 1
    pos_rank_sum = float(np.sum(ranks[y == 1]))
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def ece_score(probabilities, labels, n_bins: int = 10) -> float:
    """Expected calibration error over equal-width bins.

    Bin index for probability p is min(floor(p * n_bins), n_bins - 1);
    each occupied bin contributes (count/n) * |accuracy - confidence|.
    """
    p = np.asarray(probabilities, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if p.size == 0:
        raise EmptySetError("ece needs at least one prediction")
    if np.any(p < 0.0) or np.any(p > 1.0):
        raise ValueError("probabilities must lie in [0, 1]")
    bins = np.minimum((p * n_bins).astype(np.int64), n_bins - 1)
    total = 0.0
    for b in range(n_bins):
        mask = bins == b
        count = int(np.sum(mask))
        if count == 0:
            continue
        conf = float(np.mean(p[mask]))
        acc = float(np.mean(y[mask]))
        total += (count / p.size) * abs(acc - conf)
    return total


def binary_metrics(probabilities, labels, threshold: float = 0.5) -> BinaryMetrics:
    """Threshold at `threshold` (predict 1 iff p > threshold) and score.

    AUC is computed from the raw probabilities and is None for
    single-class label sets; ECE uses 10 equal-width bins.
    """
    p = np.asarray(probabilities, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if p.size == 0:
        raise EmptySetError("binary_metrics needs at least one example")
    pred = (p > threshold).astype(np.int64)
    tp = int(np.sum((pred == 1) & (y == 1)))
    fp = int(np.sum((pred == 1) & (y == 0)))
    fn = int(np.sum((pred == 0) & (y == 1)))
    tn = int(np.sum((pred == 0) & (y == 0)))
    precision = tp / (tp + fp) if (tp + fp) > 0 else 0.0
    recall = tp / (tp + fn) if (tp + fn) > 0 else 0.0
    f1 = 2.0 * precision * recall / (precision + recall) if (precision + recall) > 0 else 0.0
    accuracy = (tp + tn) / p.size
    return BinaryMetrics(
        precision=precision,
        recall=recall,
        f1=f1,
        auc=auc_score(p, y),
        accuracy=accuracy,
        ece=ece_score(p, y),
    )
