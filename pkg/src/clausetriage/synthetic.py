"""Seeded synthetic corpus generator.

Builds a desk-scale stand-in for a graded clause-rule benchmark: each
query gets a random unit direction, and each candidate clause is placed
at an angle from that direction that shrinks as its grade rises, so cosine
similarity orders grades perfectly at noise 0 and degrades smoothly as
noise grows. Binary labels collapse grades via a threshold (default:
only the top grade counts as positive), and the number of positives is
planted exactly so the realized positive rate matches the requested one
to within half a pair.

Everything is drawn from a single seeded Pcg32 in a fixed documented
order, so equal (config, seed) is bit-identical across runs and hosts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import (
    KIND_CLAUSE,
    KIND_RULE,
    DatasetSplit,
    EmbeddingRecord,
    EmbeddingStore,
    LabeledPair,
    QueryGroup,
)
from .errors import InvalidConfigError
from .rng import Pcg32

# Angular placement: grade 0 sits at ANGLE_LOW radians from the query
# direction, the top grade at ANGLE_HIGH; intermediate grades are linear
# in between. JITTER_SCALE converts the noise knob into an angle sigma.
ANGLE_LOW = 1.35
ANGLE_HIGH = 0.15
JITTER_SCALE = 0.35
_ANGLE_MIN = 0.01
_ANGLE_MAX = math.pi / 2 - 0.01


@dataclass(frozen=True)
class SyntheticConfig:
    dim: int = 16
    n_queries: int = 50
    clauses_per_query: int = 20
    grade_max: int = 4
    # Relative weights for grades 0..grade_max-1 among non-positive slots.
    low_grade_weights: tuple[float, ...] = (0.70, 0.15, 0.10, 0.05)
    positive_rate: float = 0.006
    noise: float = 0.3
    binary_threshold: int | None = None  # None -> grade_max
    split_fractions: tuple[float, float, float] = (0.6, 0.2, 0.2)

    def validate(self) -> None:
        if self.dim < 2:
            raise InvalidConfigError("dim must be >= 2")
        if self.n_queries < 1 or self.clauses_per_query < 1:
            raise InvalidConfigError("n_queries and clauses_per_query must be >= 1")
        if self.grade_max < 1:
            raise InvalidConfigError("grade_max must be >= 1")
        if not 0.0 < self.positive_rate < 1.0:
            raise InvalidConfigError("positive_rate must lie in (0, 1)")
        if self.noise < 0.0:
            raise InvalidConfigError("noise must be >= 0")
        if len(self.low_grade_weights) != self.grade_max:
            raise InvalidConfigError(
                f"low_grade_weights needs {self.grade_max} entries, got {len(self.low_grade_weights)}"
            )
        if any(w < 0 for w in self.low_grade_weights) or sum(self.low_grade_weights) <= 0:
            raise InvalidConfigError("low_grade_weights must be non-negative with positive sum")
        if self.binary_threshold is not None and not 1 <= self.binary_threshold <= self.grade_max:
            raise InvalidConfigError("binary_threshold must lie in [1, grade_max]")
        if len(self.split_fractions) != 3 or any(f < 0 for f in self.split_fractions):
            raise InvalidConfigError("split_fractions must be 3 non-negative values")
        if abs(sum(self.split_fractions) - 1.0) > 1e-9:
            raise InvalidConfigError("split_fractions must sum to 1")


def _grade_angle(grade: int, grade_max: int) -> float:
    frac = grade / grade_max
    return ANGLE_LOW + (ANGLE_HIGH - ANGLE_LOW) * frac


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _random_unit(rng: Pcg32, dim: int) -> np.ndarray:
    # Norm of a dim>=2 gaussian is zero with probability 0; retry guards
    # against pathological underflow without breaking determinism.
    while True:
        v = rng.normal_array(dim)
        n = float(np.linalg.norm(v))
        if n > 1e-12:
            return v / n


def _orthogonal_unit(rng: Pcg32, q: np.ndarray) -> np.ndarray:
    while True:
        v = rng.normal_array(q.shape[0])
        v -= np.dot(v, q) * q
        n = float(np.linalg.norm(v))
        if n > 1e-9:
            return v / n


def _sample_grades(config: SyntheticConfig, rng: Pcg32) -> np.ndarray:
    """Grades for every (query, clause) slot, positives planted exactly."""
    n_pairs = config.n_queries * config.clauses_per_query
    weights = np.asarray(config.low_grade_weights, dtype=np.float64)
    cdf = np.cumsum(weights / weights.sum())
    u = rng.uniform_array(n_pairs)
    grades = np.searchsorted(cdf, u, side="right").astype(np.int64)
    grades = np.minimum(grades, config.grade_max - 1)

    n_pos = int(round(config.positive_rate * n_pairs))
    n_pos = max(1, min(n_pairs, n_pos))  # keep both classes present
    # Partial Fisher-Yates over slot indices: first n_pos become positives.
    idx = list(range(n_pairs))
    for i in range(n_pos):
        j = i + rng.bounded(n_pairs - i)
        idx[i], idx[j] = idx[j], idx[i]
    grades[idx[:n_pos]] = config.grade_max
    return grades


def _split_counts(n_queries: int, fractions: tuple[float, float, float]) -> tuple[int, int, int]:
    n_train = int(round(fractions[0] * n_queries))
    n_val = int(round(fractions[1] * n_queries))
    n_train = min(n_train, n_queries)
    n_val = min(n_val, n_queries - n_train)
    n_test = n_queries - n_train - n_val
    return n_train, n_val, n_test


def generate_synthetic(
    config: SyntheticConfig, seed: int
) -> tuple[EmbeddingStore, tuple[DatasetSplit, DatasetSplit, DatasetSplit]]:
    """Generate (store, (train, validation, test)) deterministically.

    Draw order: grades for all slots, then per query (in id order) the
    query direction followed by each clause's orthogonal direction and
    angle jitter. Vectors are quantized to float32 so the in-memory
    store matches a write/parse round trip bit for bit.
    """
    config.validate()
    root = Pcg32(seed)
    grade_rng = root.spawn()
    vector_rng = root.spawn()

    grades = _sample_grades(config, grade_rng)
    store = EmbeddingStore(config.dim)
    groups: list[QueryGroup] = []
    pairs: list[LabeledPair] = []
    threshold = config.binary_threshold if config.binary_threshold is not None else config.grade_max

    for qi in range(config.n_queries):
        query_id = f"q{qi:05d}"
        q_dir = _random_unit(vector_rng, config.dim)
        store.add(EmbeddingRecord(query_id, KIND_RULE, q_dir.astype(np.float32)))
        candidate_ids: list[str] = []
        group_grades: list[int] = []
        for ci in range(config.clauses_per_query):
            clause_id = f"c{qi:05d}_{ci:03d}"
            grade = int(grades[qi * config.clauses_per_query + ci])
            u_dir = _orthogonal_unit(vector_rng, q_dir)
            angle = _grade_angle(grade, config.grade_max)
            if config.noise > 0.0:
                angle += config.noise * JITTER_SCALE * vector_rng.normal_array(1)[0]
            angle = min(max(angle, _ANGLE_MIN), _ANGLE_MAX)
            vec = math.cos(angle) * q_dir + math.sin(angle) * u_dir
            store.add(EmbeddingRecord(clause_id, KIND_CLAUSE, vec.astype(np.float32)))
            candidate_ids.append(clause_id)
            group_grades.append(grade)
            pairs.append(LabeledPair(query_id, clause_id, int(grade >= threshold)))
        groups.append(QueryGroup(query_id, tuple(candidate_ids), tuple(group_grades)))

    n_train, n_val, n_test = _split_counts(config.n_queries, config.split_fractions)
    cpq = config.clauses_per_query
    bounds = (0, n_train, n_train + n_val, config.n_queries)
    splits = []
    for name, lo, hi in zip(("train", "validation", "test"), bounds[:-1], bounds[1:]):
        splits.append(
            DatasetSplit(
                name=name,
                groups=tuple(groups[lo:hi]),
                pairs=tuple(pairs[lo * cpq : hi * cpq]),
            )
        )
    return store, (splits[0], splits[1], splits[2])
