from __future__ import annotations

import numpy as np
import pytest

from clausetriage.data import split_digest, write_embeddings
from clausetriage.errors import InvalidConfigError
from clausetriage.retrieval import cosine
from clausetriage.synthetic import SyntheticConfig, generate_synthetic


def test_same_seed_byte_identical(tmp_path):
    cfg = SyntheticConfig(dim=8, n_queries=10, clauses_per_query=5)
    store_a, splits_a = generate_synthetic(cfg, 42)
    store_b, splits_b = generate_synthetic(cfg, 42)
    pa, pb = tmp_path / "a.emb", tmp_path / "b.emb"
    write_embeddings(store_a, pa)
    write_embeddings(store_b, pb)
    assert pa.read_bytes() == pb.read_bytes()
    for sa, sb in zip(splits_a, splits_b):
        assert split_digest(sa) == split_digest(sb)


def test_different_seeds_differ():
    cfg = SyntheticConfig(dim=8, n_queries=5, clauses_per_query=5)
    store_a, _ = generate_synthetic(cfg, 1)
    store_b, _ = generate_synthetic(cfg, 2)
    rec_a = store_a.records()[0]
    rec_b = store_b.records()[0]
    assert not np.array_equal(rec_a.vector, rec_b.vector)


def test_realized_positive_rate_within_bound():
    # 50,000 pairs at requested 0.006: realized rate must land in [0.004, 0.008].
    cfg = SyntheticConfig(dim=4, n_queries=2500, clauses_per_query=20, positive_rate=0.006)
    _, splits = generate_synthetic(cfg, 7)
    pairs = [p for s in splits for p in s.pairs]
    assert len(pairs) == 50000
    rate = sum(p.label for p in pairs) / len(pairs)
    assert 0.004 <= rate <= 0.008
    # Planting is exact to within half a pair.
    assert abs(rate - 0.006) <= 0.5 / len(pairs) + 1e-12


def test_noise_zero_orders_grades_exhaustively():
    cfg = SyntheticConfig(dim=8, n_queries=12, clauses_per_query=15, noise=0.0, positive_rate=0.05)
    store, splits = generate_synthetic(cfg, 11)
    for split in splits:
        for group in split.groups:
            q = store.vector("rule", group.query_id)
            cos_by_grade: dict[int, list[float]] = {}
            for cid, grade in zip(group.candidate_ids, group.grades):
                cos_by_grade.setdefault(grade, []).append(
                    cosine(q.astype(np.float64), store.vector("clause", cid).astype(np.float64))
                )
            if 4 in cos_by_grade and 0 in cos_by_grade:
                assert min(cos_by_grade[4]) > max(cos_by_grade[0])


def test_split_partition_disjoint_and_complete():
    cfg = SyntheticConfig(dim=4, n_queries=10, clauses_per_query=3)
    _, (train, val, test) = generate_synthetic(cfg, 3)
    ids = [g.query_id for s in (train, val, test) for g in s.groups]
    assert len(ids) == len(set(ids)) == 10
    pair_keys = [(p.query_id, p.clause_id) for s in (train, val, test) for p in s.pairs]
    assert len(pair_keys) == len(set(pair_keys)) == 30
    assert (train.name, val.name, test.name) == ("train", "validation", "test")


def test_invalid_configs():
    with pytest.raises(InvalidConfigError):
        generate_synthetic(SyntheticConfig(positive_rate=0.0), 1)
    with pytest.raises(InvalidConfigError):
        generate_synthetic(SyntheticConfig(positive_rate=1.5), 1)
    with pytest.raises(InvalidConfigError):
        generate_synthetic(SyntheticConfig(dim=1), 1)
    with pytest.raises(InvalidConfigError):
        generate_synthetic(SyntheticConfig(low_grade_weights=(1.0,)), 1)
    with pytest.raises(InvalidConfigError):
        generate_synthetic(SyntheticConfig(split_fractions=(0.5, 0.5, 0.5)), 1)


def test_binary_threshold_configurable():
    cfg = SyntheticConfig(
        dim=4, n_queries=10, clauses_per_query=10, positive_rate=0.05, binary_threshold=3,
        low_grade_weights=(0.3, 0.3, 0.2, 0.2),
    )
    _, splits = generate_synthetic(cfg, 5)
    for split in splits:
        grade_of = {
            (g.query_id, cid): grade
            for g in split.groups
            for cid, grade in zip(g.candidate_ids, g.grades)
        }
        for p in split.pairs:
            assert p.label == int(grade_of[(p.query_id, p.clause_id)] >= 3)


def test_vectors_are_float32_unit_scale():
    cfg = SyntheticConfig(dim=8, n_queries=4, clauses_per_query=4)
    store, _ = generate_synthetic(cfg, 9)
    for rec in store.records():
        assert rec.vector.dtype == np.float32
        assert 0.5 < float(np.linalg.norm(rec.vector)) < 2.0
