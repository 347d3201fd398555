from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from clausetriage.data import EmbeddingRecord, EmbeddingStore
from clausetriage.rng import Pcg32


@pytest.fixture
def small_store():
    """8 rules and 40 clauses of dim 8, seeded gaussian."""
    rng = Pcg32(1234)
    store = EmbeddingStore(8)
    for i in range(8):
        store.add(EmbeddingRecord(f"q{i}", "rule", rng.normal_array(8).astype(np.float32)))
    for i in range(40):
        store.add(EmbeddingRecord(f"c{i}", "clause", rng.normal_array(8).astype(np.float32)))
    return store
