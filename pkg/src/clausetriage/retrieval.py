"""Projection into the shared scoring space and cosine ranking.

Base embeddings are opaque vectors; this module applies the learned
linear maps (one per side, optionally tied), scores pairs with cosine
similarity, and produces deterministic top-k lists. Ties are broken by
ascending clause id, the only host-independent deterministic choice.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import KIND_CLAUSE, KIND_RULE, EmbeddingStore
from .errors import DimMismatchError, ZeroNormVectorError

SIDE_QUERY = "query"
SIDE_CLAUSE = "clause"

DEFAULT_PROJECTION_DIM = 512

_CKPT_MAGIC = b"PRJ1"


@dataclass
class ProjectionParams:
    """Per-side affine maps from base dim into the shared d-dim space."""

    W_q: np.ndarray  # (d, dim_base)
    b_q: np.ndarray  # (d,)
    W_c: np.ndarray  # (d, dim_base)
    b_c: np.ndarray  # (d,)

    @property
    def d(self) -> int:
        return self.W_q.shape[0]

    @property
    def dim_base(self) -> int:
        return self.W_q.shape[1]

    def validate(self) -> None:
        d, dim_base = self.W_q.shape
        if d <= 0 or dim_base <= 0:
            raise ValueError("projection dims must be positive")
        if self.W_c.shape != (d, dim_base) or self.b_q.shape != (d,) or self.b_c.shape != (d,):
            raise ValueError("inconsistent parameter shapes")
        for arr in (self.W_q, self.b_q, self.W_c, self.b_c):
            if not np.isfinite(arr).all():
                raise ValueError("non-finite projection parameter")

    def copy(self) -> "ProjectionParams":
        return ProjectionParams(
            self.W_q.copy(), self.b_q.copy(), self.W_c.copy(), self.b_c.copy()
        )


@dataclass(frozen=True)
class ScoredPair:
    query_id: str
    clause_id: str
    score: float


def project(vector: np.ndarray, params: ProjectionParams, side: str) -> np.ndarray:
    """W @ h + b for the chosen side; pure function of its inputs."""
    if side == SIDE_QUERY:
        W, b = params.W_q, params.b_q
    elif side == SIDE_CLAUSE:
        W, b = params.W_c, params.b_c
    else:
        raise ValueError(f"side must be 'query' or 'clause', got {side!r}")
    h = np.asarray(vector, dtype=np.float64)
    if h.ndim != 1 or h.shape[0] != W.shape[1]:
        raise DimMismatchError("<input>", W.shape[1], int(h.size))
    return W @ h + b


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """u.v / (|u||v|); symmetric and invariant to positive rescaling."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise DimMismatchError("<input>", int(u.size), int(v.size))
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise ZeroNormVectorError("<input>")
    return float(np.dot(u, v) / (nu * nv))


def score_pair(
    store: EmbeddingStore, params: ProjectionParams, query_id: str, clause_id: str
) -> float:
    zq = project(store.vector(KIND_RULE, query_id), params, SIDE_QUERY)
    zc = project(store.vector(KIND_CLAUSE, clause_id), params, SIDE_CLAUSE)
    return cosine(zq, zc)


def score_candidates(
    store: EmbeddingStore,
    params: ProjectionParams,
    query_id: str,
    candidate_ids,
) -> np.ndarray:
    """Cosine scores for one query against its candidate pool, input order."""
    zq = project(store.vector(KIND_RULE, query_id), params, SIDE_QUERY)
    nq = float(np.linalg.norm(zq))
    if nq == 0.0:
        raise ZeroNormVectorError(query_id)
    H = np.stack(
        [np.asarray(store.vector(KIND_CLAUSE, cid), dtype=np.float64) for cid in candidate_ids]
    )
    Z = H @ params.W_c.T + params.b_c
    norms = np.linalg.norm(Z, axis=1)
    if np.any(norms == 0.0):
        bad = candidate_ids[int(np.argmin(norms))]
        raise ZeroNormVectorError(bad)
    return (Z @ zq) / (norms * nq)


def score_pairs(store: EmbeddingStore, params: ProjectionParams, pairs) -> np.ndarray:
    """Scores aligned with `pairs`, grouped internally by query for speed."""
    scores = np.empty(len(pairs), dtype=np.float64)
    by_query: dict[str, list[int]] = {}
    for i, p in enumerate(pairs):
        by_query.setdefault(p.query_id, []).append(i)
    for query_id in sorted(by_query):
        idx = by_query[query_id]
        cids = [pairs[i].clause_id for i in idx]
        scores[idx] = score_candidates(store, params, query_id, cids)
    return scores


def rank_candidates(
    query_id: str,
    candidate_ids,
    store: EmbeddingStore,
    params: ProjectionParams,
    k: int,
) -> list[ScoredPair]:
    """Exhaustively score the pool and return the top min(k, n) pairs.

    Descending score; bit-equal scores are ordered by ascending clause
    id, so the ranking is invariant to the input candidate order.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    candidate_ids = list(candidate_ids)
    scores = score_candidates(store, params, query_id, candidate_ids)
    order = sorted(range(len(candidate_ids)), key=lambda i: (-scores[i], candidate_ids[i]))
    return [
        ScoredPair(query_id, candidate_ids[i], float(scores[i])) for i in order[: min(k, len(order))]
    ]


# --- checkpoint I/O ---


def write_checkpoint(params: ProjectionParams, path: str | Path) -> None:
    """PRJ1 container: u32 dim_base, u32 d, then W_q, b_q, W_c, b_c as
    row-major little-endian float32."""
    params.validate()
    chunks = [_CKPT_MAGIC, struct.pack("<II", params.dim_base, params.d)]
    for arr in (params.W_q, params.b_q, params.W_c, params.b_c):
        chunks.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def read_checkpoint(path: str | Path) -> ProjectionParams:
    data = Path(path).read_bytes()
    if data[:4] != _CKPT_MAGIC:
        raise ValueError(f"{Path(path).name}: not a projection checkpoint")
    dim_base, d = struct.unpack_from("<II", data, 4)
    expected = 12 + 4 * (2 * d * dim_base + 2 * d)
    if len(data) != expected:
        raise ValueError(f"{Path(path).name}: expected {expected} bytes, got {len(data)}")
    offset = 12
    arrays = []
    for shape in ((d, dim_base), (d,), (d, dim_base), (d,)):
        n = int(np.prod(shape))
        arr = np.frombuffer(data, dtype="<f4", count=n, offset=offset).astype(np.float64)
        arrays.append(arr.reshape(shape))
        offset += 4 * n
    params = ProjectionParams(*arrays)
    params.validate()
    return params
