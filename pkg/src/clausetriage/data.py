"""Dataset and embedding schemas, parsers, and writers.

Two line-delimited JSON dataset schemas (one object per line, UTF-8):

* graded:  {"query_id": str, "candidates": [str, ...], "grades": [int, ...]}
* binary:  {"query_id": str, "clause_id": str, "label": 0|1}

and one binary embedding container::

    magic b"EMB1" | u32 dim | u32 count |
    per record: u8 kind (0=rule, 1=clause) | u16 id byte length |
                id bytes (UTF-8) | dim float32 values

All integers and floats little-endian. Parsing preserves file order,
reports the line or record that violated an invariant, and never skips
records silently. Parsed stores and splits are immutable by convention
and safe to share across threads.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .canonical import canonical_json, digest_json
from .errors import (
    BadMagicError,
    DimMismatchError,
    DuplicateCandidateError,
    DuplicateIdError,
    EmptyGroupError,
    GradeOutOfRangeError,
    MalformedLineError,
    UnknownIdError,
    ZeroNormVectorError,
)

KIND_RULE = "rule"
KIND_CLAUSE = "clause"
_KIND_TO_BYTE = {KIND_RULE: 0, KIND_CLAUSE: 1}
_BYTE_TO_KIND = {0: KIND_RULE, 1: KIND_CLAUSE}

SPLIT_NAMES = ("train", "validation", "test")

DEFAULT_GRADE_MAX = 4

_EMB_MAGIC = b"EMB1"


@dataclass(frozen=True)
class EmbeddingRecord:
    """One identified base embedding; vector length equals the store dim."""

    id: str
    kind: str
    vector: np.ndarray  # float32, shape (dim,)


@dataclass(frozen=True)
class QueryGroup:
    """One rule plus its candidate clauses with graded labels."""

    query_id: str
    candidate_ids: tuple[str, ...]
    grades: tuple[int, ...]


@dataclass(frozen=True)
class LabeledPair:
    """A (rule, clause) pair with a binary compliance label."""

    query_id: str
    clause_id: str
    label: int


@dataclass(frozen=True)
class DatasetSplit:
    name: str
    groups: tuple[QueryGroup, ...] = ()
    pairs: tuple[LabeledPair, ...] = ()


class EmbeddingStore:
    """Immutable id -> vector lookup with a single fixed dimension.

    Ids are unique per kind; a rule and a clause may share an id.
    """

    def __init__(self, dim: int):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self._dim = int(dim)
        self._records: dict[tuple[str, str], EmbeddingRecord] = {}
        self._order: list[tuple[str, str]] = []

    @property
    def dim(self) -> int:
        return self._dim

    def __len__(self) -> int:
        return len(self._records)

    def add(self, record: EmbeddingRecord) -> None:
        if record.kind not in _KIND_TO_BYTE:
            raise ValueError(f"bad kind {record.kind!r}")
        vec = np.asarray(record.vector, dtype=np.float32)
        if vec.ndim != 1 or vec.shape[0] != self._dim:
            raise DimMismatchError(record.id, self._dim, int(vec.size))
        if not np.isfinite(vec).all():
            raise ValueError(f"record {record.id!r}: non-finite component")
        if float(np.linalg.norm(vec)) == 0.0:
            raise ZeroNormVectorError(record.id)
        key = (record.kind, record.id)
        if key in self._records:
            raise DuplicateIdError(record.id, record.kind)
        vec.setflags(write=False)
        self._records[key] = EmbeddingRecord(record.id, record.kind, vec)
        self._order.append(key)

    def get(self, kind: str, record_id: str) -> EmbeddingRecord:
        try:
            return self._records[(kind, record_id)]
        except KeyError:
            raise UnknownIdError(record_id, kind) from None

    def vector(self, kind: str, record_id: str) -> np.ndarray:
        return self.get(kind, record_id).vector

    def has(self, kind: str, record_id: str) -> bool:
        return (kind, record_id) in self._records

    def records(self) -> list[EmbeddingRecord]:
        """Records in insertion (file) order."""
        return [self._records[k] for k in self._order]


# --- dataset parsing ---


def _parse_graded_line(obj: dict, line_no: int, grade_max: int) -> QueryGroup:
    for key in ("query_id", "candidates", "grades"):
        if key not in obj:
            raise MalformedLineError(line_no, f"missing key {key!r}")
    extra = set(obj) - {"query_id", "candidates", "grades"}
    if extra:
        raise MalformedLineError(line_no, f"unexpected keys {sorted(extra)}")
    query_id = obj["query_id"]
    candidates = obj["candidates"]
    grades = obj["grades"]
    if not isinstance(query_id, str) or not query_id:
        raise MalformedLineError(line_no, "query_id must be a non-empty string")
    if not isinstance(candidates, list) or not all(isinstance(c, str) for c in candidates):
        raise MalformedLineError(line_no, "candidates must be a list of strings")
    if not isinstance(grades, list) or not all(
        isinstance(g, int) and not isinstance(g, bool) for g in grades
    ):
        raise MalformedLineError(line_no, "grades must be a list of integers")
    if len(candidates) == 0:
        raise EmptyGroupError(query_id, line_no)
    if len(candidates) != len(grades):
        raise MalformedLineError(
            line_no, f"{len(candidates)} candidates vs {len(grades)} grades"
        )
    seen: set[str] = set()
    for cid in candidates:
        if cid in seen:
            raise DuplicateCandidateError(query_id, cid, line_no)
        seen.add(cid)
    for g in grades:
        if g < 0 or g > grade_max:
            raise GradeOutOfRangeError(line_no, g, grade_max)
    return QueryGroup(query_id, tuple(candidates), tuple(grades))


def _parse_binary_line(obj: dict, line_no: int) -> LabeledPair:
    for key in ("query_id", "clause_id", "label"):
        if key not in obj:
            raise MalformedLineError(line_no, f"missing key {key!r}")
    extra = set(obj) - {"query_id", "clause_id", "label"}
    if extra:
        raise MalformedLineError(line_no, f"unexpected keys {sorted(extra)}")
    query_id = obj["query_id"]
    clause_id = obj["clause_id"]
    label = obj["label"]
    if not isinstance(query_id, str) or not query_id:
        raise MalformedLineError(line_no, "query_id must be a non-empty string")
    if not isinstance(clause_id, str) or not clause_id:
        raise MalformedLineError(line_no, "clause_id must be a non-empty string")
    if not isinstance(label, int) or isinstance(label, bool) or label not in (0, 1):
        raise MalformedLineError(line_no, "label must be 0 or 1")
    return LabeledPair(query_id, clause_id, label)


def parse_dataset(
    path: str | Path,
    schema: str,
    *,
    grade_max: int = DEFAULT_GRADE_MAX,
    name: str | None = None,
) -> DatasetSplit:
    """Parse one line-delimited dataset file into a validated split.

    Iteration order equals file order. The split name defaults to the
    leading component of the file name (``train.graded.jsonl`` ->
    ``train``) and must be one of train/validation/test.
    """
    if schema not in ("graded", "binary"):
        raise ValueError(f"schema must be 'graded' or 'binary', got {schema!r}")
    path = Path(path)
    if name is None:
        stem = path.name.split(".", 1)[0]
        if stem not in SPLIT_NAMES:
            raise ValueError(
                f"cannot infer split name from {path.name!r}; pass name= explicitly"
            )
        name = stem
    elif name not in SPLIT_NAMES:
        raise ValueError(f"split name must be one of {SPLIT_NAMES}, got {name!r}")

    groups: list[QueryGroup] = []
    pairs: list[LabeledPair] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedLineError(line_no, f"invalid JSON: {exc.msg}") from None
            if not isinstance(obj, dict):
                raise MalformedLineError(line_no, "record must be a JSON object")
            if schema == "graded":
                groups.append(_parse_graded_line(obj, line_no, grade_max))
            else:
                pairs.append(_parse_binary_line(obj, line_no))
    return DatasetSplit(name=name, groups=tuple(groups), pairs=tuple(pairs))


def write_dataset(split: DatasetSplit, path: str | Path, schema: str) -> None:
    """Serialize a split back to its line-delimited form (canonical key order)."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if schema == "graded":
            for g in split.groups:
                fh.write(
                    canonical_json(
                        {
                            "query_id": g.query_id,
                            "candidates": list(g.candidate_ids),
                            "grades": list(g.grades),
                        }
                    )
                    + "\n"
                )
        elif schema == "binary":
            for p in split.pairs:
                fh.write(
                    canonical_json(
                        {"query_id": p.query_id, "clause_id": p.clause_id, "label": p.label}
                    )
                    + "\n"
                )
        else:
            raise ValueError(f"schema must be 'graded' or 'binary', got {schema!r}")


def split_digest(split: DatasetSplit) -> str:
    """Digest of the in-memory representation; equal parses hash equal."""
    payload = {
        "name": split.name,
        "groups": [
            {"query_id": g.query_id, "candidates": list(g.candidate_ids), "grades": list(g.grades)}
            for g in split.groups
        ],
        "pairs": [
            {"query_id": p.query_id, "clause_id": p.clause_id, "label": p.label}
            for p in split.pairs
        ],
    }
    return digest_json(payload)


def binarize_groups(groups: list[QueryGroup] | tuple[QueryGroup, ...], threshold: int) -> list[LabeledPair]:
    """Collapse graded groups to binary pairs: grade >= threshold -> 1.

    This mapping is a stand-in for an unpublished collapse rule; the
    threshold is configurable and defaults to grade_max at call sites.
    """
    pairs: list[LabeledPair] = []
    for g in groups:
        for cid, grade in zip(g.candidate_ids, g.grades):
            pairs.append(LabeledPair(g.query_id, cid, int(grade >= threshold)))
    return pairs


# --- embedding file I/O ---


def parse_embeddings(path: str | Path) -> EmbeddingStore:
    """Read an EMB1 file into a store, rejecting on the first violation."""
    path = Path(path)
    data = path.read_bytes()
    if data[:4] != _EMB_MAGIC:
        raise BadMagicError(f"{path.name}: expected magic {_EMB_MAGIC!r}")
    if len(data) < 12:
        raise BadMagicError(f"{path.name}: truncated header")
    dim, count = struct.unpack_from("<II", data, 4)
    if dim == 0:
        raise BadMagicError(f"{path.name}: header dim is zero")
    store = EmbeddingStore(dim)
    offset = 12
    vec_bytes = 4 * dim
    for index in range(count):
        if offset + 3 > len(data):
            raise BadMagicError(f"{path.name}: truncated record {index}")
        kind_byte = data[offset]
        offset += 1
        if kind_byte not in _BYTE_TO_KIND:
            raise BadMagicError(f"{path.name}: record {index}: bad kind byte {kind_byte}")
        (id_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        if offset + id_len + vec_bytes > len(data):
            raise BadMagicError(f"{path.name}: truncated record {index}")
        record_id = data[offset : offset + id_len].decode("utf-8")
        offset += id_len
        vector = np.frombuffer(data, dtype="<f4", count=dim, offset=offset).copy()
        offset += vec_bytes
        store.add(EmbeddingRecord(record_id, _BYTE_TO_KIND[kind_byte], vector))
    if offset != len(data):
        raise BadMagicError(f"{path.name}: {len(data) - offset} trailing bytes")
    return store


def write_embeddings(store: EmbeddingStore, path: str | Path) -> None:
    """Write a store to the EMB1 format, records in insertion order."""
    records = store.records()
    chunks = [_EMB_MAGIC, struct.pack("<II", store.dim, len(records))]
    for rec in records:
        id_bytes = rec.id.encode("utf-8")
        if len(id_bytes) > 0xFFFF:
            raise ValueError(f"record id too long: {rec.id!r}")
        chunks.append(struct.pack("<BH", _KIND_TO_BYTE[rec.kind], len(id_bytes)))
        chunks.append(id_bytes)
        chunks.append(np.asarray(rec.vector, dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def check_pairs_resolvable(pairs, store: EmbeddingStore) -> None:
    """Raise UnknownId for the first pair referencing a missing embedding."""
    for p in pairs:
        if not store.has(KIND_RULE, p.query_id):
            raise UnknownIdError(p.query_id, KIND_RULE)
        if not store.has(KIND_CLAUSE, p.clause_id):
            raise UnknownIdError(p.clause_id, KIND_CLAUSE)
