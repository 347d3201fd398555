"""EMB1 embedding container writer.

Wire format (all little-endian)::

    magic b"EMB1" | u32 dim | u32 count |
    per record: u8 kind (0=rule, 1=clause) | u16 id byte length |
                id bytes (UTF-8) | dim float32 values

This is the boundary contract with the triage engine; the writer
enforces the same invariants its parser does (unique id per kind,
non-zero vectors, fixed dim) so emitted files always load cleanly.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"EMB1"
KIND_TO_BYTE = {"rule": 0, "clause": 1}


def write_emb1(records, dim: int, path: str | Path) -> int:
    """Write (id, kind, vector) triples in order; returns record count."""
    chunks = [MAGIC, b""]  # header patched once the count is known
    count = 0
    seen: set[tuple[str, str]] = set()
    for record_id, kind, vector in records:
        if kind not in KIND_TO_BYTE:
            raise ValueError(f"record {record_id!r}: bad kind {kind!r}")
        key = (kind, record_id)
        if key in seen:
            raise ValueError(f"duplicate {kind} id {record_id!r}")
        seen.add(key)
        vec = np.ascontiguousarray(vector, dtype="<f4")
        if vec.ndim != 1 or vec.shape[0] != dim:
            raise ValueError(f"record {record_id!r}: expected dim {dim}, got {vec.size}")
        if not np.isfinite(vec).all():
            raise ValueError(f"record {record_id!r}: non-finite component")
        if float(np.linalg.norm(vec)) == 0.0:
            raise ValueError(f"record {record_id!r}: zero-norm vector")
        id_bytes = record_id.encode("utf-8")
        if len(id_bytes) > 0xFFFF:
            raise ValueError(f"record id too long: {record_id!r}")
        chunks.append(struct.pack("<BH", KIND_TO_BYTE[kind], len(id_bytes)))
        chunks.append(id_bytes)
        chunks.append(vec.tobytes())
        count += 1
    chunks[1] = struct.pack("<II", dim, count)
    Path(path).write_bytes(b"".join(chunks))
    return count
