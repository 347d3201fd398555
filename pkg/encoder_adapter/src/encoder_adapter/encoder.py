"""Pinned-revision text encoding into EMB1 files.

The adapter is a pure embedding producer: it loads a transformer
encoder at an immutable revision, takes the first-token (pooled) hidden
state for each input line, and streams the vectors into the EMB1
container in input order. It computes no scores and no labels.

Revision pinning is mandatory. Local model directories are pinned by a
sha256 content digest over every file in the directory (sorted by
name); hub model ids must carry a full 40-hex commit. A missing or
mismatched pin is an error, never a warning, so mutable references can
not slip through.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .emb1 import write_emb1

POOLING_FIRST_TOKEN = "first-token"

DEFAULT_MODEL = "roberta-base"
DEFAULT_MAX_SEQUENCE_LENGTH = 512
DEFAULT_BATCH_SIZE = 16

_KINDS = ("rule", "clause")


class AdapterError(Exception):
    pass


class ModelUnavailableError(AdapterError):
    pass


class UnpinnedModelError(AdapterError):
    pass


class EmptyTextError(AdapterError):
    def __init__(self, record_id: str):
        super().__init__(f"record {record_id!r}: empty text")


@dataclass(frozen=True)
class EncoderSpec:
    model: str = DEFAULT_MODEL
    revision: str = ""
    max_sequence_length: int = DEFAULT_MAX_SEQUENCE_LENGTH
    pooling: str = POOLING_FIRST_TOKEN
    batch_size: int = DEFAULT_BATCH_SIZE

    def validate(self) -> None:
        if not self.revision:
            raise UnpinnedModelError("revision pin is mandatory")
        if self.pooling != POOLING_FIRST_TOKEN:
            raise ValueError(f"unsupported pooling {self.pooling!r}")
        if self.max_sequence_length < 2:
            raise ValueError("max_sequence_length must be >= 2")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def local_revision(model_dir: str | Path) -> str:
    """Content digest of a local model directory (file names + bytes)."""
    model_dir = Path(model_dir)
    if not model_dir.is_dir():
        raise ModelUnavailableError(f"{model_dir} is not a directory")
    h = hashlib.sha256()
    for path in sorted(p for p in model_dir.rglob("*") if p.is_file()):
        h.update(path.relative_to(model_dir).as_posix().encode("utf-8"))
        h.update(b"\x00")
        h.update(path.read_bytes())
        h.update(b"\x01")
    return h.hexdigest()


def _verify_pin(spec: EncoderSpec) -> None:
    spec.validate()
    model_path = Path(spec.model)
    if model_path.is_dir():
        actual = local_revision(model_path)
        if actual != spec.revision:
            raise ModelUnavailableError(
                f"local model digest {actual[:12]}... does not match pinned "
                f"revision {spec.revision[:12]}..."
            )
    else:
        if len(spec.revision) != 40 or any(c not in "0123456789abcdef" for c in spec.revision):
            raise UnpinnedModelError(
                "hub models must be pinned to a full 40-hex commit revision"
            )


def _load_model(spec: EncoderSpec):
    import torch
    from transformers import AutoModel, AutoTokenizer

    model_path = Path(spec.model)
    kwargs = {}
    if not model_path.is_dir():
        kwargs["revision"] = spec.revision
    try:
        tokenizer = AutoTokenizer.from_pretrained(spec.model, **kwargs)
        model = AutoModel.from_pretrained(spec.model, **kwargs)
    except OSError as exc:
        raise ModelUnavailableError(str(exc)) from exc
    model.eval()
    torch.set_grad_enabled(False)
    return tokenizer, model


def read_text_lines(path: str | Path) -> list[dict]:
    """Parse the line-delimited {id, kind, text} input, preserving order."""
    lines: list[dict] = []
    seen: set[tuple[str, str]] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise AdapterError(f"line {line_no}: invalid JSON: {exc.msg}") from None
            for key in ("id", "kind", "text"):
                if key not in obj:
                    raise AdapterError(f"line {line_no}: missing key {key!r}")
            if obj["kind"] not in _KINDS:
                raise AdapterError(f"line {line_no}: kind must be one of {_KINDS}")
            if not isinstance(obj["id"], str) or not obj["id"]:
                raise AdapterError(f"line {line_no}: id must be a non-empty string")
            if not isinstance(obj["text"], str):
                raise AdapterError(f"line {line_no}: text must be a string")
            if not obj["text"].strip():
                raise EmptyTextError(obj["id"])
            key = (obj["kind"], obj["id"])
            if key in seen:
                raise AdapterError(f"line {line_no}: duplicate {obj['kind']} id {obj['id']!r}")
            seen.add(key)
            lines.append({"id": obj["id"], "kind": obj["kind"], "text": obj["text"]})
    return lines


def embed_file(
    texts_path: str | Path,
    spec: EncoderSpec,
    out_path: str | Path,
    sidecar_path: str | Path | None = None,
) -> dict:
    """Encode every input line into an EMB1 record, in input order.

    Head truncation applies beyond max_sequence_length; truncated ids
    are listed in the sidecar report. Inference runs single-threaded in
    eval mode so repeated invocations with an equal spec are
    byte-identical.
    """
    import torch

    _verify_pin(spec)
    records = read_text_lines(texts_path)
    tokenizer, model = _load_model(spec)
    hidden_size = int(model.config.hidden_size)

    previous_threads = torch.get_num_threads()
    torch.set_num_threads(1)
    try:
        vectors: list[np.ndarray] = []
        truncated_ids: list[str] = []
        for start in range(0, len(records), spec.batch_size):
            batch = records[start : start + spec.batch_size]
            texts = [r["text"] for r in batch]
            full = tokenizer(texts, add_special_tokens=True)["input_ids"]
            for rec, ids in zip(batch, full):
                if len(ids) > spec.max_sequence_length:
                    truncated_ids.append(rec["id"])
            encoded = tokenizer(
                texts,
                padding=True,
                truncation=True,
                max_length=spec.max_sequence_length,
                return_tensors="pt",
            )
            output = model(**encoded)
            pooled = output.last_hidden_state[:, 0, :]
            vectors.extend(pooled[i].numpy().astype(np.float32) for i in range(len(batch)))
    finally:
        torch.set_num_threads(previous_threads)

    count = write_emb1(
        ((rec["id"], rec["kind"], vec) for rec, vec in zip(records, vectors)),
        hidden_size,
        out_path,
    )
    report = {
        "model": spec.model,
        "revision": spec.revision,
        "max_sequence_length": spec.max_sequence_length,
        "pooling": spec.pooling,
        "batch_size": spec.batch_size,
        "dim": hidden_size,
        "count": count,
        "truncated_ids": truncated_ids,
    }
    if sidecar_path is not None:
        Path(sidecar_path).write_text(
            json.dumps(report, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
    return report
