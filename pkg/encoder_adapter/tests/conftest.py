from __future__ import annotations

import json
import os
from pathlib import Path

import pytest

os.environ.setdefault("HF_HUB_OFFLINE", "1")
os.environ.setdefault("TRANSFORMERS_OFFLINE", "1")


def _bytes_to_unicode() -> dict[int, str]:
    # GPT-2/RoBERTa byte-level alphabet.
    bs = (
        list(range(ord("!"), ord("~") + 1))
        + list(range(ord("¡"), ord("¬") + 1))
        + list(range(ord("®"), ord("ÿ") + 1))
    )
    cs = bs[:]
    n = 0
    for b in range(256):
        if b not in bs:
            bs.append(b)
            cs.append(256 + n)
            n += 1
    return dict(zip(bs, [chr(c) for c in cs]))


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory) -> Path:
    """A cached small encoder: tiny random-weight RoBERTa plus a
    byte-level tokenizer with no merges, built fully offline."""
    import torch
    from transformers import RobertaConfig, RobertaModel

    root = tmp_path_factory.mktemp("tiny_encoder")

    specials = ["<s>", "<pad>", "</s>", "<unk>", "<mask>"]
    vocab = {tok: i for i, tok in enumerate(specials)}
    for ch in _bytes_to_unicode().values():
        vocab[ch] = len(vocab)
    (root / "vocab.json").write_text(json.dumps(vocab, ensure_ascii=False), encoding="utf-8")
    (root / "merges.txt").write_text("", encoding="utf-8")

    config = RobertaConfig(
        vocab_size=len(vocab),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=514,
        type_vocab_size=1,
    )
    torch.manual_seed(0)
    model = RobertaModel(config)
    model.save_pretrained(root)
    return root


@pytest.fixture(scope="session")
def tiny_revision(tiny_model_dir) -> str:
    from encoder_adapter import local_revision

    return local_revision(tiny_model_dir)


@pytest.fixture
def texts_file(tmp_path) -> Path:
    lines = [
        {"id": "r1", "kind": "rule", "text": "access control for records"},
        {"id": "c1", "kind": "clause", "text": "all accounts use unique identifiers"},
        {"id": "c2", "kind": "clause", "text": "retention follows the documented schedule"},
        {"id": "c3", "kind": "clause", "text": "x" * 4000},  # forces truncation
    ]
    path = tmp_path / "texts.jsonl"
    path.write_text("\n".join(json.dumps(l) for l in lines) + "\n", encoding="utf-8")
    return path
