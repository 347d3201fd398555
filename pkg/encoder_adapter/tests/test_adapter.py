from __future__ import annotations

import json
import struct

import numpy as np
import pytest

from encoder_adapter import (
    EmptyTextError,
    EncoderSpec,
    ModelUnavailableError,
    UnpinnedModelError,
    embed_file,
    local_revision,
    write_emb1,
)
from encoder_adapter.cli import main


def _spec(model_dir, revision, **kwargs) -> EncoderSpec:
    defaults = {"max_sequence_length": 64, "batch_size": 4}
    defaults.update(kwargs)
    return EncoderSpec(model=str(model_dir), revision=revision, **defaults)


class TestPinning:
    def test_unpinned_rejected(self, tiny_model_dir, texts_file, tmp_path):
        with pytest.raises(UnpinnedModelError):
            embed_file(texts_file, _spec(tiny_model_dir, ""), tmp_path / "o.emb")

    def test_wrong_pin_rejected(self, tiny_model_dir, texts_file, tmp_path):
        with pytest.raises(ModelUnavailableError):
            embed_file(texts_file, _spec(tiny_model_dir, "0" * 64), tmp_path / "o.emb")

    def test_hub_id_requires_commit_hex(self, texts_file, tmp_path):
        spec = EncoderSpec(model="some-org/some-model", revision="main")
        with pytest.raises(UnpinnedModelError):
            embed_file(texts_file, spec, tmp_path / "o.emb")

    def test_local_revision_tracks_content(self, tiny_model_dir):
        before = local_revision(tiny_model_dir)
        assert before == local_revision(tiny_model_dir)
        marker = tiny_model_dir / "extra.txt"
        marker.write_text("x", encoding="utf-8")
        try:
            assert local_revision(tiny_model_dir) != before
        finally:
            marker.unlink()
        assert local_revision(tiny_model_dir) == before


class TestEmbedFile:
    def test_dim_equals_hidden_size_and_order_preserved(
        self, tiny_model_dir, tiny_revision, texts_file, tmp_path
    ):
        out = tmp_path / "out.emb"
        report = embed_file(texts_file, _spec(tiny_model_dir, tiny_revision), out)
        # Tiny encoder hidden size is 32; a base-class encoder would give 768.
        assert report["dim"] == 32
        blob = out.read_bytes()
        assert blob[:4] == b"EMB1"
        dim, count = struct.unpack_from("<II", blob, 4)
        assert dim == 32 and count == 4
        # First record is the rule line, ids pass through unmodified.
        kind, id_len = struct.unpack_from("<BH", blob, 12)
        assert kind == 0
        assert blob[15 : 15 + id_len].decode("utf-8") == "r1"

    def test_repeated_runs_byte_identical(
        self, tiny_model_dir, tiny_revision, texts_file, tmp_path
    ):
        spec = _spec(tiny_model_dir, tiny_revision)
        a, b = tmp_path / "a.emb", tmp_path / "b.emb"
        embed_file(texts_file, spec, a, tmp_path / "a.json")
        embed_file(texts_file, spec, b, tmp_path / "b.json")
        assert a.read_bytes() == b.read_bytes()
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_duplicate_texts_identical_vectors(self, tiny_model_dir, tiny_revision, tmp_path):
        lines = [
            {"id": "c1", "kind": "clause", "text": "identical wording"},
            {"id": "c2", "kind": "clause", "text": "identical wording"},
        ]
        texts = tmp_path / "texts.jsonl"
        texts.write_text("\n".join(json.dumps(l) for l in lines) + "\n", encoding="utf-8")
        out = tmp_path / "out.emb"
        embed_file(texts, _spec(tiny_model_dir, tiny_revision), out)
        blob = out.read_bytes()
        dim, _ = struct.unpack_from("<II", blob, 4)
        offset = 12
        vectors = []
        for _ in range(2):
            _, id_len = struct.unpack_from("<BH", blob, offset)
            offset += 3 + id_len
            vectors.append(np.frombuffer(blob, dtype="<f4", count=dim, offset=offset).copy())
            offset += 4 * dim
        assert np.array_equal(vectors[0], vectors[1])

    def test_truncation_sidecar_lists_exactly_overlength_inputs(
        self, tiny_model_dir, tiny_revision, texts_file, tmp_path
    ):
        out = tmp_path / "out.emb"
        sidecar = tmp_path / "out.emb.json"
        report = embed_file(texts_file, _spec(tiny_model_dir, tiny_revision), out, sidecar)
        assert report["truncated_ids"] == ["c3"]
        payload = json.loads(sidecar.read_text(encoding="utf-8"))
        assert payload["truncated_ids"] == ["c3"]
        assert payload["model"] == str(tiny_model_dir)
        assert payload["revision"] == tiny_revision

    def test_empty_text_rejected(self, tiny_model_dir, tiny_revision, tmp_path):
        texts = tmp_path / "texts.jsonl"
        texts.write_text('{"id":"c1","kind":"clause","text":"   "}\n', encoding="utf-8")
        with pytest.raises(EmptyTextError):
            embed_file(texts, _spec(tiny_model_dir, tiny_revision), tmp_path / "o.emb")

    def test_duplicate_ids_rejected(self, tiny_model_dir, tiny_revision, tmp_path):
        lines = [
            {"id": "c1", "kind": "clause", "text": "a"},
            {"id": "c1", "kind": "clause", "text": "b"},
        ]
        texts = tmp_path / "texts.jsonl"
        texts.write_text("\n".join(json.dumps(l) for l in lines) + "\n", encoding="utf-8")
        with pytest.raises(Exception, match="duplicate"):
            embed_file(texts, _spec(tiny_model_dir, tiny_revision), tmp_path / "o.emb")


class TestPrimaryIntegration:
    def test_output_parses_in_triage_engine(
        self, tiny_model_dir, tiny_revision, texts_file, tmp_path
    ):
        # Cross-component gate: the sibling clausetriage package must be
        # installed (pip install -e ../ from this directory).
        from clausetriage.data import parse_embeddings

        out = tmp_path / "out.emb"
        embed_file(texts_file, _spec(tiny_model_dir, tiny_revision), out)
        store = parse_embeddings(out)
        assert store.dim == 32
        assert len(store) == 4
        assert store.has("rule", "r1")
        assert store.has("clause", "c3")


class TestCli:
    def test_pin_and_embed_round_trip(self, tiny_model_dir, texts_file, tmp_path, capsys):
        assert main(["pin", "--model", str(tiny_model_dir)]) == 0
        revision = capsys.readouterr().out.strip()
        out = tmp_path / "cli.emb"
        code = main(
            [
                "embed", "--texts", str(texts_file), "--model", str(tiny_model_dir),
                "--revision", revision, "--max-length", "64", "--batch-size", "4",
                "--out", str(out),
            ]
        )
        assert code == 0
        assert out.exists()
        assert (tmp_path / "cli.emb.json").exists()

    def test_embed_bad_revision_exits_two(self, tiny_model_dir, texts_file, tmp_path):
        code = main(
            [
                "embed", "--texts", str(texts_file), "--model", str(tiny_model_dir),
                "--revision", "f" * 64, "--out", str(tmp_path / "x.emb"),
            ]
        )
        assert code == 2


class TestEmb1Writer:
    def test_rejects_zero_vector(self, tmp_path):
        with pytest.raises(ValueError, match="zero-norm"):
            write_emb1([("a", "clause", np.zeros(3))], 3, tmp_path / "z.emb")

    def test_rejects_dim_mismatch(self, tmp_path):
        with pytest.raises(ValueError, match="dim"):
            write_emb1([("a", "clause", np.ones(2))], 3, tmp_path / "z.emb")
