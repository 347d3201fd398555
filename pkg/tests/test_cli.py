from __future__ import annotations

import json
from pathlib import Path

import pytest

from clausetriage.cli import main
from clausetriage.manifest import read_manifest

SYNTH = {
    "stage": "synthetic",
    "seed": 42,
    "dim": 10,
    "n_queries": 30,
    "clauses_per_query": 10,
    "noise": 0.25,
    "positive_rate": 0.05,
    "low_grade_weights": [0.55, 0.2, 0.15, 0.1],
}
RANK = {
    "stage": "rank",
    "seed": 42,
    "learning_rate": 0.1,
    "epochs": 2,
    "projection_dim": 10,
    "temperature": 0.2,
}
CLASSIFY = {"stage": "classify", "seed": 42, "learning_rate": 0.05, "epochs": 2}


def _write_configs(root: Path) -> dict[str, Path]:
    paths = {}
    for name, payload in (("synth", SYNTH), ("rank", RANK), ("classify", CLASSIFY)):
        path = root / f"{name}.json"
        path.write_text(json.dumps(payload), encoding="utf-8")
        paths[name] = path
    return paths


def _run_pipeline(root: Path, configs: dict[str, Path], out: Path) -> None:
    assert main(["gen-synthetic", "--config", str(configs["synth"]), "--out", str(out / "data")]) == 0
    assert (
        main(["train-rank", "--config", str(configs["rank"]), "--data", str(out / "data"), "--out", str(out / "rank")])
        == 0
    )
    assert (
        main(
            [
                "train-classify", "--config", str(configs["classify"]),
                "--rank-ckpt", str(out / "rank" / "rank.ckpt"),
                "--data", str(out / "data"), "--out", str(out / "classify"),
            ]
        )
        == 0
    )
    assert (
        main(
            [
                "tune-thresholds", "--heads", str(out / "classify" / "heads.json"),
                "--data", str(out / "classify"), "--grid", "20", "--error-cap", "0.02",
                "--out", str(out / "tune"),
            ]
        )
        == 0
    )
    assert (
        main(
            [
                "evaluate", "--split", "test", "--data", str(out / "data"),
                "--rank-ckpt", str(out / "rank" / "rank.ckpt"),
                "--heads", str(out / "classify" / "heads.json"),
                "--out", str(out / "evaluate"),
            ]
        )
        == 0
    )
    assert (
        main(
            [
                "triage", "--heads", str(out / "classify" / "heads.json"),
                "--thresholds", str(out / "tune" / "thresholds.json"),
                "--pairs", str(out / "classify" / "scores.test.jsonl"),
                "--audit", str(out / "triage" / "audit.jsonl"),
            ]
        )
        == 0
    )


def test_full_pipeline_writes_manifests(tmp_path, capsys):
    configs = _write_configs(tmp_path)
    _run_pipeline(tmp_path, configs, tmp_path / "run")
    for rel in (
        "data/manifest.gen.json",
        "rank/manifest.rank.json",
        "classify/manifest.classify.json",
        "tune/manifest.tune.json",
        "evaluate/manifest.evaluate.test.json",
        "triage/manifest.triage.json",
    ):
        payload = read_manifest(tmp_path / "run" / rel)
        assert payload["digest"]
    out = capsys.readouterr().out
    # One-line summary per subcommand, each naming its manifest.
    assert len([l for l in out.splitlines() if "manifest" in l]) == 6


def test_unknown_flag_exits_one(capsys):
    assert main(["train-rank", "--nope"]) == 1
    assert "usage" in capsys.readouterr().err


def test_unknown_command_exits_one():
    assert main(["frobnicate"]) == 1


def test_help_exits_zero_and_lists_defaults(capsys):
    with pytest.raises(SystemExit) as excinfo:
        main(["train-rank", "--help"])
    assert excinfo.value.code == 0
    text = capsys.readouterr().out
    for fragment in ("--learning-rate", "2e-05", "--epochs", "--temperature", "--seed"):
        assert fragment in text


def test_data_error_exits_two(tmp_path, capsys):
    bad = tmp_path / "train.graded.jsonl"
    bad.write_text('{"query_id":"q1","candidates":["c1"],"grades":[9]}\n', encoding="utf-8")
    assert main(["ingest", "--dataset", str(bad), "--schema", "graded", "--out", str(tmp_path / "o")]) == 2
    assert "grade" in capsys.readouterr().err


def test_missing_file_exits_two(tmp_path):
    assert (
        main(["train-rank", "--seed", "1", "--data", str(tmp_path / "nope"), "--out", str(tmp_path / "o")])
        == 2
    )


def test_flag_overrides_config(tmp_path):
    configs = _write_configs(tmp_path)
    out = tmp_path / "gen"
    assert (
        main(
            ["gen-synthetic", "--config", str(configs["synth"]), "--seed", "7", "--out", str(out)]
        )
        == 0
    )
    payload = read_manifest(out / "manifest.gen.json")
    assert payload["seed"] == 7
    assert payload["config"]["seed"] == 7
    assert payload["config"]["dim"] == 10  # file value preserved


def test_ingest_round_trip(tmp_path):
    src = tmp_path / "validation.graded.jsonl"
    src.write_text(
        '{"query_id":"q1","candidates":["c1","c2"],"grades":[4,0]}\n', encoding="utf-8"
    )
    before = src.read_bytes()
    out = tmp_path / "out"
    assert main(["ingest", "--dataset", str(src), "--schema", "graded", "--out", str(out)]) == 0
    assert src.read_bytes() == before  # inputs never mutated
    assert (out / "ingested.graded.jsonl").exists()


def test_infeasible_tune_exits_three(tmp_path):
    scores = tmp_path / "scores.validation.jsonl"
    # Interleaved labels at every score level: no band is feasible at cap 0
    # with coverage > 0... cap -1 forces the infeasible branch outright.
    lines = []
    for i in range(20):
        lines.append(
            json.dumps(
                {"query_id": "q", "clause_id": f"c{i}", "label": i % 2, "score": -0.5 + i / 20}
            )
        )
    scores.write_text("\n".join(lines) + "\n", encoding="utf-8")
    heads = tmp_path / "heads.json"
    from clausetriage.classifier import CalibrationParams, init_fuzzy_params, write_heads
    from clausetriage.rng import Pcg32

    write_heads(
        CalibrationParams(1.0, 0.0), init_fuzzy_params(4, Pcg32(1)), heads,
        config_digest="x", seed=1,
    )
    code = main(
        [
            "tune-thresholds", "--heads", str(heads), "--data", str(tmp_path),
            "--error-cap", "-1.0", "--out", str(tmp_path / "tune"),
        ]
    )
    assert code == 3
    doc = json.loads((tmp_path / "tune" / "thresholds.json").read_text(encoding="utf-8"))
    assert doc["feasible"] is False


def test_pipeline_determinism_small(tmp_path):
    configs = _write_configs(tmp_path)
    _run_pipeline(tmp_path, configs, tmp_path / "runA")
    _run_pipeline(tmp_path, configs, tmp_path / "runB")
    files_a = sorted(p.relative_to(tmp_path / "runA") for p in (tmp_path / "runA").rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(tmp_path / "runB") for p in (tmp_path / "runB").rglob("*") if p.is_file())
    assert files_a == files_b
    for rel in files_a:
        assert (tmp_path / "runA" / rel).read_bytes() == (tmp_path / "runB" / rel).read_bytes(), rel
