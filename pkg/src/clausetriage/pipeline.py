"""Stage implementations behind the CLI.

Each stage reads its inputs, runs the owning module, writes its
artifacts under the output directory, and finishes with a manifest.
File layout (all names fixed so digests are path-independent):

    gen-synthetic  embeddings.emb, {split}.graded.jsonl,
                   {split}.binary.jsonl, manifest.gen.json
    ingest         ingested.{schema}.jsonl, manifest.ingest.json
    train-rank     rank.ckpt, rank.ckpt.json, manifest.rank.json
    train-classify heads.json, scores.{split}.jsonl, manifest.classify.json
    tune           thresholds.json, manifest.tune.json
    evaluate       manifest.evaluate.{split}.json
    triage         <audit file>, manifest.triage.json
    sweep          seed_{s}/..., manifest.sweep.json
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np

from .audit import (
    DECISION_INPUT_CALIBRATED,
    DECISION_INPUT_FUZZY,
    AuditRecord,
    read_scored_pairs,
    write_audit,
    write_scored_pairs,
)
from .canonical import canonical_json, digest_file, digest_json
from .classifier import (
    calibrate_probability,
    fuzzy_probabilities,
    read_heads,
    train_classifier,
    write_heads,
)
from .config import (
    STAGE_CLASSIFY,
    STAGE_EVALUATE,
    STAGE_RANK,
    STAGE_TRIAGE,
    classify_config_from,
    rank_config_from,
    synthetic_config_from,
    validate_config,
)
from .data import (
    DatasetSplit,
    parse_dataset,
    parse_embeddings,
    write_dataset,
    write_embeddings,
)
from .errors import EmptySetError, SweepStageError
from .manifest import RunManifest, input_digest_map, write_manifest
from .metrics import binary_metrics, rank_metrics
from .rank_training import train_rank
from .retrieval import rank_candidates, read_checkpoint, score_pairs, write_checkpoint
from .synthetic import generate_synthetic
from .triage import TriageThresholds, decide, evaluate_triage, tune_thresholds

SPLITS = ("train", "validation", "test")

HEAD_FUZZY = "fuzzy"
HEAD_CALIBRATED = "calibrated"


def _metrics_dict(m) -> dict:
    return dataclasses.asdict(m)


def head_probabilities(head: str, scores, calib, fuzzy) -> np.ndarray:
    s = np.asarray(scores, dtype=np.float64)
    if head == HEAD_CALIBRATED:
        return calibrate_probability(s, calib)
    if head == HEAD_FUZZY:
        return fuzzy_probabilities(s, fuzzy)
    raise ValueError(f"bad head {head!r}")


def run_gen_synthetic(effective: dict, out_dir: str | Path) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg, seed = synthetic_config_from(effective)
    store, splits = generate_synthetic(cfg, seed)
    emb_path = out / "embeddings.emb"
    write_embeddings(store, emb_path)
    outputs = {"embeddings.emb": digest_file(emb_path)}
    counts = {}
    for split in splits:
        graded = out / f"{split.name}.graded.jsonl"
        binary = out / f"{split.name}.binary.jsonl"
        write_dataset(split, graded, "graded")
        write_dataset(split, binary, "binary")
        outputs[graded.name] = digest_file(graded)
        outputs[binary.name] = digest_file(binary)
        n_pos = sum(p.label for p in split.pairs)
        counts[split.name] = {
            "groups": len(split.groups),
            "pairs": len(split.pairs),
            "positives": n_pos,
        }
    total_pairs = sum(c["pairs"] for c in counts.values())
    total_pos = sum(c["positives"] for c in counts.values())
    manifest = RunManifest(
        stage="gen",
        seed=seed,
        config=effective,
        input_digests={},
        metrics={
            "splits": counts,
            "n_records": len(store),
            "dim": store.dim,
            "realized_positive_rate": total_pos / total_pairs,
            "outputs": outputs,
        },
    )
    path = out / "manifest.gen.json"
    write_manifest(manifest, path)
    return {"manifest": path, "out": out}


def run_ingest(
    dataset_path: str | Path, schema: str, out_dir: str | Path, grade_max: int = 4
) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dataset_path = Path(dataset_path)
    split = parse_dataset(dataset_path, schema, grade_max=grade_max)
    normalized = out / f"ingested.{schema}.jsonl"
    write_dataset(split, normalized, schema)
    manifest = RunManifest(
        stage="ingest",
        seed=0,
        config={"schema": schema, "grade_max": grade_max, "split": split.name},
        input_digests=input_digest_map({dataset_path.name: dataset_path}),
        metrics={
            "groups": len(split.groups),
            "pairs": len(split.pairs),
            "outputs": {normalized.name: digest_file(normalized)},
        },
    )
    path = out / "manifest.ingest.json"
    write_manifest(manifest, path)
    return {"manifest": path, "normalized": normalized}


def _load_graded(data_dir: Path, name: str, grade_max: int) -> DatasetSplit:
    return parse_dataset(data_dir / f"{name}.graded.jsonl", "graded", grade_max=grade_max, name=name)


def _load_binary(data_dir: Path, name: str) -> DatasetSplit:
    return parse_dataset(data_dir / f"{name}.binary.jsonl", "binary", name=name)


def run_train_rank(effective: dict, data_dir: str | Path, out_dir: str | Path) -> dict:
    data = Path(data_dir)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    store = parse_embeddings(data / "embeddings.emb")
    train_split = _load_graded(data, "train", effective["grade_max"])
    val_split = _load_graded(data, "validation", effective["grade_max"])
    config = rank_config_from(effective)
    params, log = train_rank(train_split, val_split, store, config)

    ckpt = out / "rank.ckpt"
    write_checkpoint(params, ckpt)
    sidecar = {
        "config_digest": digest_json(effective),
        "seed": config.seed,
        "dim_base": params.dim_base,
        "projection_dim": params.d,
    }
    (out / "rank.ckpt.json").write_text(canonical_json(sidecar) + "\n", encoding="utf-8")

    manifest = RunManifest(
        stage="rank",
        seed=config.seed,
        config=effective,
        input_digests=input_digest_map(
            {
                "embeddings.emb": data / "embeddings.emb",
                "train.graded.jsonl": data / "train.graded.jsonl",
                "validation.graded.jsonl": data / "validation.graded.jsonl",
            }
        ),
        metrics={
            "epochs": log.epochs,
            "best_epoch": log.best_epoch,
            "skipped_groups": log.skipped_groups,
            "outputs": {"rank.ckpt": digest_file(ckpt)},
        },
    )
    path = out / "manifest.rank.json"
    write_manifest(manifest, path)
    return {"manifest": path, "checkpoint": ckpt}


def run_train_classify(
    effective: dict, rank_ckpt: str | Path, data_dir: str | Path, out_dir: str | Path
) -> dict:
    data = Path(data_dir)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    store = parse_embeddings(data / "embeddings.emb")
    params = read_checkpoint(rank_ckpt)
    config = classify_config_from(effective)

    splits = {name: _load_binary(data, name) for name in SPLITS}
    scores = {name: score_pairs(store, params, split.pairs) for name, split in splits.items()}

    calib, fuzzy, log = train_classifier(splits["train"].pairs, scores["train"], config)

    heads_path = out / "heads.json"
    write_heads(calib, fuzzy, heads_path, config_digest=digest_json(effective), seed=config.seed)
    outputs = {"heads.json": digest_file(heads_path)}
    for name, split in splits.items():
        scored = out / f"scores.{name}.jsonl"
        write_scored_pairs(scored, split.pairs, scores[name])
        outputs[scored.name] = digest_file(scored)

    val_labels = [p.label for p in splits["validation"].pairs]
    val_metrics = {}
    for head in (HEAD_CALIBRATED, HEAD_FUZZY):
        probs = head_probabilities(head, scores["validation"], calib, fuzzy)
        val_metrics[head] = _metrics_dict(binary_metrics(probs, val_labels))

    manifest = RunManifest(
        stage="classify",
        seed=config.seed,
        config=effective,
        input_digests=input_digest_map(
            {
                "embeddings.emb": data / "embeddings.emb",
                "rank.ckpt": Path(rank_ckpt),
                **{f"{n}.binary.jsonl": data / f"{n}.binary.jsonl" for n in SPLITS},
            }
        ),
        metrics={
            "epochs": log.epochs,
            "validation": val_metrics,
            "outputs": outputs,
        },
    )
    path = out / "manifest.classify.json"
    write_manifest(manifest, path)
    return {"manifest": path, "heads": heads_path}


def run_tune(
    effective: dict, heads_path: str | Path, data_dir: str | Path, out_dir: str | Path
) -> dict:
    data = Path(data_dir)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    calib, fuzzy, heads_payload = read_heads(heads_path)
    pairs, scores = read_scored_pairs(data / "scores.validation.jsonl")
    if not pairs:
        raise EmptySetError("validation scored-pairs file is empty")
    labels = [p.label for p in pairs]
    probs = head_probabilities(effective["head"], scores, calib, fuzzy)
    result = tune_thresholds(probs, labels, grid_n=effective["grid"], error_cap=effective["error_cap"])

    thresholds_doc = {
        "low": result.thresholds.low,
        "high": result.thresholds.high,
        "domain": result.thresholds.domain,
        "head": effective["head"],
        "feasible": result.feasible,
        "coverage": result.coverage,
        "auto_error": result.auto_error,
        "grid": effective["grid"],
        "error_cap": effective["error_cap"],
    }
    tpath = out / "thresholds.json"
    tpath.write_text(canonical_json(thresholds_doc) + "\n", encoding="utf-8")

    manifest = RunManifest(
        stage="tune",
        seed=int(heads_payload.get("seed", 0)),
        config=effective,
        input_digests=input_digest_map(
            {
                "heads.json": Path(heads_path),
                "scores.validation.jsonl": data / "scores.validation.jsonl",
            }
        ),
        metrics={
            "feasible": result.feasible,
            "coverage": result.coverage,
            "auto_error": result.auto_error,
            "n_validation": len(pairs),
            "outputs": {"thresholds.json": digest_file(tpath)},
        },
        thresholds=thresholds_doc,
    )
    path = out / "manifest.tune.json"
    write_manifest(manifest, path)
    return {"manifest": path, "thresholds": tpath, "feasible": result.feasible}


def run_evaluate(
    effective: dict,
    data_dir: str | Path,
    rank_ckpt: str | Path,
    heads_path: str | Path,
    out_dir: str | Path,
) -> dict:
    data = Path(data_dir)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    split_name = effective["split"]
    if split_name not in SPLITS:
        raise ValueError(f"split must be one of {SPLITS}, got {split_name!r}")
    store = parse_embeddings(data / "embeddings.emb")
    params = read_checkpoint(rank_ckpt)
    calib, fuzzy, _ = read_heads(heads_path)

    graded = _load_graded(data, split_name, effective["grade_max"])
    ranked_grade_lists = []
    for group in graded.groups:
        grade_of = dict(zip(group.candidate_ids, group.grades))
        ranked = rank_candidates(
            group.query_id, list(group.candidate_ids), store, params, len(group.candidate_ids)
        )
        ranked_grade_lists.append([grade_of[sp.clause_id] for sp in ranked])
    rank_m = rank_metrics(
        ranked_grade_lists, gain_base=effective["gain_base"], star_threshold=effective["star_threshold"]
    )

    binary = _load_binary(data, split_name)
    scores = score_pairs(store, params, binary.pairs)
    labels = [p.label for p in binary.pairs]
    head_metrics = {}
    for head in (HEAD_CALIBRATED, HEAD_FUZZY):
        probs = head_probabilities(head, scores, calib, fuzzy)
        head_metrics[head] = _metrics_dict(binary_metrics(probs, labels, effective["threshold"]))

    manifest = RunManifest(
        stage="evaluate",
        seed=0,
        config=effective,
        input_digests=input_digest_map(
            {
                "embeddings.emb": data / "embeddings.emb",
                f"{split_name}.graded.jsonl": data / f"{split_name}.graded.jsonl",
                f"{split_name}.binary.jsonl": data / f"{split_name}.binary.jsonl",
                "rank.ckpt": Path(rank_ckpt),
                "heads.json": Path(heads_path),
            }
        ),
        metrics={
            "split": split_name,
            "ranking": _metrics_dict(rank_m),
            "classification": head_metrics,
        },
    )
    path = out / f"manifest.evaluate.{split_name}.json"
    write_manifest(manifest, path)
    return {"manifest": path, "ranking": rank_m, "classification": head_metrics}


def run_triage(
    effective: dict,
    heads_path: str | Path,
    thresholds_path: str | Path,
    pairs_path: str | Path,
    audit_path: str | Path,
    out_dir: str | Path | None = None,
) -> dict:
    pairs_path = Path(pairs_path)
    audit_path = Path(audit_path)
    out = Path(out_dir) if out_dir is not None else audit_path.parent
    out.mkdir(parents=True, exist_ok=True)
    audit_path.parent.mkdir(parents=True, exist_ok=True)

    calib, fuzzy, _ = read_heads(heads_path)
    tdoc = json.loads(Path(thresholds_path).read_text(encoding="utf-8"))
    thresholds = TriageThresholds(float(tdoc["low"]), float(tdoc["high"]), tdoc["domain"])
    head = tdoc.get("head", HEAD_FUZZY)

    pairs, scores = read_scored_pairs(pairs_path)
    if not pairs:
        raise EmptySetError("pairs file is empty")
    s = np.asarray(scores, dtype=np.float64)
    p_theta = calibrate_probability(s, calib)
    p_phi = fuzzy_probabilities(s, fuzzy)
    decision_values = p_phi if head == HEAD_FUZZY else p_theta
    labels = [p.label for p in pairs]
    report = evaluate_triage(decision_values, labels, thresholds, effective["hard_threshold"])

    manifest = RunManifest(
        stage="triage",
        seed=0,
        config={**effective, "head": head},
        input_digests=input_digest_map(
            {
                "heads.json": Path(heads_path),
                "thresholds.json": Path(thresholds_path),
                pairs_path.name: pairs_path,
            }
        ),
        metrics={
            "coverage": report.coverage,
            "auto_error": report.auto_error,
            "baseline_error": report.baseline_error,
            "n_total": report.n_total,
            "n_auto_noncompliant": report.n_auto_noncompliant,
            "n_review": report.n_review,
            "n_auto_compliant": report.n_auto_compliant,
            "empty_auto_band": report.empty_auto_band,
        },
        thresholds={
            "low": thresholds.low,
            "high": thresholds.high,
            "domain": thresholds.domain,
            "head": head,
        },
    )
    manifest_path = out / "manifest.triage.json"
    digest = write_manifest(manifest, manifest_path)

    records = []
    decision_input = DECISION_INPUT_FUZZY if head == HEAD_FUZZY else DECISION_INPUT_CALIBRATED
    for pair, score, pt, pp, val in zip(pairs, scores, p_theta, p_phi, decision_values):
        records.append(
            AuditRecord(
                query_id=pair.query_id,
                clause_id=pair.clause_id,
                score=float(score),
                p_theta=float(pt),
                p_phi=float(pp),
                decision=decide(float(val), thresholds),
            )
        )
    write_audit(audit_path, records, thresholds, digest, decision_input)
    return {"manifest": manifest_path, "audit": audit_path, "report": report}


def run_pipeline(
    out_dir: str | Path,
    synthetic_effective: dict,
    rank_effective: dict,
    classify_effective: dict,
    tune_effective: dict,
    evaluate_split: str = "test",
    hard_threshold: float = 0.5,
) -> dict:
    """gen-synthetic -> train-rank -> train-classify -> tune -> evaluate
    -> triage, with the conventional directory layout under out_dir."""
    out = Path(out_dir)
    data = out / "data"
    gen = run_gen_synthetic(synthetic_effective, data)
    rank = run_train_rank(rank_effective, data, out / "rank")
    classify = run_train_classify(classify_effective, rank["checkpoint"], data, out / "classify")
    tune = run_tune(tune_effective, classify["heads"], out / "classify", out / "tune")
    evaluate = run_evaluate(
        validate_config(STAGE_EVALUATE, {"split": evaluate_split, "grade_max": synthetic_effective["grade_max"]}),
        data,
        rank["checkpoint"],
        classify["heads"],
        out / "evaluate",
    )
    triage = run_triage(
        validate_config(STAGE_TRIAGE, {"hard_threshold": hard_threshold}),
        classify["heads"],
        tune["thresholds"],
        Path(out / "classify") / f"scores.{evaluate_split}.jsonl",
        out / "triage" / "audit.jsonl",
        out / "triage",
    )
    return {
        "gen": gen,
        "rank": rank,
        "classify": classify,
        "tune": tune,
        "evaluate": evaluate,
        "triage": triage,
    }


def run_sweep(
    seeds: list[int],
    data_dir: str | Path,
    rank_effective: dict,
    classify_effective: dict,
    tune_effective: dict,
    out_dir: str | Path,
    evaluate_split: str = "test",
) -> dict:
    """Re-run the training stages once per seed over fixed data and
    aggregate the evaluation metrics (per seed plus mean/min/max)."""
    if not seeds:
        raise EmptySetError("seed set must be non-empty")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = Path(data_dir)

    per_seed: dict[str, dict] = {}
    any_infeasible = False
    for seed in seeds:
        seed_out = out / f"seed_{seed}"
        rank_eff = validate_config(STAGE_RANK, {**rank_effective, "seed": seed})
        classify_eff = validate_config(STAGE_CLASSIFY, {**classify_effective, "seed": seed})
        try:
            rank = run_train_rank(rank_eff, data, seed_out / "rank")
            classify = run_train_classify(
                classify_eff, rank["checkpoint"], data, seed_out / "classify"
            )
            tune = run_tune(
                tune_effective, classify["heads"], seed_out / "classify", seed_out / "tune"
            )
            evaluate = run_evaluate(
                validate_config(
                    STAGE_EVALUATE,
                    {"split": evaluate_split, "grade_max": rank_effective.get("grade_max", 4)},
                ),
                data,
                rank["checkpoint"],
                classify["heads"],
                seed_out / "evaluate",
            )
        except Exception as exc:
            raise SweepStageError(seed, exc) from exc
        any_infeasible = any_infeasible or not tune["feasible"]
        ranking = evaluate["ranking"]
        tune_doc = json.loads(Path(tune["thresholds"]).read_text(encoding="utf-8"))
        per_seed[str(seed)] = {
            "ndcg_at_5": ranking.ndcg_at_5,
            "ndcg_at_10": ranking.ndcg_at_10,
            "p4_at_5": ranking.p4_at_5,
            "auc_calibrated": evaluate["classification"][HEAD_CALIBRATED]["auc"],
            "auc_fuzzy": evaluate["classification"][HEAD_FUZZY]["auc"],
            "f1_calibrated": evaluate["classification"][HEAD_CALIBRATED]["f1"],
            "f1_fuzzy": evaluate["classification"][HEAD_FUZZY]["f1"],
            "tune_coverage": tune_doc["coverage"],
            "tune_auto_error": tune_doc["auto_error"],
            "tune_feasible": tune_doc["feasible"],
        }

    numeric_keys = [
        k for k, v in next(iter(per_seed.values())).items() if isinstance(v, (int, float)) and not isinstance(v, bool)
    ]
    aggregate = {}
    for key in numeric_keys:
        values = [per_seed[str(s)][key] for s in seeds]
        if any(v is None for v in values):
            aggregate[key] = None
            continue
        aggregate[key] = {
            "mean": sum(values) / len(values),
            "min": min(values),
            "max": max(values),
        }

    manifest = RunManifest(
        stage="sweep",
        seed=seeds[0],
        seed_set=list(seeds),
        config={
            "rank": {k: v for k, v in rank_effective.items() if k != "seed"},
            "classify": {k: v for k, v in classify_effective.items() if k != "seed"},
            "tune": tune_effective,
            "evaluate_split": evaluate_split,
        },
        input_digests=input_digest_map(
            {
                "embeddings.emb": data / "embeddings.emb",
                **{f"{n}.graded.jsonl": data / f"{n}.graded.jsonl" for n in SPLITS[:2]},
                **{f"{n}.binary.jsonl": data / f"{n}.binary.jsonl" for n in SPLITS},
            }
        ),
        metrics={"per_seed": per_seed, "aggregate": aggregate},
    )
    path = out / "manifest.sweep.json"
    write_manifest(manifest, path)
    return {"manifest": path, "per_seed": per_seed, "aggregate": aggregate, "any_infeasible": any_infeasible}
