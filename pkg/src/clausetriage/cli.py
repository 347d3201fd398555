"""Command-line entry point.

Subcommands mirror the pipeline stages; every flag that shadows a
config key overrides the file value, and the merged effective config is
what lands in the manifest. Exit codes: 0 success, 1 usage error,
2 data/validation error, 3 infeasible threshold constraint.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import (
    SCHEMAS,
    STAGE_CLASSIFY,
    STAGE_EVALUATE,
    STAGE_RANK,
    STAGE_SYNTHETIC,
    STAGE_TRIAGE,
    STAGE_TUNE,
    load_config,
    merge_overrides,
    validate_config,
)
from .errors import ClauseTriageError
from .manifest import DEFAULT_SEED_SET
from .pipeline import (
    run_evaluate,
    run_gen_synthetic,
    run_ingest,
    run_sweep,
    run_train_classify,
    run_train_rank,
    run_triage,
    run_tune,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INFEASIBLE = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1, not argparse's 2
        raise _UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _flag(key: str) -> str:
    return "--" + key.replace("_", "-")


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {text!r}")


def _parse_float_list(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part != ""]


def _parse_int_list(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part != ""]


def _add_schema_flags(parser: argparse.ArgumentParser, stage: str) -> None:
    """One override flag per config key; None means 'not provided'."""
    for key, spec in SCHEMAS[stage].items():
        kwargs: dict = {"default": None, "dest": f"cfg_{key}"}
        if spec.kind in ("int", "int?"):
            kwargs["type"] = int
        elif spec.kind == "float":
            kwargs["type"] = float
        elif spec.kind == "bool":
            kwargs["type"] = _parse_bool
            kwargs["metavar"] = "true|false"
        elif spec.kind == "list[float]":
            kwargs["type"] = _parse_float_list
            kwargs["metavar"] = "F,F,..."
        elif spec.kind == "list[int]":
            kwargs["type"] = _parse_int_list
            kwargs["metavar"] = "N,N,..."
        else:
            kwargs["type"] = str
        if spec.required:
            kwargs["help"] = "(required unless set in --config)"
        else:
            kwargs["help"] = f"(default: {spec.default})"
        parser.add_argument(_flag(key), **kwargs)


def _collect_overrides(args: argparse.Namespace, stage: str) -> dict:
    return {key: getattr(args, f"cfg_{key}") for key in SCHEMAS[stage]}


def _effective(args: argparse.Namespace, stage: str) -> dict:
    """File config (if any) merged with flag overrides."""
    base: dict = {}
    config_path = getattr(args, "config", None)
    if config_path:
        _, base = load_config(config_path, expected_stage=stage)
    overrides = _collect_overrides(args, stage)
    merged = dict(base)
    for key, value in overrides.items():
        if value is not None:
            merged[key] = value
    return validate_config(stage, merged)


def build_parser() -> _Parser:
    parser = _Parser(
        prog="clausetriage",
        description="Deterministic clause-rule retrieval and fuzzy compliance triage.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="validate and normalize a dataset file")
    p.add_argument("--dataset", required=True)
    p.add_argument("--schema", required=True, choices=["graded", "binary"])
    p.add_argument("--out", required=True)
    p.add_argument("--grade-max", type=int, default=4)

    p = sub.add_parser("gen-synthetic", help="generate a seeded synthetic corpus")
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    _add_schema_flags(p, STAGE_SYNTHETIC)

    p = sub.add_parser("train-rank", help="train the projection heads")
    p.add_argument("--config", default=None)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    _add_schema_flags(p, STAGE_RANK)

    p = sub.add_parser("train-classify", help="train calibration and fuzzy heads")
    p.add_argument("--config", default=None)
    p.add_argument("--rank-ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    _add_schema_flags(p, STAGE_CLASSIFY)

    p = sub.add_parser("tune-thresholds", help="constrained grid search for the triage band")
    p.add_argument("--heads", required=True)
    p.add_argument("--data", required=True, help="directory with scores.validation.jsonl")
    p.add_argument("--out", required=True)
    _add_schema_flags(p, STAGE_TUNE)

    p = sub.add_parser("evaluate", help="ranking and classification metrics for one split")
    p.add_argument("--data", required=True)
    p.add_argument("--rank-ckpt", required=True)
    p.add_argument("--heads", required=True)
    p.add_argument("--out", required=True)
    _add_schema_flags(p, STAGE_EVALUATE)

    p = sub.add_parser("triage", help="decide scored pairs and emit the audit trail")
    p.add_argument("--heads", required=True)
    p.add_argument("--thresholds", required=True)
    p.add_argument("--pairs", required=True, help="scored-pairs jsonl")
    p.add_argument("--audit", required=True, help="audit trail output path")
    p.add_argument("--out", default=None, help="manifest directory (default: audit directory)")
    _add_schema_flags(p, STAGE_TRIAGE)

    p = sub.add_parser("sweep", help="re-train across a seed set and aggregate metrics")
    p.add_argument("--seeds", type=_parse_int_list, default=list(DEFAULT_SEED_SET), metavar="N,N,...")
    p.add_argument("--data", required=True)
    p.add_argument("--rank-config", required=True)
    p.add_argument("--classify-config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="test", choices=["train", "validation", "test"])
    p.add_argument("--grid", type=int, default=None, help="(default: 20)")
    p.add_argument("--error-cap", type=float, default=None, help="(default: 0.02)")
    p.add_argument("--head", default=None, help="(default: fuzzy)")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    try:
        return _dispatch(args)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except ClauseTriageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "ingest":
        result = run_ingest(args.dataset, args.schema, args.out, args.grade_max)
        print(f"ingest: normalized {Path(args.dataset).name} -> {result['manifest']}")
        return EXIT_OK

    if args.command == "gen-synthetic":
        effective = _effective(args, STAGE_SYNTHETIC)
        result = run_gen_synthetic(effective, args.out)
        print(
            f"gen-synthetic: {effective['n_queries']} queries x "
            f"{effective['clauses_per_query']} clauses -> {result['manifest']}"
        )
        return EXIT_OK

    if args.command == "train-rank":
        effective = _effective(args, STAGE_RANK)
        result = run_train_rank(effective, args.data, args.out)
        print(f"train-rank: seed {effective['seed']} -> {result['manifest']}")
        return EXIT_OK

    if args.command == "train-classify":
        effective = _effective(args, STAGE_CLASSIFY)
        result = run_train_classify(effective, args.rank_ckpt, args.data, args.out)
        print(f"train-classify: seed {effective['seed']} -> {result['manifest']}")
        return EXIT_OK

    if args.command == "tune-thresholds":
        effective = _effective(args, STAGE_TUNE)
        result = run_tune(effective, args.heads, args.data, args.out)
        status = "feasible" if result["feasible"] else "INFEASIBLE"
        print(f"tune-thresholds: {status} -> {result['manifest']}")
        return EXIT_OK if result["feasible"] else EXIT_INFEASIBLE

    if args.command == "evaluate":
        effective = _effective(args, STAGE_EVALUATE)
        result = run_evaluate(effective, args.data, args.rank_ckpt, args.heads, args.out)
        r = result["ranking"]
        print(
            f"evaluate[{effective['split']}]: ndcg@5 {r.ndcg_at_5:.4f} "
            f"over {r.n_queries} queries -> {result['manifest']}"
        )
        return EXIT_OK

    if args.command == "triage":
        effective = _effective(args, STAGE_TRIAGE)
        result = run_triage(
            effective, args.heads, args.thresholds, args.pairs, args.audit, args.out
        )
        report = result["report"]
        print(
            f"triage: coverage {report.coverage:.4f}, auto_error {report.auto_error:.4f} "
            f"-> {result['manifest']}"
        )
        return EXIT_OK

    if args.command == "sweep":
        _, rank_eff = load_config(args.rank_config, expected_stage=STAGE_RANK)
        _, classify_eff = load_config(args.classify_config, expected_stage=STAGE_CLASSIFY)
        tune_overrides = {"grid": args.grid, "error_cap": args.error_cap, "head": args.head}
        tune_eff = merge_overrides(STAGE_TUNE, {}, tune_overrides)
        result = run_sweep(
            args.seeds, args.data, rank_eff, classify_eff, tune_eff, args.out, args.split
        )
        print(f"sweep: {len(args.seeds)} seeds -> {result['manifest']}")
        return EXIT_INFEASIBLE if result["any_infeasible"] else EXIT_OK

    raise _UsageError(f"unknown command {args.command!r}")


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
