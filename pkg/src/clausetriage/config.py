"""Stage configuration schemas and strict loading.

Config files are JSON objects with a mandatory "stage" key naming the
schema. Unknown keys are hard errors (silent drift is worse than a
failed run), required keys must be present, and every default is
materialized into the returned effective mapping so the manifest always
records the exact configuration that ran.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .classifier import ClassifyTrainConfig
from .errors import ConfigTypeError, MissingRequiredError, UnknownKeyError
from .rank_training import RankTrainConfig
from .synthetic import SyntheticConfig

STAGE_SYNTHETIC = "synthetic"
STAGE_RANK = "rank"
STAGE_CLASSIFY = "classify"
STAGE_TUNE = "tune"
STAGE_EVALUATE = "evaluate"
STAGE_TRIAGE = "triage"

_REQUIRED = object()


@dataclass(frozen=True)
class FieldSpec:
    kind: str  # int | float | str | bool | list[int] | list[float] | int?
    default: object = _REQUIRED

    @property
    def required(self) -> bool:
        return self.default is _REQUIRED


SCHEMAS: dict[str, dict[str, FieldSpec]] = {
    STAGE_SYNTHETIC: {
        "seed": FieldSpec("int"),
        "dim": FieldSpec("int", 16),
        "n_queries": FieldSpec("int", 50),
        "clauses_per_query": FieldSpec("int", 20),
        "grade_max": FieldSpec("int", 4),
        "low_grade_weights": FieldSpec("list[float]", [0.70, 0.15, 0.10, 0.05]),
        "positive_rate": FieldSpec("float", 0.006),
        "noise": FieldSpec("float", 0.3),
        "binary_threshold": FieldSpec("int?", None),
        "split_fractions": FieldSpec("list[float]", [0.6, 0.2, 0.2]),
    },
    STAGE_RANK: {
        "seed": FieldSpec("int"),
        "learning_rate": FieldSpec("float", 2e-5),
        "weight_decay": FieldSpec("float", 0.01),
        "max_grad_norm": FieldSpec("float", 1.0),
        "epochs": FieldSpec("int", 3),
        "max_group_pairs": FieldSpec("int", 96),
        "temperature": FieldSpec("float", 1.0),
        "gain_base": FieldSpec("float", 2.0),
        "projection_dim": FieldSpec("int", 512),
        "tie_projections": FieldSpec("bool", False),
        "grade_max": FieldSpec("int", 4),
    },
    STAGE_CLASSIFY: {
        "seed": FieldSpec("int"),
        "pos_weight_mode": FieldSpec("str", "weighted"),
        "pos_weight": FieldSpec("float", 200.0),
        "neg_weight": FieldSpec("float", 1.0),
        "learning_rate": FieldSpec("float", 2e-5),
        "weight_decay": FieldSpec("float", 0.01),
        "epochs": FieldSpec("int", 3),
        "batch_size": FieldSpec("int", 8),
        "hidden": FieldSpec("int", 16),
    },
    STAGE_TUNE: {
        "grid": FieldSpec("int", 20),
        "error_cap": FieldSpec("float", 0.02),
        "head": FieldSpec("str", "fuzzy"),
    },
    STAGE_EVALUATE: {
        "split": FieldSpec("str", "validation"),
        "threshold": FieldSpec("float", 0.5),
        "gain_base": FieldSpec("float", 2.0),
        "grade_max": FieldSpec("int", 4),
        "star_threshold": FieldSpec("int", 4),
    },
    STAGE_TRIAGE: {
        "hard_threshold": FieldSpec("float", 0.5),
    },
}


def _check_type(key: str, value, kind: str):
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigTypeError(key, "integer", value)
        return value
    if kind == "int?":
        if value is None:
            return None
        return _check_type(key, value, "int")
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigTypeError(key, "number", value)
        return float(value)
    if kind == "str":
        if not isinstance(value, str):
            raise ConfigTypeError(key, "string", value)
        return value
    if kind == "bool":
        if not isinstance(value, bool):
            raise ConfigTypeError(key, "boolean", value)
        return value
    if kind in ("list[float]", "list[int]"):
        if not isinstance(value, list):
            raise ConfigTypeError(key, kind, value)
        inner = kind[5:-1]
        return [_check_type(key, v, inner) for v in value]
    raise AssertionError(f"unhandled kind {kind!r}")


def validate_config(stage: str, mapping: dict) -> dict:
    """Strictly validate and materialize defaults for one stage mapping."""
    if stage not in SCHEMAS:
        raise ConfigTypeError("stage", f"one of {sorted(SCHEMAS)}", stage)
    schema = SCHEMAS[stage]
    for key in mapping:
        if key not in schema:
            raise UnknownKeyError(key, stage)
    effective: dict = {}
    for key, spec in schema.items():
        if key in mapping:
            effective[key] = _check_type(key, mapping[key], spec.kind)
        elif spec.required:
            raise MissingRequiredError(key, stage)
        else:
            effective[key] = spec.default if not isinstance(spec.default, list) else list(spec.default)
    return effective


def load_config(path: str | Path, expected_stage: str | None = None) -> tuple[str, dict]:
    """Load a JSON config file; returns (stage, effective mapping)."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(payload, dict):
        raise ConfigTypeError("<document>", "JSON object", payload)
    if "stage" not in payload:
        raise MissingRequiredError("stage", "<config>")
    stage = payload["stage"]
    if not isinstance(stage, str):
        raise ConfigTypeError("stage", "string", stage)
    if expected_stage is not None and stage != expected_stage:
        raise ConfigTypeError("stage", expected_stage, stage)
    body = {k: v for k, v in payload.items() if k != "stage"}
    return stage, validate_config(stage, body)


def merge_overrides(stage: str, effective_or_partial: dict, overrides: dict) -> dict:
    """Apply non-None overrides (CLI flags win over file values)."""
    merged = dict(effective_or_partial)
    for key, value in overrides.items():
        if value is not None:
            merged[key] = value
    return validate_config(stage, merged)


# --- typed config constructors ---


def synthetic_config_from(effective: dict) -> tuple[SyntheticConfig, int]:
    cfg = SyntheticConfig(
        dim=effective["dim"],
        n_queries=effective["n_queries"],
        clauses_per_query=effective["clauses_per_query"],
        grade_max=effective["grade_max"],
        low_grade_weights=tuple(effective["low_grade_weights"]),
        positive_rate=effective["positive_rate"],
        noise=effective["noise"],
        binary_threshold=effective["binary_threshold"],
        split_fractions=tuple(effective["split_fractions"]),
    )
    return cfg, effective["seed"]


def rank_config_from(effective: dict) -> RankTrainConfig:
    return RankTrainConfig(
        seed=effective["seed"],
        learning_rate=effective["learning_rate"],
        weight_decay=effective["weight_decay"],
        max_grad_norm=effective["max_grad_norm"],
        epochs=effective["epochs"],
        max_group_pairs=effective["max_group_pairs"],
        temperature=effective["temperature"],
        gain_base=effective["gain_base"],
        projection_dim=effective["projection_dim"],
        tie_projections=effective["tie_projections"],
    )


def classify_config_from(effective: dict) -> ClassifyTrainConfig:
    return ClassifyTrainConfig(
        seed=effective["seed"],
        pos_weight_mode=effective["pos_weight_mode"],
        pos_weight=effective["pos_weight"],
        neg_weight=effective["neg_weight"],
        learning_rate=effective["learning_rate"],
        weight_decay=effective["weight_decay"],
        epochs=effective["epochs"],
        batch_size=effective["batch_size"],
        hidden=effective["hidden"],
    )
