"""Append-only audit trail and scored-pair serialization.

Audit files are line-delimited JSON. The first line is a header naming
the schema version, the producing manifest digest, the thresholds, and
which probability fed the decision rule; every following line records
one decided pair with its similarity score, both head probabilities,
and the band. Replaying the recorded probabilities through the decision
rule must reproduce every recorded band exactly.

Scored-pair files (one {"query_id", "clause_id", "label", "score"}
object per line) carry frozen similarity scores between stages so
threshold tuning and triage need only the heads, not the encoder.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .canonical import canonical_json
from .data import LabeledPair
from .errors import MalformedLineError
from .triage import TriageThresholds, decide

AUDIT_SCHEMA_VERSION = "audit/1"

DECISION_INPUT_FUZZY = "p_phi"
DECISION_INPUT_CALIBRATED = "p_theta"


@dataclass(frozen=True)
class AuditRecord:
    query_id: str
    clause_id: str
    score: float
    p_theta: float
    p_phi: float
    decision: str


def write_audit(
    path: str | Path,
    records,
    thresholds: TriageThresholds,
    manifest_digest: str,
    decision_input: str = DECISION_INPUT_FUZZY,
) -> None:
    if decision_input not in (DECISION_INPUT_FUZZY, DECISION_INPUT_CALIBRATED):
        raise ValueError(f"bad decision_input {decision_input!r}")
    header = {
        "schema_version": AUDIT_SCHEMA_VERSION,
        "manifest_digest": manifest_digest,
        "decision_input": decision_input,
        "thresholds": {
            "low": thresholds.low,
            "high": thresholds.high,
            "domain": thresholds.domain,
        },
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(canonical_json(header) + "\n")
        for rec in records:
            fh.write(
                canonical_json(
                    {
                        "query_id": rec.query_id,
                        "clause_id": rec.clause_id,
                        "score": rec.score,
                        "p_theta": rec.p_theta,
                        "p_phi": rec.p_phi,
                        "decision": rec.decision,
                        "manifest_digest": manifest_digest,
                    }
                )
                + "\n"
            )


def read_audit(path: str | Path) -> tuple[dict, list[AuditRecord]]:
    records: list[AuditRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        header_line = fh.readline()
        if not header_line:
            raise MalformedLineError(1, "missing audit header")
        header = json.loads(header_line)
        if header.get("schema_version") != AUDIT_SCHEMA_VERSION:
            raise MalformedLineError(1, f"unsupported schema {header.get('schema_version')!r}")
        for line_no, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            records.append(
                AuditRecord(
                    query_id=obj["query_id"],
                    clause_id=obj["clause_id"],
                    score=float(obj["score"]),
                    p_theta=float(obj["p_theta"]),
                    p_phi=float(obj["p_phi"]),
                    decision=obj["decision"],
                )
            )
    return header, records


def replay_audit(path: str | Path) -> bool:
    """Re-decide every recorded pair from its recorded probability.

    True iff all recorded bands are reproduced.
    """
    header, records = read_audit(path)
    t = header["thresholds"]
    thresholds = TriageThresholds(float(t["low"]), float(t["high"]), t["domain"])
    key = header["decision_input"]
    for rec in records:
        value = rec.p_phi if key == DECISION_INPUT_FUZZY else rec.p_theta
        if decide(value, thresholds) != rec.decision:
            return False
    return True


# --- scored pairs ---


def write_scored_pairs(path: str | Path, pairs, scores) -> None:
    """Pairs with frozen similarity scores, one canonical JSON line each."""
    if len(pairs) != len(scores):
        raise ValueError("pairs and scores lengths differ")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for pair, score in zip(pairs, scores):
            fh.write(
                canonical_json(
                    {
                        "query_id": pair.query_id,
                        "clause_id": pair.clause_id,
                        "label": pair.label,
                        "score": float(score),
                    }
                )
                + "\n"
            )


def read_scored_pairs(path: str | Path) -> tuple[list[LabeledPair], list[float]]:
    pairs: list[LabeledPair] = []
    scores: list[float] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedLineError(line_no, f"invalid JSON: {exc.msg}") from None
            for key in ("query_id", "clause_id", "label", "score"):
                if key not in obj:
                    raise MalformedLineError(line_no, f"missing key {key!r}")
            label = obj["label"]
            if not isinstance(label, int) or isinstance(label, bool) or label not in (0, 1):
                raise MalformedLineError(line_no, "label must be 0 or 1")
            pairs.append(LabeledPair(obj["query_id"], obj["clause_id"], label))
            scores.append(float(obj["score"]))
    return pairs, scores
