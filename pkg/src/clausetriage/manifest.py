"""Run manifests: the reproducibility record of every pipeline stage.

A manifest captures seed(s), the effective configuration and its
digest, digests of every input file (keyed by file name so equal data
hashes equal regardless of directory), the stage's metric payload, and
optional tuned thresholds. The equality digest covers everything except
tool_version; manifests contain no wall-clock or host values, so equal
(seed, config, inputs) reproduce equal bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .canonical import canonical_json, digest_file, digest_json

TOOL_VERSION = "clausetriage/0.1.0"

DEFAULT_SEED_SET = (40, 41, 42, 43, 44)

# Key subset the equality digest is computed over (sorted, canonical).
DIGEST_KEYS = (
    "stage",
    "seed",
    "seed_set",
    "config",
    "config_digest",
    "input_digests",
    "metrics",
    "thresholds",
)


@dataclass
class RunManifest:
    stage: str
    seed: int
    config: dict
    input_digests: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    thresholds: dict | None = None
    seed_set: list[int] | None = None
    tool_version: str = TOOL_VERSION

    @property
    def config_digest(self) -> str:
        return digest_json(self.config)

    def to_dict(self) -> dict:
        body = {
            "stage": self.stage,
            "seed": self.seed,
            "seed_set": self.seed_set,
            "config": self.config,
            "config_digest": self.config_digest,
            "input_digests": self.input_digests,
            "metrics": self.metrics,
            "thresholds": self.thresholds,
        }
        return {**body, "digest": manifest_digest_of(body), "tool_version": self.tool_version}


def manifest_digest_of(body: dict) -> str:
    return digest_json({k: body[k] for k in DIGEST_KEYS})


def write_manifest(manifest: RunManifest, path: str | Path) -> str:
    """Write canonical JSON; returns the equality digest."""
    payload = manifest.to_dict()
    Path(path).write_text(canonical_json(payload) + "\n", encoding="utf-8")
    return payload["digest"]


def read_manifest(path: str | Path) -> dict:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    recomputed = manifest_digest_of(payload)
    if payload.get("digest") != recomputed:
        raise ValueError(f"{Path(path).name}: manifest digest mismatch")
    return payload


def input_digest_map(paths: dict[str, str | Path]) -> dict[str, str]:
    """Digest files keyed by logical name (file basename by convention)."""
    return {name: digest_file(p) for name, p in sorted(paths.items())}
