"""Exception hierarchy.

Every data/validation error carries enough locator context (line number,
record id, group id) to point at the offending input. The CLI maps
:class:`ClauseTriageError` subclasses to exit code 2.
"""

from __future__ import annotations


class ClauseTriageError(Exception):
    """Base class for all engine errors."""


# --- dataset parsing ---


class MalformedLineError(ClauseTriageError):
    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {reason}")


class GradeOutOfRangeError(ClauseTriageError):
    def __init__(self, line_no: int, value: int, grade_max: int):
        self.line_no = line_no
        self.value = value
        super().__init__(f"line {line_no}: grade {value} outside [0, {grade_max}]")


class DuplicateCandidateError(ClauseTriageError):
    def __init__(self, group_id: str, candidate_id: str, line_no: int | None = None):
        self.group_id = group_id
        self.candidate_id = candidate_id
        self.line_no = line_no
        at = f" (line {line_no})" if line_no is not None else ""
        super().__init__(f"group {group_id!r}: duplicate candidate {candidate_id!r}{at}")


class EmptyGroupError(ClauseTriageError):
    def __init__(self, group_id: str, line_no: int | None = None):
        self.group_id = group_id
        self.line_no = line_no
        at = f" (line {line_no})" if line_no is not None else ""
        super().__init__(f"group {group_id!r} has no candidates{at}")


# --- embedding store ---


class BadMagicError(ClauseTriageError):
    pass


class DimMismatchError(ClauseTriageError):
    def __init__(self, record_id: str, expected: int, got: int):
        self.record_id = record_id
        super().__init__(f"record {record_id!r}: expected dim {expected}, got {got}")


class ZeroNormVectorError(ClauseTriageError):
    def __init__(self, record_id: str):
        self.record_id = record_id
        super().__init__(f"record {record_id!r}: zero-norm vector rejected")


class DuplicateIdError(ClauseTriageError):
    def __init__(self, record_id: str, kind: str):
        self.record_id = record_id
        self.kind = kind
        super().__init__(f"duplicate {kind} id {record_id!r}")


class UnknownIdError(ClauseTriageError):
    def __init__(self, record_id: str, kind: str):
        self.record_id = record_id
        self.kind = kind
        super().__init__(f"unknown {kind} id {record_id!r}")


# --- synthetic generation ---


class InvalidConfigError(ClauseTriageError):
    pass


# --- training ---


class DegenerateTargetError(ClauseTriageError):
    pass


class EmptyTrainSetError(ClauseTriageError):
    pass


class AllOneClassError(ClauseTriageError):
    pass


class SweepStageError(ClauseTriageError):
    """A per-seed stage failure inside a seed sweep, annotated with the seed."""

    def __init__(self, seed: int, original: BaseException):
        self.seed = seed
        super().__init__(f"[seed {seed}] {original}")


# --- triage / metrics ---


class EmptySetError(ClauseTriageError):
    pass


class SingleClassError(ClauseTriageError):
    pass


class DomainMismatchError(ClauseTriageError):
    pass


# --- configuration ---


class ConfigError(ClauseTriageError):
    pass


class UnknownKeyError(ConfigError):
    def __init__(self, key: str, stage: str):
        self.key = key
        super().__init__(f"unknown key {key!r} for stage {stage!r}")


class ConfigTypeError(ConfigError):
    def __init__(self, key: str, expected: str, got: object):
        self.key = key
        super().__init__(f"key {key!r}: expected {expected}, got {type(got).__name__} ({got!r})")


class MissingRequiredError(ConfigError):
    def __init__(self, key: str, stage: str):
        self.key = key
        super().__init__(f"stage {stage!r} requires key {key!r}")
