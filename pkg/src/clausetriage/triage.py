"""Three-band decision rule and constrained threshold search.

A scalar x lands in one of three bands:

    x < tau_low            -> auto_noncompliant (predict 0)
    tau_low <= x <= tau_high -> review (boundaries inclusive)
    x > tau_high           -> auto_compliant (predict 1)

tune_thresholds searches a uniform grid of (tau_low, tau_high) pairs
and returns the band maximizing auto-decision coverage subject to a
hard ceiling on the error rate over auto-decided examples. Ties break
toward lower auto error, then the lexicographically smallest pair, so
the result is independent of input ordering. If no pair satisfies the
ceiling the minimum-error pair is returned flagged infeasible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainMismatchError, EmptySetError, SingleClassError

DECISION_AUTO_NONCOMPLIANT = "auto_noncompliant"
DECISION_REVIEW = "review"
DECISION_AUTO_COMPLIANT = "auto_compliant"

DOMAIN_PROBABILITY = "probability"
DOMAIN_SIMILARITY = "similarity"

_SIMILARITY_SLACK = 1e-6


@dataclass(frozen=True)
class TriageThresholds:
    low: float
    high: float
    domain: str = DOMAIN_PROBABILITY

    def validate(self) -> None:
        if self.domain not in (DOMAIN_PROBABILITY, DOMAIN_SIMILARITY):
            raise ValueError(f"bad domain {self.domain!r}")
        if self.low > self.high:
            raise ValueError(f"tau_low {self.low} > tau_high {self.high}")
        lo, hi = _domain_bounds(self.domain)
        if not (lo <= self.low <= hi and lo <= self.high <= hi):
            raise ValueError(f"thresholds outside the {self.domain} domain")


@dataclass(frozen=True)
class TriageOutcome:
    query_id: str
    clause_id: str
    score: float
    decision: str


@dataclass(frozen=True)
class TriageReport:
    coverage: float
    auto_error: float
    baseline_error: float
    n_total: int
    n_auto_noncompliant: int
    n_review: int
    n_auto_compliant: int
    empty_auto_band: bool  # auto_error is defined as 0 when no example is auto-decided
    thresholds: TriageThresholds


@dataclass(frozen=True)
class TuneResult:
    thresholds: TriageThresholds
    feasible: bool
    coverage: float
    auto_error: float


def _domain_bounds(domain: str) -> tuple[float, float]:
    if domain == DOMAIN_PROBABILITY:
        return 0.0, 1.0
    return -1.0 - _SIMILARITY_SLACK, 1.0 + _SIMILARITY_SLACK


def decide(x: float, thresholds: TriageThresholds) -> str:
    """Total three-way rule; exactly one band fires per input."""
    thresholds.validate()
    lo, hi = _domain_bounds(thresholds.domain)
    if not lo <= x <= hi:
        raise DomainMismatchError(f"value {x} outside the {thresholds.domain} domain")
    if x < thresholds.low:
        return DECISION_AUTO_NONCOMPLIANT
    if x > thresholds.high:
        return DECISION_AUTO_COMPLIANT
    return DECISION_REVIEW


def evaluate_triage(
    scores,
    labels,
    thresholds: TriageThresholds,
    hard_threshold: float = 0.5,
) -> TriageReport:
    """Coverage, auto-only error, and the everything-auto baseline error.

    Auto bands predict their name: below tau_low predicts 0, above
    tau_high predicts 1. The baseline decides every example at
    hard_threshold (predict 1 iff x > hard_threshold).
    """
    thresholds.validate()
    x = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if x.size == 0:
        raise EmptySetError("evaluate_triage needs at least one example")
    below = x < thresholds.low
    above = x > thresholds.high
    n_below = int(np.sum(below))
    n_above = int(np.sum(above))
    n_auto = n_below + n_above
    n = x.size
    wrong = int(np.sum(below & (y == 1))) + int(np.sum(above & (y == 0)))
    coverage = n_auto / n
    empty = n_auto == 0
    auto_error = 0.0 if empty else wrong / n_auto
    baseline_pred = (x > hard_threshold).astype(np.int64)
    baseline_error = float(np.mean(baseline_pred != y))
    return TriageReport(
        coverage=coverage,
        auto_error=auto_error,
        baseline_error=baseline_error,
        n_total=n,
        n_auto_noncompliant=n_below,
        n_review=n - n_auto,
        n_auto_compliant=n_above,
        empty_auto_band=empty,
        thresholds=thresholds,
    )


def grid_points(grid_n: int, domain: str = DOMAIN_PROBABILITY) -> np.ndarray:
    """Uniform grid over the domain: lo + i*(hi-lo)/(grid_n-1)."""
    if grid_n < 2:
        raise ValueError("grid_n must be >= 2")
    if domain == DOMAIN_PROBABILITY:
        lo, hi = 0.0, 1.0
    elif domain == DOMAIN_SIMILARITY:
        lo, hi = -1.0, 1.0
    else:
        raise ValueError(f"bad domain {domain!r}")
    return lo + (hi - lo) * np.arange(grid_n, dtype=np.float64) / (grid_n - 1)


def tune_thresholds(
    scores,
    labels,
    grid_n: int = 20,
    error_cap: float = 0.02,
    domain: str = DOMAIN_PROBABILITY,
) -> TuneResult:
    """Exhaustive search over all grid pairs with tau_low <= tau_high.

    Among pairs with auto_error <= error_cap, maximizes coverage; ties
    break toward lower auto_error, then the smallest (tau_low,
    tau_high). With no feasible pair, returns the minimum-auto_error
    pair (ties: higher coverage, then smallest pair) flagged infeasible.
    """
    x = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if x.size == 0:
        raise EmptySetError("tune_thresholds needs a non-empty validation set")
    if np.all(y == y[0]):
        raise SingleClassError("validation set has a single label value")

    points = grid_points(grid_n, domain)
    n = x.size
    # Per grid point: counts of auto-decided examples and their mistakes.
    below_count = np.array([int(np.sum(x < t)) for t in points])
    below_wrong = np.array([int(np.sum((x < t) & (y == 1))) for t in points])
    above_count = np.array([int(np.sum(x > t)) for t in points])
    above_wrong = np.array([int(np.sum((x > t) & (y == 0))) for t in points])

    best_feasible: tuple | None = None
    best_any: tuple | None = None
    for i in range(grid_n):
        for j in range(i, grid_n):
            auto = int(below_count[i] + above_count[j])
            wrong = int(below_wrong[i] + above_wrong[j])
            coverage = auto / n
            auto_error = 0.0 if auto == 0 else wrong / auto
            cand = (coverage, auto_error, float(points[i]), float(points[j]))
            if auto_error <= error_cap:
                if best_feasible is None or (
                    coverage > best_feasible[0]
                    or (coverage == best_feasible[0] and auto_error < best_feasible[1])
                ):
                    best_feasible = cand
            if best_any is None or (
                auto_error < best_any[1]
                or (auto_error == best_any[1] and coverage > best_any[0])
            ):
                best_any = cand

    if best_feasible is not None:
        coverage, auto_error, lo, hi = best_feasible
        return TuneResult(TriageThresholds(lo, hi, domain), True, coverage, auto_error)
    coverage, auto_error, lo, hi = best_any
    return TuneResult(TriageThresholds(lo, hi, domain), False, coverage, auto_error)
