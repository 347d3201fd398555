"""Scalar calibration head and fuzzy-gating head over similarity scores.

Both heads consume the frozen cosine score s of a (rule, clause) pair:

* calibration head: p = sigmoid(alpha * s + beta), two scalars;
* fuzzy head: u = softmax(W2 tanh(W1 s + b1) + b2), a probability
  3-vector over (auto-noncompliant, review, auto-compliant) states,
  reduced to a scalar probability p = u[compliant] + 0.5 * u[review]
  (review mass is evidence of indifference, split symmetrically).

Training minimizes positivity-weighted binary cross-entropy on each
head jointly, with analytic gradients (finite-difference checked in the
tests) and the same AdamW update as the rank trainer. The weighted mode
up-weights rare positives; the unweighted mode is w1 = w0 = 1.
"""

from __future__ import annotations

import base64
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import AllOneClassError, EmptyTrainSetError
from .optim import AdamW
from .rng import Pcg32

BCE_EPS = 1e-7

POS_WEIGHT_MODE_UNWEIGHTED = "unweighted"
POS_WEIGHT_MODE_WEIGHTED = "weighted"


@dataclass
class CalibrationParams:
    alpha: float
    beta: float


@dataclass
class FuzzyHeadParams:
    """Tiny 1-d MLP: W1/b1 of width `hidden`, W2/b2 mapping to 3 states."""

    W1: np.ndarray  # (hidden,)
    b1: np.ndarray  # (hidden,)
    W2: np.ndarray  # (3, hidden)
    b2: np.ndarray  # (3,)

    @property
    def hidden(self) -> int:
        return int(self.W1.shape[0])

    def copy(self) -> "FuzzyHeadParams":
        return FuzzyHeadParams(self.W1.copy(), self.b1.copy(), self.W2.copy(), self.b2.copy())


@dataclass(frozen=True)
class ClassifyTrainConfig:
    seed: int
    pos_weight_mode: str = POS_WEIGHT_MODE_WEIGHTED
    pos_weight: float = 200.0  # w1 in weighted mode
    neg_weight: float = 1.0  # w0
    learning_rate: float = 2e-5
    weight_decay: float = 0.01
    epochs: int = 3
    batch_size: int = 8
    hidden: int = 16

    def validate(self) -> None:
        if self.pos_weight_mode not in (POS_WEIGHT_MODE_UNWEIGHTED, POS_WEIGHT_MODE_WEIGHTED):
            raise ValueError(f"bad pos_weight_mode {self.pos_weight_mode!r}")
        if self.pos_weight_mode == POS_WEIGHT_MODE_WEIGHTED and self.pos_weight <= 0:
            raise ValueError("weighted mode needs pos_weight > 0")
        if self.neg_weight <= 0:
            raise ValueError("neg_weight must be > 0")
        if self.epochs < 1 or self.batch_size < 1 or self.hidden < 1:
            raise ValueError("epochs, batch_size, and hidden must be >= 1")

    def weights(self) -> tuple[float, float]:
        """(w1, w0) as used by the loss; unweighted collapses to (1, 1)."""
        if self.pos_weight_mode == POS_WEIGHT_MODE_UNWEIGHTED:
            return 1.0, 1.0
        return self.pos_weight, self.neg_weight


@dataclass
class ClassifierTrainingLog:
    epochs: list[dict] = field(default_factory=list)


def sigmoid(z):
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500))),
                    np.exp(np.clip(z, -500, 500)) / (1.0 + np.exp(np.clip(z, -500, 500))))


def calibrate_probability(s, params: CalibrationParams):
    """sigmoid(alpha * s + beta); strictly monotone in s for alpha > 0."""
    z = params.alpha * np.asarray(s, dtype=np.float64) + params.beta
    out = sigmoid(z)
    return float(out) if np.isscalar(s) or np.ndim(s) == 0 else out


def weighted_bce(p, y, w1: float, w0: float):
    """-w1*y*log(p) - w0*(1-y)*log(1-p), with p clamped to [eps, 1-eps]."""
    p = np.clip(np.asarray(p, dtype=np.float64), BCE_EPS, 1.0 - BCE_EPS)
    y = np.asarray(y, dtype=np.float64)
    out = -w1 * y * np.log(p) - w0 * (1.0 - y) * np.log1p(-p)
    return float(out) if out.ndim == 0 else out


def fuzzy_forward(s, params: FuzzyHeadParams) -> np.ndarray:
    """Probability 3-vector(s) over (noncompliant, review, compliant)."""
    s_arr = np.atleast_1d(np.asarray(s, dtype=np.float64))
    t = np.tanh(np.outer(s_arr, params.W1) + params.b1)  # (n, hidden)
    logits = t @ params.W2.T + params.b2  # (n, 3)
    logits -= logits.max(axis=1, keepdims=True)
    e = np.exp(logits)
    u = e / e.sum(axis=1, keepdims=True)
    return u[0] if np.ndim(s) == 0 else u


def fuzzy_probability(u: np.ndarray):
    """Scalar compliance probability: full compliant mass plus half the
    review mass."""
    u = np.asarray(u, dtype=np.float64)
    if u.ndim == 1:
        return float(u[2] + 0.5 * u[1])
    return u[:, 2] + 0.5 * u[:, 1]


def fuzzy_probabilities(scores, params: FuzzyHeadParams) -> np.ndarray:
    u = fuzzy_forward(np.asarray(scores, dtype=np.float64), params)
    if u.ndim == 1:
        u = u[None, :]
    return fuzzy_probability(u)


def init_fuzzy_params(hidden: int, rng: Pcg32) -> FuzzyHeadParams:
    """Seeded gaussian init; b1 spread so units cover different score
    regions, W2 scaled by 1/sqrt(hidden)."""
    W1 = rng.normal_array(hidden)
    b1 = rng.normal_array(hidden) * 0.5
    W2 = rng.normal_array(3 * hidden).reshape(3, hidden) / math.sqrt(hidden)
    b2 = np.zeros(3)
    return FuzzyHeadParams(W1, b1, W2, b2)


# --- analytic gradients ---


def _bce_dp(p: np.ndarray, y: np.ndarray, w1: float, w0: float) -> np.ndarray:
    """dL/dp of the clamped weighted BCE (zero where the clamp is active)."""
    inside = (p > BCE_EPS) & (p < 1.0 - BCE_EPS)
    pc = np.clip(p, BCE_EPS, 1.0 - BCE_EPS)
    grad = -w1 * y / pc + w0 * (1.0 - y) / (1.0 - pc)
    return np.where(inside, grad, 0.0)


def calibration_loss_and_grads(
    scores: np.ndarray,
    labels: np.ndarray,
    params: CalibrationParams,
    w1: float,
    w0: float,
) -> tuple[float, np.ndarray]:
    """Mean weighted BCE and gradient [d/dalpha, d/dbeta].

    Away from the clamp, dL/dz for z = alpha*s + beta reduces to
    w1*y*(p - 1) + w0*(1-y)*p.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    p = calibrate_probability(s, params)
    loss = float(np.mean(weighted_bce(p, y, w1, w0)))
    dz = _bce_dp(p, y, w1, w0) * p * (1.0 - p) / s.size
    return loss, np.array([float(np.sum(dz * s)), float(np.sum(dz))])


def fuzzy_loss_and_grads(
    scores: np.ndarray,
    labels: np.ndarray,
    params: FuzzyHeadParams,
    w1: float,
    w0: float,
) -> tuple[float, list[np.ndarray]]:
    """Mean weighted BCE on the fuzzy probability and grads for
    [W1, b1, W2, b2]."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    n = s.size
    pre = np.outer(s, params.W1) + params.b1  # (n, hidden)
    t = np.tanh(pre)
    logits = t @ params.W2.T + params.b2
    logits -= logits.max(axis=1, keepdims=True)
    e = np.exp(logits)
    u = e / e.sum(axis=1, keepdims=True)  # (n, 3)
    p = u[:, 2] + 0.5 * u[:, 1]

    loss = float(np.mean(weighted_bce(p, y, w1, w0)))
    dp = _bce_dp(p, y, w1, w0) / n  # (n,)
    du = dp[:, None] * np.array([0.0, 0.5, 1.0])  # (n, 3)
    # softmax backward: da_i = u_i * (du_i - sum_j du_j u_j)
    da = u * (du - np.sum(du * u, axis=1, keepdims=True))  # (n, 3)
    dW2 = da.T @ t
    db2 = da.sum(axis=0)
    dt = da @ params.W2  # (n, hidden)
    dpre = dt * (1.0 - t * t)
    dW1 = dpre.T @ s
    db1 = dpre.sum(axis=0)
    return loss, [dW1, db1, dW2, db2]


def train_classifier(
    pairs,
    scores,
    config: ClassifyTrainConfig,
) -> tuple[CalibrationParams, FuzzyHeadParams, ClassifierTrainingLog]:
    """Jointly train both heads on frozen scores.

    `scores` aligns elementwise with `pairs`. Deterministic given the
    seed: the fuzzy init stream is drawn before the shuffle stream, and
    mini-batches follow the shuffled order with the final short batch
    kept. Raises on an empty or single-class training set.
    """
    config.validate()
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray([p.label for p in pairs], dtype=np.float64)
    if s.size != y.size:
        raise ValueError("pairs and scores lengths differ")
    if s.size == 0:
        raise EmptyTrainSetError("no training pairs")
    if np.all(y == y[0]):
        raise AllOneClassError(f"all labels equal {int(y[0])}")
    w1, w0 = config.weights()

    root = Pcg32(config.seed)
    init_rng = root.spawn()
    shuffle_rng = root.spawn()

    calib = CalibrationParams(alpha=1.0, beta=0.0)
    fuzzy = init_fuzzy_params(config.hidden, init_rng)

    calib_vec = np.array([calib.alpha, calib.beta])
    param_list = [calib_vec, fuzzy.W1, fuzzy.b1, fuzzy.W2, fuzzy.b2]
    optimizer = AdamW(
        [p.shape for p in param_list], config.learning_rate, config.weight_decay
    )

    log = ClassifierTrainingLog()
    n = s.size
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(n)
        calib_loss_total = 0.0
        fuzzy_loss_total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            sb, yb = s[idx], y[idx]
            calib.alpha, calib.beta = float(calib_vec[0]), float(calib_vec[1])
            c_loss, c_grad = calibration_loss_and_grads(sb, yb, calib, w1, w0)
            f_loss, f_grads = fuzzy_loss_and_grads(sb, yb, fuzzy, w1, w0)
            optimizer.step(param_list, [c_grad] + f_grads)
            calib_loss_total += c_loss * len(idx)
            fuzzy_loss_total += f_loss * len(idx)
        log.epochs.append(
            {
                "epoch": epoch,
                "calibration_loss": calib_loss_total / n,
                "fuzzy_loss": fuzzy_loss_total / n,
            }
        )
    calib.alpha, calib.beta = float(calib_vec[0]), float(calib_vec[1])
    return calib, fuzzy, log


# --- checkpoint I/O ---


def _b64(arr: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(arr, dtype="<f8").tobytes()).decode("ascii")


def _unb64(text: str, shape: tuple[int, ...]) -> np.ndarray:
    arr = np.frombuffer(base64.b64decode(text), dtype="<f8").astype(np.float64)
    return arr.reshape(shape)


def write_heads(
    calib: CalibrationParams,
    fuzzy: FuzzyHeadParams,
    path: str | Path,
    *,
    config_digest: str,
    seed: int,
) -> None:
    """Head checkpoint: JSON with the two scalars and base64-encoded
    little-endian float64 arrays, plus the producing config digest."""
    payload = {
        "alpha": calib.alpha,
        "beta": calib.beta,
        "hidden": fuzzy.hidden,
        "W1": _b64(fuzzy.W1),
        "b1": _b64(fuzzy.b1),
        "W2": _b64(fuzzy.W2),
        "b2": _b64(fuzzy.b2),
        "config_digest": config_digest,
        "seed": seed,
    }
    from .canonical import canonical_json

    Path(path).write_text(canonical_json(payload) + "\n", encoding="utf-8")


def read_heads(path: str | Path) -> tuple[CalibrationParams, FuzzyHeadParams, dict]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    hidden = int(payload["hidden"])
    calib = CalibrationParams(alpha=float(payload["alpha"]), beta=float(payload["beta"]))
    fuzzy = FuzzyHeadParams(
        W1=_unb64(payload["W1"], (hidden,)),
        b1=_unb64(payload["b1"], (hidden,)),
        W2=_unb64(payload["W2"], (3, hidden)),
        b2=_unb64(payload["b2"], (3,)),
    )
    return calib, fuzzy, payload
