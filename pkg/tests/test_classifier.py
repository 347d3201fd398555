from __future__ import annotations

import math

import numpy as np
import pytest

from clausetriage.classifier import (
    CalibrationParams,
    ClassifyTrainConfig,
    FuzzyHeadParams,
    calibrate_probability,
    calibration_loss_and_grads,
    fuzzy_forward,
    fuzzy_loss_and_grads,
    fuzzy_probabilities,
    fuzzy_probability,
    init_fuzzy_params,
    read_heads,
    train_classifier,
    weighted_bce,
    write_heads,
)
from clausetriage.data import LabeledPair
from clausetriage.errors import AllOneClassError, EmptyTrainSetError
from clausetriage.metrics import auc_score, binary_metrics
from clausetriage.rng import Pcg32

from oracles import relative_error


class TestCalibrate:
    def test_sigmoid_symmetry(self):
        assert calibrate_probability(0.0, CalibrationParams(1.0, 0.0)) == pytest.approx(0.5)

    def test_zero_alpha_constant(self):
        params = CalibrationParams(0.0, 0.7)
        values = [calibrate_probability(s, params) for s in (-1.0, 0.0, 0.5, 1.0)]
        assert all(v == values[0] for v in values)

    def test_hand_value(self):
        assert calibrate_probability(1.0, CalibrationParams(2.0, -1.0)) == pytest.approx(
            0.7310586, abs=1e-7
        )

    def test_monotone_for_positive_alpha(self):
        rng = Pcg32(1)
        params = CalibrationParams(3.0, -0.4)
        scores = sorted(rng.uniform() * 2 - 1 for _ in range(100))
        probs = [calibrate_probability(s, params) for s in scores]
        assert all(a <= b for a, b in zip(probs, probs[1:]))

    def test_order_preservation_property(self):
        # Thresholding probabilities equals thresholding scores for alpha > 0.
        rng = Pcg32(2)
        scores = np.array([rng.uniform() * 2 - 1 for _ in range(500)])
        params = CalibrationParams(2.5, 0.3)
        probs = calibrate_probability(scores, params)
        assert np.array_equal(np.argsort(scores, kind="stable"), np.argsort(probs, kind="stable"))

    def test_extreme_inputs_stay_in_unit_interval(self):
        params = CalibrationParams(50.0, 0.0)
        for s in (-1e6, -1.0, 0.0, 1.0, 1e6):
            p = calibrate_probability(s, params)
            assert 0.0 <= p <= 1.0


class TestWeightedBce:
    def test_unweighted_half(self):
        assert weighted_bce(0.5, 1, 1.0, 1.0) == pytest.approx(math.log(2), abs=1e-12)

    def test_weighted_scales(self):
        assert weighted_bce(0.5, 1, 200.0, 1.0) == pytest.approx(200 * math.log(2), rel=1e-12)

    def test_negative_limit(self):
        assert weighted_bce(1e-9, 0, 200.0, 1.0) == pytest.approx(0.0, abs=1e-6)

    def test_equals_standard_bce_when_unit_weights(self):
        rng = Pcg32(3)
        for _ in range(100):
            p = min(max(rng.uniform(), 1e-7), 1 - 1e-7)
            y = rng.bounded(2)
            standard = -(y * math.log(p) + (1 - y) * math.log(1 - p))
            assert weighted_bce(p, y, 1.0, 1.0) == pytest.approx(standard, rel=1e-9)

    def test_clamp_keeps_loss_finite(self):
        assert np.isfinite(weighted_bce(0.0, 1, 200.0, 1.0))
        assert np.isfinite(weighted_bce(1.0, 0, 1.0, 1.0))


class TestFuzzyHead:
    def test_zero_output_layer_uniform(self):
        params = FuzzyHeadParams(
            W1=np.ones(4), b1=np.zeros(4), W2=np.zeros((3, 4)), b2=np.zeros(3)
        )
        u = fuzzy_forward(0.7, params)
        assert np.allclose(u, [1 / 3, 1 / 3, 1 / 3])

    def test_sums_to_one(self):
        rng = Pcg32(4)
        params = init_fuzzy_params(16, rng)
        for s in (-1.0, -0.3, 0.0, 0.5, 1.0):
            u = fuzzy_forward(s, params)
            assert abs(float(np.sum(u)) - 1.0) <= 1e-9
            assert np.all(u >= 0)

    def test_deterministic_bits(self):
        params = init_fuzzy_params(8, Pcg32(5))
        assert np.array_equal(fuzzy_forward(0.3, params), fuzzy_forward(0.3, params))

    def test_b2_shift_invariance(self):
        rng = Pcg32(6)
        params = init_fuzzy_params(8, rng)
        shifted = FuzzyHeadParams(params.W1, params.b1, params.W2, params.b2 + 7.5)
        for s in (-0.5, 0.0, 0.9):
            assert np.allclose(fuzzy_forward(s, params), fuzzy_forward(s, shifted), atol=1e-12)

    def test_probability_reduction(self):
        assert fuzzy_probability(np.array([1.0, 0.0, 0.0])) == 0.0
        assert fuzzy_probability(np.array([0.0, 0.0, 1.0])) == 1.0
        assert fuzzy_probability(np.array([0.0, 1.0, 0.0])) == 0.5

    def test_batch_matches_scalar(self):
        params = init_fuzzy_params(8, Pcg32(7))
        scores = np.array([-0.9, -0.1, 0.4, 0.95])
        batch = fuzzy_probabilities(scores, params)
        for s, p in zip(scores, batch):
            assert fuzzy_probability(fuzzy_forward(float(s), params)) == pytest.approx(
                float(p), abs=1e-15
            )


class TestGradients:
    def test_calibration_matches_fd(self):
        rng = Pcg32(8)
        scores = np.array([rng.uniform() * 2 - 1 for _ in range(12)])
        labels = np.array([rng.bounded(2) for _ in range(12)], dtype=float)
        for w1, w0 in ((1.0, 1.0), (200.0, 1.0)):
            params = CalibrationParams(0.8, -0.2)
            _, grad = calibration_loss_and_grads(scores, labels, params, w1, w0)

            def f(vec):
                loss, _ = calibration_loss_and_grads(
                    scores, labels, CalibrationParams(vec[0], vec[1]), w1, w0
                )
                return loss

            x0 = np.array([params.alpha, params.beta])
            for idx in (0, 1):
                plus, minus = x0.copy(), x0.copy()
                plus[idx] += 1e-4
                minus[idx] -= 1e-4
                fd = (f(plus) - f(minus)) / 2e-4
                assert relative_error(grad[idx], fd) < 1e-4

    @pytest.mark.parametrize("seed", range(4))
    def test_fuzzy_matches_fd(self, seed):
        rng = Pcg32(100 + seed)
        scores = np.array([rng.uniform() * 2 - 1 for _ in range(10)])
        labels = np.array([rng.bounded(2) for _ in range(10)], dtype=float)
        params = init_fuzzy_params(6, rng)
        _, grads = fuzzy_loss_and_grads(scores, labels, params, 5.0, 1.0)
        flat_grads = np.concatenate([g.ravel() for g in grads])
        shapes = [(6,), (6,), (3, 6), (3,)]

        def unflatten(vec):
            arrays, offset = [], 0
            for shape in shapes:
                size = int(np.prod(shape))
                arrays.append(vec[offset : offset + size].reshape(shape).copy())
                offset += size
            return FuzzyHeadParams(*arrays)

        x0 = np.concatenate([params.W1, params.b1, params.W2.ravel(), params.b2])
        check_rng = Pcg32(seed)
        for _ in range(25):
            idx = check_rng.bounded(x0.size)
            plus, minus = x0.copy(), x0.copy()
            plus[idx] += 1e-4
            minus[idx] -= 1e-4
            fd = (
                fuzzy_loss_and_grads(scores, labels, unflatten(plus), 5.0, 1.0)[0]
                - fuzzy_loss_and_grads(scores, labels, unflatten(minus), 5.0, 1.0)[0]
            ) / 2e-4
            assert relative_error(flat_grads[idx], fd) < 1e-4


def _separable_data(n=400, seed=9):
    rng = Pcg32(seed)
    pairs, scores = [], []
    for i in range(n):
        y = rng.bounded(2)
        base = 0.55 if y else -0.55
        scores.append(base + 0.3 * (rng.uniform() - 0.5))
        pairs.append(LabeledPair(f"q{i}", f"c{i}", y))
    return pairs, np.array(scores)


class TestTrainClassifier:
    def test_same_seed_identical(self):
        pairs, scores = _separable_data()
        config = ClassifyTrainConfig(seed=42, learning_rate=0.05, epochs=2)
        c1, f1, log1 = train_classifier(pairs, scores, config)
        c2, f2, log2 = train_classifier(pairs, scores, config)
        assert (c1.alpha, c1.beta) == (c2.alpha, c2.beta)
        assert np.array_equal(f1.W1, f2.W1)
        assert np.array_equal(f1.W2, f2.W2)
        assert log1.epochs == log2.epochs

    def test_separable_reaches_high_auc(self):
        pairs, scores = _separable_data()
        labels = [p.label for p in pairs]
        config = ClassifyTrainConfig(seed=42, learning_rate=0.05, epochs=3)
        calib, fuzzy, _ = train_classifier(pairs, scores, config)
        auc_theta = auc_score(calibrate_probability(scores, calib), labels)
        auc_phi = auc_score(fuzzy_probabilities(scores, fuzzy), labels)
        assert auc_theta >= 0.99
        assert auc_phi >= 0.99

    def test_weighted_recall_dominates_unweighted(self):
        # 0.6%-positive scores with overlap: heavy positive weighting must
        # not lose recall at the 0.5 cut.
        rng = Pcg32(10)
        pairs, scores = [], []
        for i in range(8000):
            y = 1 if rng.uniform() < 0.006 else 0
            center = 0.35 if y else -0.15
            scores.append(center + 0.45 * (rng.uniform() - 0.5))
            pairs.append(LabeledPair(f"q{i}", f"c{i}", y))
        scores = np.array(scores)
        labels = [p.label for p in pairs]
        weighted_cfg = ClassifyTrainConfig(
            seed=1, pos_weight_mode="weighted", pos_weight=200.0, learning_rate=0.05, epochs=3
        )
        unweighted_cfg = ClassifyTrainConfig(
            seed=1, pos_weight_mode="unweighted", learning_rate=0.05, epochs=3
        )
        cw, fw, _ = train_classifier(pairs, scores, weighted_cfg)
        cu, fu, _ = train_classifier(pairs, scores, unweighted_cfg)
        recall_w = binary_metrics(calibrate_probability(scores, cw), labels).recall
        recall_u = binary_metrics(calibrate_probability(scores, cu), labels).recall
        assert recall_w >= recall_u

    def test_empty_rejected(self):
        with pytest.raises(EmptyTrainSetError):
            train_classifier([], np.array([]), ClassifyTrainConfig(seed=0))

    def test_single_class_rejected(self):
        pairs = [LabeledPair("q", f"c{i}", 1) for i in range(4)]
        with pytest.raises(AllOneClassError):
            train_classifier(pairs, np.array([0.1, 0.2, 0.3, 0.4]), ClassifyTrainConfig(seed=0))

    def test_unweighted_mode_is_unit_weights(self):
        config = ClassifyTrainConfig(seed=0, pos_weight_mode="unweighted", pos_weight=999.0)
        assert config.weights() == (1.0, 1.0)


class TestHeadCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        pairs, scores = _separable_data(n=60)
        config = ClassifyTrainConfig(seed=3, learning_rate=0.1, epochs=1, hidden=5)
        calib, fuzzy, _ = train_classifier(pairs, scores, config)
        path = tmp_path / "heads.json"
        write_heads(calib, fuzzy, path, config_digest="abc", seed=3)
        calib2, fuzzy2, payload = read_heads(path)
        assert calib2.alpha == calib.alpha and calib2.beta == calib.beta
        assert np.array_equal(fuzzy2.W1, fuzzy.W1)
        assert np.array_equal(fuzzy2.b1, fuzzy.b1)
        assert np.array_equal(fuzzy2.W2, fuzzy.W2)
        assert np.array_equal(fuzzy2.b2, fuzzy.b2)
        assert payload["config_digest"] == "abc" and payload["seed"] == 3
        # Re-writing the loaded heads is byte-identical.
        path2 = tmp_path / "heads2.json"
        write_heads(calib2, fuzzy2, path2, config_digest="abc", seed=3)
        assert path.read_bytes() == path2.read_bytes()
