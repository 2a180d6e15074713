import json

import numpy as np
import pytest

from lesionclf.errors import (
    DegenerateLabels,
    EmptyInput,
    IdMismatch,
    LabelOutOfDomain,
    LengthMismatch,
)
from lesionclf.evaluate import (
    EvalReport,
    accuracy,
    confusion_matrix,
    evaluation_report,
    predict_probs,
    report_to_dict,
    roc_auc,
    write_report,
    write_roc_csv,
)
from lesionclf.mlp import MlpParams, init_params

import oracles


def _random_instance(rng, n_max=50, tie_grid=None):
    n = int(rng.integers(2, n_max + 1))
    while True:
        labels = rng.integers(0, 2, size=n)
        if 0 < labels.sum() < n:
            break
    if tie_grid:
        scores = rng.integers(0, tie_grid, size=n) / tie_grid
    else:
        scores = rng.random(n)
    return scores.astype(np.float64), labels


class TestAccuracy:
    def test_perfect(self):
        assert accuracy([0.9, 0.1], [1, 0]) == 1.0

    def test_tie_predicts_class_zero(self):
        assert accuracy([0.5, 0.5], [0, 0]) == 1.0
        assert accuracy([0.5, 0.5], [1, 1]) == 0.0

    def test_half_right(self):
        assert accuracy([0.6, 0.6, 0.4, 0.4], [1, 0, 1, 0]) == 0.5

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            accuracy([0.5], [0, 1])

    def test_empty(self):
        with pytest.raises(EmptyInput):
            accuracy([], [])

    def test_bad_labels(self):
        with pytest.raises(LabelOutOfDomain):
            accuracy([0.5, 0.5], [0, 2])
        with pytest.raises(LabelOutOfDomain):
            accuracy([0.5, 0.5], [0.0, 1.0])


class TestConfusion:
    def test_counts(self):
        cm = confusion_matrix([0.9, 0.8, 0.3, 0.6, 0.2], [1, 0, 1, 1, 0])
        assert (cm.tp, cm.fp, cm.tn, cm.fn) == (2, 1, 1, 1)
        assert cm.total == 5

    def test_consistent_with_accuracy(self, rng):
        for _ in range(25):
            scores, labels = _random_instance(rng)
            cm = confusion_matrix(scores, labels)
            assert cm.total == len(labels)
            assert accuracy(scores, labels) == pytest.approx((cm.tp + cm.tn) / cm.total, abs=1e-12)


class TestRocAuc:
    def test_perfect_separation(self):
        curve, auc = roc_auc([0.9, 0.1], [1, 0])
        assert auc == 1.0
        assert curve.points[0] == (0.0, 0.0)
        assert curve.points[-1] == (1.0, 1.0)

    def test_pure_ties(self):
        _, auc = roc_auc([0.7, 0.7, 0.7, 0.7], [1, 0, 1, 0])
        assert auc == 0.5

    def test_three_of_four_pairs(self):
        # oracle: pairs (0.8,0.6) (0.8,0.2) (0.4,0.2) ordered, (0.4,0.6) not
        _, auc = roc_auc([0.8, 0.4, 0.6, 0.2], [1, 1, 0, 0])
        assert auc == 0.75
        assert oracles.pairwise_auc([0.8, 0.4, 0.6, 0.2], [1, 1, 0, 0]) == 0.75

    def test_degenerate_labels(self):
        with pytest.raises(DegenerateLabels):
            roc_auc([0.1, 0.2], [1, 1])
        with pytest.raises(DegenerateLabels):
            roc_auc([0.1, 0.2], [0, 0])

    def test_matches_pairwise_oracle(self, rng):
        for k in range(250):
            scores, labels = _random_instance(rng, tie_grid=7 if k % 2 else None)
            _, auc = roc_auc(scores, labels)
            assert abs(auc - oracles.pairwise_auc(scores, labels)) <= 1e-12

    def test_monotone_transform_invariance(self, rng):
        for _ in range(50):
            scores, labels = _random_instance(rng, tie_grid=9)
            _, auc = roc_auc(scores, labels)
            _, cubed = roc_auc(scores**3, labels)
            _, affine = roc_auc(2.0 * scores + 1.0, labels)
            assert cubed == auc and affine == auc

    def test_label_flip_symmetry(self, rng):
        for _ in range(50):
            scores, labels = _random_instance(rng, tie_grid=5)
            _, auc = roc_auc(scores, labels)
            _, flipped = roc_auc(scores, 1 - labels)
            assert abs((1.0 - auc) - flipped) <= 1e-12

    def test_curve_monotone_invariants(self, rng):
        for _ in range(25):
            scores, labels = _random_instance(rng, tie_grid=4)
            curve, _ = roc_auc(scores, labels)
            points = curve.points
            assert points[0] == (0.0, 0.0) and points[-1] == (1.0, 1.0)
            fprs = [p[0] for p in points]
            tprs = [p[1] for p in points]
            assert fprs == sorted(fprs) and tprs == sorted(tprs)


class TestPredictProbs:
    def _zero_params(self):
        return MlpParams(
            w1=np.zeros((4, 3), dtype=np.float32),
            b1=np.zeros(4, dtype=np.float32),
            w2=np.zeros((2, 4), dtype=np.float32),
            b2=np.zeros(2, dtype=np.float32),
        )

    def test_zero_weights_score_half(self, rng):
        probs = predict_probs(self._zero_params(), rng.standard_normal((6, 3)))
        np.testing.assert_array_equal(probs, np.full((6, 2), 0.5))

    def test_single_example_shape(self, rng):
        probs = predict_probs(self._zero_params(), rng.standard_normal(3))
        assert probs.shape == (1, 2)

    def test_batch_equals_one_at_a_time(self, rng):
        params = init_params(5)
        x = rng.standard_normal((17, 1000)).astype(np.float32)
        batched = predict_probs(params, x)
        for i in range(17):
            single = predict_probs(params, x[i])
            assert np.array_equal(single[0], batched[i])
        shuffled = predict_probs(params, x[::-1])
        assert np.array_equal(shuffled[::-1], batched)


class TestReport:
    def _report(self, rng):
        s1, y1 = _random_instance(rng)
        s2, y2 = _random_instance(rng)
        return evaluation_report((s1, y1), (s2, y2))

    def test_mean_auc_is_arithmetic_mean(self, rng):
        report = self._report(rng)
        assert report.mean_auc == (report.tasks[0].auc + report.tasks[1].auc) / 2.0

    def test_mean_of_072_071(self):
        # synthetic tasks pinned to AUC 0.72 and 0.71: 10 positives and 10
        # negatives, with exactly 72 (71) of the 100 pairs correctly ordered
        def pinned(correct_pairs):
            pos = np.linspace(0.6, 0.9, 10)
            neg = np.zeros(10)
            scores = np.concatenate([pos, neg])
            labels = np.array([1] * 10 + [0] * 10)
            wrong = 100 - correct_pairs
            # move negatives above all positives until enough pairs invert
            for i in range(wrong // 10):
                scores[10 + i] = 1.0
            scores[10 + wrong // 10] = sorted(pos)[wrong % 10 - 1] + 1e-9 if wrong % 10 else 0.0
            return scores, labels

        s1, y1 = pinned(72)
        s2, y2 = pinned(71)
        _, auc1 = roc_auc(s1, y1)
        _, auc2 = roc_auc(s2, y2)
        assert auc1 == 0.72 and auc2 == 0.71
        report = evaluation_report((s1, y1), (s2, y2))
        assert report.mean_auc == pytest.approx(0.715, abs=1e-12)

    def test_identical_tasks(self, rng):
        scores, labels = _random_instance(rng)
        report = evaluation_report((scores, labels), (scores, labels))
        assert report.mean_auc == report.tasks[0].auc == report.tasks[1].auc

    def test_degenerate_task_carries_error(self, rng):
        scores, labels = _random_instance(rng)
        report = evaluation_report((scores, labels), ([0.1, 0.2], [1, 1]))
        assert report.tasks[0].error is None
        assert report.tasks[1].error is not None
        assert report.tasks[1].auc is None
        assert report.mean_auc is None
        entry = report_to_dict(report)["tasks"][1]
        assert "error" in entry and entry["auc"] is None

    def test_id_mismatch(self, rng):
        scores, labels = _random_instance(rng)
        with pytest.raises(IdMismatch):
            evaluation_report(
                (scores, labels),
                (scores, labels),
                task1_ids=["a", "b"],
                task2_ids=["a", "c"],
            )

    def test_report_json_and_roc_files(self, tmp_path, rng):
        report = self._report(rng)
        report_path = tmp_path / "report.json"
        write_report(report, report_path)
        payload = json.loads(report_path.read_text())
        assert {t["task"] for t in payload["tasks"]} == {"malignancy", "cell_origin"}
        for entry in payload["tasks"]:
            assert set(entry) >= {"task", "accuracy", "auc", "tp", "fp", "tn", "fn"}
            assert entry["tp"] + entry["fp"] + entry["tn"] + entry["fn"] > 0
        assert payload["mean_auc"] == report.mean_auc

        roc_path = tmp_path / "roc.csv"
        write_roc_csv(report.tasks[0].roc, roc_path)
        lines = roc_path.read_text().splitlines()
        assert lines[0] == "fpr,tpr"
        assert lines[1] == "0.0,0.0" and lines[-1] == "1.0,1.0"
