import csv

import numpy as np
import pytest

from tunneldetect.datagen import LABEL_NORMAL, LABEL_TUNNELING, DomainSample
from tunneldetect.evaluation import (
    Prediction,
    apply_threshold,
    classify,
    compute_metrics,
    export_scatter,
    f1_score,
    per_tool_breakdown,
    predict_names,
    predict_samples,
)
from tunneldetect.network import ModelParams, init_params

from oracles import recount_metrics


def make_prediction(prob, truth, tool="none", name=None, threshold=0.5):
    label = LABEL_TUNNELING if truth == "t" else LABEL_NORMAL
    if tool == "none" and label == LABEL_TUNNELING:
        tool = "iodine"
    name = name or f"{truth}-{prob:.3f}.example.com"
    sample = DomainSample(name, label, tool if label == LABEL_TUNNELING else "none")
    predicted = LABEL_TUNNELING if prob >= threshold else LABEL_NORMAL
    return Prediction(name, prob, predicted, sample)


def random_prediction_set(rng, n=None):
    n = n or int(rng.integers(1, 40))
    return [
        make_prediction(float(rng.random()), rng.choice(["t", "n"]))
        for _ in range(n)
    ]


class TestClassify:
    def test_zero_weight_model_is_normal_at_high_threshold(self, tiny_hp, tiny_model):
        zero = ModelParams.zeros_like(tiny_model)
        pred = classify(zero, tiny_hp, "example.com", threshold=0.90)
        assert pred.probability == 0.5
        assert pred.predicted == LABEL_NORMAL

    def test_boundary_resolves_toward_detection(self, tiny_hp, tiny_model):
        zero = ModelParams.zeros_like(tiny_model)
        pred = classify(zero, tiny_hp, "example.com", threshold=0.5)
        assert pred.probability == 0.5
        assert pred.predicted == LABEL_TUNNELING  # p == threshold

    def test_invalid_threshold_rejected(self, tiny_hp, tiny_model):
        with pytest.raises(ValueError):
            classify(tiny_model, tiny_hp, "example.com", threshold=0.0)

    def test_predict_samples_matches_classify(self, tiny_hp, tiny_model):
        samples = [
            DomainSample("aaa.com", LABEL_NORMAL),
            DomainSample("deadbeef00.evil.example", LABEL_TUNNELING, "dnscat2"),
        ]
        preds = predict_samples(tiny_model, tiny_hp, samples, 0.9)
        for s, p in zip(samples, preds):
            single = classify(tiny_model, tiny_hp, s.name, 0.9)
            assert p.probability == single.probability
            assert p.predicted == single.predicted
            assert p.sample is s

    def test_predict_names_has_no_ground_truth(self, tiny_hp, tiny_model):
        preds = predict_names(tiny_model, tiny_hp, ["a.com", "b.org"], 0.9)
        assert all(p.sample is None for p in preds)


class TestApplyThreshold:
    def test_boundary_rule(self):
        preds = [make_prediction(p, "t") for p in (0.899, 0.90, 0.901)]
        at_90 = apply_threshold(preds, 0.90)
        assert [p.predicted for p in at_90] == [LABEL_NORMAL, LABEL_TUNNELING, LABEL_TUNNELING]

    def test_raising_threshold_shrinks_detected_set(self):
        rng = np.random.default_rng(0)
        preds = random_prediction_set(rng, 200)
        previous = None
        for t in np.arange(0.1, 0.95, 0.1):
            detected = {
                p.name for p in apply_threshold(preds, float(t)) if p.predicted == LABEL_TUNNELING
            }
            if previous is not None:
                assert detected <= previous
            previous = detected


class TestF1Score:
    def test_reference_precision_recall_pair(self):
        assert abs(f1_score(0.9342, 0.9948) - 0.9635) <= 0.0005

    def test_zero_on_empty(self):
        assert f1_score(0.0, 0.0) == 0.0

    def test_harmonic_mean(self):
        assert f1_score(0.5, 1.0) == pytest.approx(2 / 3)


class TestComputeMetrics:
    def test_hand_counted_confusion(self):
        # tunneling positive: TP=3, FP=1, FN=1, TN=5
        preds = (
            [make_prediction(0.9, "t") for _ in range(3)]
            + [make_prediction(0.9, "n")]
            + [make_prediction(0.1, "t")]
            + [make_prediction(0.1, "n") for _ in range(5)]
        )
        report = compute_metrics(preds, 0.5)
        m = report.per_class[LABEL_TUNNELING]
        assert m.precision == pytest.approx(0.75)
        assert m.recall == pytest.approx(0.75)
        assert m.fpr == pytest.approx(1 / 6)
        assert m.f1 == pytest.approx(0.75)
        assert m.support == 4
        assert report.total == 10

    def test_all_correct(self):
        preds = [make_prediction(0.99, "t") for _ in range(4)] + [
            make_prediction(0.01, "n") for _ in range(6)
        ]
        report = compute_metrics(preds, 0.5)
        for label in (LABEL_NORMAL, LABEL_TUNNELING):
            m = report.per_class[label]
            assert (m.precision, m.recall, m.f1, m.fpr) == (1.0, 1.0, 1.0, 0.0)
        assert report.per_class[LABEL_NORMAL].support == 6
        assert report.per_class[LABEL_TUNNELING].support == 4

    def test_reference_metrics_row_reproduced(self):
        # normal as positive: TP=1717, FN=9, FP=121, TN=1465 gives the
        # reference precision/recall pair; F1 must come out 0.9635
        preds = (
            [make_prediction(0.1, "n") for _ in range(1717)]
            + [make_prediction(0.9, "n") for _ in range(9)]
            + [make_prediction(0.1, "t") for _ in range(121)]
            + [make_prediction(0.9, "t") for _ in range(1465)]
        )
        report = compute_metrics(preds, 0.5)
        m = report.per_class[LABEL_NORMAL]
        assert m.precision == pytest.approx(0.9342, abs=5e-5)
        assert m.recall == pytest.approx(0.9948, abs=5e-5)
        assert abs(m.f1 - 0.9635) <= 0.0005
        assert m.support == 1726

    def test_matches_brute_force_recount(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            preds = random_prediction_set(rng)
            threshold = float(rng.uniform(0.05, 0.95))
            report = compute_metrics(preds, threshold)
            truths = [p.sample.label for p in preds]
            verdicts = [
                LABEL_TUNNELING if p.probability >= threshold else LABEL_NORMAL for p in preds
            ]
            for positive in (LABEL_NORMAL, LABEL_TUNNELING):
                want = recount_metrics(truths, verdicts, positive)
                m = report.per_class[positive]
                assert (m.precision, m.recall, m.fpr, m.f1, m.support) == want

    def test_fpr_complements_other_class_recall(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            preds = random_prediction_set(rng, 30)
            truths = {p.sample.label for p in preds}
            if truths != {LABEL_NORMAL, LABEL_TUNNELING}:
                continue
            report = compute_metrics(preds, 0.5)
            normal = report.per_class[LABEL_NORMAL]
            tunneling = report.per_class[LABEL_TUNNELING]
            assert normal.fpr == pytest.approx(1.0 - tunneling.recall)
            assert tunneling.fpr == pytest.approx(1.0 - normal.recall)

    def test_zero_denominator_flagged(self):
        preds = [make_prediction(0.1, "n") for _ in range(5)]  # nothing detected
        report = compute_metrics(preds, 0.9)
        m = report.per_class[LABEL_TUNNELING]
        assert m.precision == 0.0 and m.recall == 0.0
        assert m.degenerate

    def test_support_sums_to_total(self):
        rng = np.random.default_rng(3)
        preds = random_prediction_set(rng, 37)
        report = compute_metrics(preds, 0.4)
        assert sum(m.support for m in report.per_class.values()) == report.total == 37

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            compute_metrics([], 0.5)

    def test_unlabeled_rejected(self):
        with pytest.raises(ValueError, match="ground-truth"):
            compute_metrics([Prediction("x.com", 0.5, LABEL_NORMAL)], 0.5)


class TestPerToolBreakdown:
    def test_all_detected_tool_rate_one(self):
        preds = [make_prediction(0.95, "t", tool="dnscat2") for _ in range(5)]
        assert per_tool_breakdown(preds) == {"dnscat2": 1.0}

    def test_absent_tool_omitted(self):
        preds = [make_prediction(0.95, "t", tool="iodine"), make_prediction(0.1, "n")]
        rates = per_tool_breakdown(preds)
        assert "dnscat2" not in rates
        assert rates == {"iodine": 1.0}

    def test_partial_rates(self):
        preds = (
            [make_prediction(0.95, "t", tool="iodine") for _ in range(3)]
            + [make_prediction(0.05, "t", tool="iodine")]
            + [make_prediction(0.95, "t", tool="dnscat2")]
        )
        rates = per_tool_breakdown(preds)
        assert rates["iodine"] == pytest.approx(0.75)
        assert rates["dnscat2"] == 1.0

    def test_report_includes_rates_at_report_threshold(self):
        preds = [make_prediction(0.7, "t", tool="iodine") for _ in range(4)]
        report = compute_metrics(preds, 0.9)
        assert report.per_tool == {"iodine": 0.0}
        report = compute_metrics(preds, 0.5)
        assert report.per_tool == {"iodine": 1.0}


class TestExportScatter:
    def test_empty_input_writes_header_only(self, tmp_path):
        path = tmp_path / "scatter.csv"
        export_scatter([], path)
        assert path.read_text().strip() == "name,true_label,tool,probability"

    def test_rows_in_input_order_and_roundtrip(self, tmp_path):
        rng = np.random.default_rng(4)
        preds = random_prediction_set(rng, 25)
        path = tmp_path / "scatter.csv"
        export_scatter(preds, path)
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 25
        for row, pred in zip(rows, preds):
            assert row["name"] == pred.name
            assert row["true_label"] == pred.sample.label
            assert row["tool"] == pred.sample.tool
            assert float(row["probability"]) == pytest.approx(pred.probability, abs=5e-10)

    def test_unwritable_path_raises_oserror(self, tmp_path):
        with pytest.raises(OSError):
            export_scatter([], tmp_path / "missing" / "scatter.csv")
