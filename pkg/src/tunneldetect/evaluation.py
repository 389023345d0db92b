"""Thresholded classification and evaluation reporting.

A name is declared Tunneling when its probability is >= the decision
threshold (ties resolve toward detection). Metrics are computed per
class treated as positive in turn: precision, recall/TPR, FPR and F1,
plus per-tool detection rates over the tunneling samples.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

from .datagen import LABEL_NORMAL, LABEL_TUNNELING, DomainSample
from .network import Hyperparams, ModelParams, forward, forward_batch
from .tokenizer import encode_batch, encode_domain

DEFAULT_THRESHOLD = 0.90


@dataclass(frozen=True)
class Prediction:
    """Model output for one name; `sample` carries ground truth when the
    input came from a labeled corpus."""

    name: str
    probability: float
    predicted: str
    sample: DomainSample | None = None


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    fpr: float
    f1: float
    support: int
    degenerate: bool = False  # some denominator was zero; affected metrics report 0


@dataclass(frozen=True)
class MetricsReport:
    threshold: float
    per_class: dict[str, ClassMetrics]
    per_tool: dict[str, float]
    total: int


def _verdict(probability: float, threshold: float) -> str:
    return LABEL_TUNNELING if probability >= threshold else LABEL_NORMAL


def classify(
    params: ModelParams,
    hp: Hyperparams,
    name: str,
    threshold: float = DEFAULT_THRESHOLD,
) -> Prediction:
    """Score a single domain name."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    p = forward(params, hp, encode_domain(name, hp.l))
    return Prediction(name, p, _verdict(p, threshold))


def predict_samples(
    params: ModelParams,
    hp: Hyperparams,
    samples: Sequence[DomainSample],
    threshold: float = DEFAULT_THRESHOLD,
) -> list[Prediction]:
    """Score a labeled corpus in one vectorized pass."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    if not samples:
        return []
    probs = forward_batch(params, hp, encode_batch([s.name for s in samples], hp.l))
    return [
        Prediction(s.name, float(p), _verdict(float(p), threshold), sample=s)
        for s, p in zip(samples, probs)
    ]


def predict_names(
    params: ModelParams,
    hp: Hyperparams,
    names: Sequence[str],
    threshold: float = DEFAULT_THRESHOLD,
) -> list[Prediction]:
    """Score unlabeled names in one vectorized pass."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    if not names:
        return []
    probs = forward_batch(params, hp, encode_batch(list(names), hp.l))
    return [Prediction(n, float(p), _verdict(float(p), threshold)) for n, p in zip(names, probs)]


def apply_threshold(predictions: Sequence[Prediction], threshold: float) -> list[Prediction]:
    """Re-derive verdicts from stored probabilities at a new threshold."""
    return [
        Prediction(p.name, p.probability, _verdict(p.probability, threshold), p.sample)
        for p in predictions
    ]


def f1_score(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall; 0 when both are 0."""
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def _require_labels(predictions: Sequence[Prediction]) -> list[str]:
    labels = []
    for p in predictions:
        if p.sample is None:
            raise ValueError(f"prediction for {p.name!r} has no ground-truth sample")
        labels.append(p.sample.label)
    return labels


def compute_metrics(predictions: Sequence[Prediction], threshold: float = DEFAULT_THRESHOLD) -> MetricsReport:
    """Per-class precision/recall/FPR/F1 with support, plus per-tool
    detection rates, all at the given threshold.

    Verdicts are re-derived from the stored probabilities, so one scored
    set can be re-evaluated across thresholds. Zero-denominator metrics
    report 0 and set the class's `degenerate` flag.
    """
    if not predictions:
        raise ValueError("compute_metrics requires at least one prediction")
    truths = _require_labels(predictions)
    rethresholded = apply_threshold(predictions, threshold)

    per_class: dict[str, ClassMetrics] = {}
    for positive in (LABEL_NORMAL, LABEL_TUNNELING):
        tp = fp = fn = tn = 0
        for p, truth in zip(rethresholded, truths):
            is_pos = truth == positive
            called_pos = p.predicted == positive
            if called_pos and is_pos:
                tp += 1
            elif called_pos:
                fp += 1
            elif is_pos:
                fn += 1
            else:
                tn += 1
        degenerate = False

        def ratio(num, den):
            nonlocal degenerate
            if den == 0:
                degenerate = True
                return 0.0
            return num / den

        precision = ratio(tp, tp + fp)
        recall = ratio(tp, tp + fn)
        fpr = ratio(fp, fp + tn)
        per_class[positive] = ClassMetrics(
            precision=precision,
            recall=recall,
            fpr=fpr,
            f1=f1_score(precision, recall),
            support=tp + fn,
            degenerate=degenerate,
        )

    return MetricsReport(
        threshold=threshold,
        per_class=per_class,
        per_tool=per_tool_breakdown(rethresholded),
        total=len(predictions),
    )


def per_tool_breakdown(predictions: Sequence[Prediction]) -> dict[str, float]:
    """Detection rate per tunneling tool: the fraction of each tool's
    samples whose verdict is Tunneling. Tools absent from the input are
    absent from the map."""
    hits: dict[str, int] = {}
    totals: dict[str, int] = {}
    for p in predictions:
        if p.sample is None or p.sample.label != LABEL_TUNNELING:
            continue
        tool = p.sample.tool
        totals[tool] = totals.get(tool, 0) + 1
        if p.predicted == LABEL_TUNNELING:
            hits[tool] = hits.get(tool, 0) + 1
    return {tool: hits.get(tool, 0) / n for tool, n in sorted(totals.items())}


def export_scatter(predictions: Iterable[Prediction], path) -> None:
    """CSV of per-name probabilities (`name,true_label,tool,probability`)
    for external plotting; rows in input order, 9-digit probabilities."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["name", "true_label", "tool", "probability"])
        for p in predictions:
            label = p.sample.label if p.sample is not None else ""
            tool = p.sample.tool if p.sample is not None else "none"
            writer.writerow([p.name, label, tool, f"{p.probability:.9f}"])


def report_to_dict(report: MetricsReport) -> dict:
    """JSON-friendly view of a metrics report."""
    return {
        "threshold": report.threshold,
        "total": report.total,
        "classes": {
            label: {
                "precision": m.precision,
                "recall": m.recall,
                "fpr": m.fpr,
                "f1": m.f1,
                "support": m.support,
                "degenerate": m.degenerate,
            }
            for label, m in report.per_class.items()
        },
        "tool_detection_rates": dict(report.per_tool),
    }


def format_report(report: MetricsReport) -> str:
    """Human-readable metrics table."""
    lines = [
        f"threshold: {report.threshold:.2f}   samples: {report.total}",
        f"{'class':<12} {'precision':>9} {'recall':>9} {'fpr':>9} {'f1':>9} {'support':>8}",
    ]
    for label, m in report.per_class.items():
        flag = " *" if m.degenerate else ""
        lines.append(
            f"{label:<12} {m.precision:>9.4f} {m.recall:>9.4f} {m.fpr:>9.4f} "
            f"{m.f1:>9.4f} {m.support:>8d}{flag}"
        )
    if any(m.degenerate for m in report.per_class.values()):
        lines.append("  * zero-denominator metric reported as 0")
    if report.per_tool:
        lines.append("tool detection rates:")
        for tool, rate in report.per_tool.items():
            lines.append(f"  {tool:<16} {rate:.4f}")
    return "\n".join(lines)
