"""Macro-averaged classification metrics over style predictions.

Per-style counts are one-vs-rest; precision and recall are averaged
uniformly over classes, and F1 is the harmonic mean of those two macro
values. A class whose denominator is empty contributes zero rather than
being skipped, so degenerate predictors stay comparable.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class ConfusionCounts:
    """One-vs-rest tallies per style; arrays are indexed by k - 1."""

    tp: np.ndarray = field(repr=False)
    fp: np.ndarray = field(repr=False)
    fn: np.ndarray = field(repr=False)
    tn: np.ndarray = field(repr=False)
    total: int = 0

    @property
    def k(self) -> int:
        return len(self.tp)


@dataclass(frozen=True)
class MetricsReport:
    k: int
    total: int
    overall_accuracy: float
    macro_precision: float
    macro_recall: float
    f1: float
    per_style_accuracy: tuple[float, ...]
    per_style_precision: tuple[float, ...]
    per_style_recall: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "total": self.total,
            "accuracy": self.overall_accuracy,
            "precision": self.macro_precision,
            "recall": self.macro_recall,
            "f1": self.f1,
            "per_style": {
                str(i + 1): {
                    "accuracy": self.per_style_accuracy[i],
                    "precision": self.per_style_precision[i],
                    "recall": self.per_style_recall[i],
                }
                for i in range(self.k)
            },
        }

    def to_table(self) -> str:
        """Four-row aligned table, values rounded to 3 decimals."""
        rows = [
            ("Accuracy", self.overall_accuracy),
            ("Precision", self.macro_precision),
            ("Recall", self.macro_recall),
            ("F1", self.f1),
        ]
        width = max(len(name) for name, _ in rows)
        return "\n".join(f"{name:<{width}}  {value:.3f}" for name, value in rows)


def confusion_counts(truth, pred, k: int) -> ConfusionCounts:
    """Tally one-vs-rest TP/FP/FN/TN for styles 1..k."""
    t = np.asarray(truth, dtype=np.int64)
    p = np.asarray(pred, dtype=np.int64)
    if t.shape != p.shape or t.ndim != 1 or len(t) == 0:
        raise ValueError("truth and pred must be equal-length non-empty sequences")
    if ((t < 1) | (t > k)).any() or ((p < 1) | (p > k)).any():
        raise ValueError(f"labels must lie in [1, {k}]")

    tp = np.zeros(k, dtype=np.int64)
    fp = np.zeros(k, dtype=np.int64)
    fn = np.zeros(k, dtype=np.int64)
    for style in range(1, k + 1):
        tp[style - 1] = int(((t == style) & (p == style)).sum())
        fp[style - 1] = int(((t != style) & (p == style)).sum())
        fn[style - 1] = int(((t == style) & (p != style)).sum())
    total = len(t)
    tn = total - tp - fp - fn
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn, total=total)


def accuracy_per_style(counts: ConfusionCounts, k: int) -> float:
    """(TP + TN) / total for style k (1-based)."""
    i = k - 1
    return float((counts.tp[i] + counts.tn[i]) / counts.total)


def overall_accuracy(counts: ConfusionCounts) -> float:
    """Fraction of correctly classified samples."""
    return float(counts.tp.sum() / counts.total)


def _safe_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros(len(num), dtype=np.float64)
    nz = den > 0
    out[nz] = num[nz] / den[nz]
    return out


def per_style_precision(counts: ConfusionCounts) -> np.ndarray:
    return _safe_ratio(counts.tp.astype(np.float64), (counts.tp + counts.fp).astype(np.float64))


def per_style_recall(counts: ConfusionCounts) -> np.ndarray:
    return _safe_ratio(counts.tp.astype(np.float64), (counts.tp + counts.fn).astype(np.float64))


def macro_precision(counts: ConfusionCounts) -> float:
    return float(per_style_precision(counts).mean())


def macro_recall(counts: ConfusionCounts) -> float:
    return float(per_style_recall(counts).mean())


def f1_from_pr(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall; zero when both vanish."""
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def recall_from_precision_f1(precision: float, f1: float) -> float:
    """Invert the harmonic mean: r = f1 * p / (2p - f1).

    Defined only for 0 < f1 < 2p; anything else has no consistent recall.
    """
    if f1 <= 0.0 or f1 >= 2.0 * precision:
        raise ValueError("inconsistent precision/F1 pair")
    return f1 * precision / (2.0 * precision - f1)


def metrics_report(truth, pred, k: int) -> MetricsReport:
    """Full report; F1 is computed from the macro precision and recall."""
    counts = confusion_counts(truth, pred, k)
    precision = macro_precision(counts)
    recall = macro_recall(counts)
    return MetricsReport(
        k=k,
        total=counts.total,
        overall_accuracy=overall_accuracy(counts),
        macro_precision=precision,
        macro_recall=recall,
        f1=f1_from_pr(precision, recall),
        per_style_accuracy=tuple(accuracy_per_style(counts, i + 1) for i in range(k)),
        per_style_precision=tuple(per_style_precision(counts).tolist()),
        per_style_recall=tuple(per_style_recall(counts).tolist()),
    )


def read_predictions_csv(path) -> dict[str, int]:
    """Parse a predictions file: header fragment_id,predicted_k[,p_1..p_K].

    Probability columns, when present, are ignored.
    """
    predictions: dict[str, int] = {}
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "fragment_id" not in reader.fieldnames \
                or "predicted_k" not in reader.fieldnames:
            raise ValueError("predictions CSV must have fragment_id,predicted_k header")
        for row in reader:
            fid = row["fragment_id"].strip()
            if fid in predictions:
                raise ValueError(f"duplicate prediction for {fid}")
            predictions[fid] = int(row["predicted_k"])
    return predictions


def write_report_json(report: MetricsReport, path) -> None:
    Path(path).write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
