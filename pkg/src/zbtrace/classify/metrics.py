"""Confusion-matrix based classification metrics."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..errors import ClassifierError

SUMMARY_METRICS = ("accuracy", "macro_precision", "macro_recall", "macro_f1",
                   "weighted_precision", "weighted_recall", "weighted_f1")


def _safe_div(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros_like(num, dtype=np.float64)
    np.divide(num, den, out=out, where=den > 0)
    return out


@dataclass
class EvalReport:
    classes: list[str]
    confusion: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    unseen_labels: list[str] = field(default_factory=list)
    fold_stats: Optional[dict[str, tuple[float, float]]] = None
    notes: dict = field(default_factory=dict)

    @property
    def confusion_normalized(self) -> np.ndarray:
        rows = self.confusion.sum(axis=1, keepdims=True).astype(np.float64)
        return _safe_div(self.confusion.astype(np.float64), np.broadcast_to(rows, self.confusion.shape))

    def summary(self) -> dict[str, float]:
        return {m: float(getattr(self, m)) for m in SUMMARY_METRICS}

    def to_dict(self) -> dict:
        d = {
            "classes": list(self.classes),
            "per_class": {
                c: {"precision": float(p), "recall": float(r), "f1": float(f), "support": int(s)}
                for c, p, r, f, s in zip(self.classes, self.precision, self.recall, self.f1, self.support)
            },
            **self.summary(),
            "confusion": self.confusion.tolist(),
            "confusion_normalized": self.confusion_normalized.tolist(),
            "unseen_labels": list(self.unseen_labels),
            "notes": self.notes,
        }
        if self.fold_stats is not None:
            d["folds"] = {m: {"mean": mu, "std": sd} for m, (mu, sd) in self.fold_stats.items()}
        return d

    def to_json(self, fp) -> None:
        json.dump(self.to_dict(), fp, indent=2, sort_keys=True)
        fp.write("\n")

    def confusion_csv(self, fp, normalized: bool = False) -> None:
        cm = self.confusion_normalized if normalized else self.confusion
        w = csv.writer(fp, lineterminator="\n")
        w.writerow(["true\\pred"] + list(self.classes))
        for c, row in zip(self.classes, cm):
            w.writerow([c] + [repr(float(v)) if normalized else int(v) for v in row])


def report_from_confusion(confusion: np.ndarray, classes: Sequence[str], unseen: Sequence[str] = ()) -> EvalReport:
    cm = np.asarray(confusion, dtype=np.int64)
    if cm.sum() == 0:
        raise ClassifierError("cannot evaluate an empty test set")
    tp = np.diag(cm).astype(np.float64)
    support = cm.sum(axis=1)
    predicted = cm.sum(axis=0)
    precision = _safe_div(tp, predicted.astype(np.float64))
    recall = _safe_div(tp, support.astype(np.float64))
    f1 = _safe_div(2 * precision * recall, precision + recall)
    w = support / support.sum()
    return EvalReport(
        classes=list(classes),
        confusion=cm,
        precision=precision,
        recall=recall,
        f1=f1,
        support=support,
        accuracy=float(tp.sum() / cm.sum()),
        macro_precision=float(precision.mean()),
        macro_recall=float(recall.mean()),
        macro_f1=float(f1.mean()),
        weighted_precision=float(np.dot(w, precision)),
        weighted_recall=float(np.dot(w, recall)),
        weighted_f1=float(np.dot(w, f1)),
        unseen_labels=list(unseen),
    )


def classification_report(y_true: Sequence, y_pred: Sequence, known: Optional[Sequence[str]] = None) -> EvalReport:
    """Metrics over the sorted union of true and predicted labels.

    Labels absent from ``known`` (the model's classes) are listed in
    ``unseen_labels``; they can never be predicted, so they count as errors.
    """
    y_true = np.asarray(y_true).astype(str)
    y_pred = np.asarray(y_pred).astype(str)
    if y_true.size == 0:
        raise ClassifierError("cannot evaluate an empty test set")
    classes = sorted(set(y_true.tolist()) | set(y_pred.tolist()))
    index = {c: i for i, c in enumerate(classes)}
    cm = np.zeros((len(classes), len(classes)), dtype=np.int64)
    np.add.at(cm, (np.fromiter((index[c] for c in y_true), int, y_true.size),
                   np.fromiter((index[c] for c in y_pred), int, y_pred.size)), 1)
    unseen = sorted(set(y_true.tolist()) - set(known)) if known is not None else []
    return report_from_confusion(cm, classes, unseen)


def fold_statistics(reports: Sequence[EvalReport]) -> dict[str, tuple[float, float]]:
    out = {}
    for m in SUMMARY_METRICS:
        vals = np.array([getattr(r, m) for r in reports])
        out[m] = (float(vals.mean()), float(vals.std()))
    return out
