"""Classification metrics built from a confusion matrix.

Conventions: per-class F1 with a zero denominator is 0; weighted F1 weights
by gold support; macro F1 averages over every label, including those
without support. Micro F1 can drop gold-neutral examples first; a neutral
prediction on a remaining example is still an error (a false negative for
its gold class).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .dialogue import LabelSet
from .errors import DataError


@dataclass(frozen=True)
class EvalResult:
    weighted_f1: float
    micro_f1: float
    macro_f1: float
    accuracy: float
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    confusion: np.ndarray  # rows gold, columns predicted

    def as_dict(self, labels: Optional[LabelSet] = None) -> dict:
        names = list(labels.names) if labels is not None else [str(i) for i in range(len(self.f1))]
        return {
            "weighted_f1": self.weighted_f1,
            "micro_f1": self.micro_f1,
            "macro_f1": self.macro_f1,
            "accuracy": self.accuracy,
            "per_class": {
                n: {"precision": float(p), "recall": float(r), "f1": float(f), "support": int(s)}
                for n, p, r, f, s in zip(names, self.precision, self.recall, self.f1, self.support)
            },
            "confusion": self.confusion.tolist(),
        }


def _check(preds, golds, n_labels):
    p = np.asarray(preds, dtype=np.int64)
    g = np.asarray(golds, dtype=np.int64)
    if p.shape != g.shape:
        raise ValueError("preds and golds differ in length")
    if p.size == 0:
        raise DataError("empty evaluation set")
    if p.min() < 0 or g.min() < 0 or p.max() >= n_labels or g.max() >= n_labels:
        raise ValueError("label index out of range")
    return p, g


def confusion_matrix(preds, golds, n_labels: int) -> np.ndarray:
    p, g = _check(preds, golds, n_labels)
    cm = np.zeros((n_labels, n_labels), dtype=np.int64)
    np.add.at(cm, (g, p), 1)
    return cm


def _safe_div(num, den):
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0)


def per_class(cm: np.ndarray):
    tp = np.diag(cm).astype(np.float64)
    predicted = cm.sum(axis=0)
    support = cm.sum(axis=1)
    precision = _safe_div(tp, predicted)
    recall = _safe_div(tp, support)
    f1 = _safe_div(2 * tp, predicted + support)
    return precision, recall, f1, support


def _exact_f1(cm: np.ndarray) -> list:
    # summaries are formed in rational arithmetic so each is rounded once
    out = []
    for c in range(len(cm)):
        tp = int(cm[c, c])
        den = int(cm[:, c].sum()) + int(cm[c].sum())
        out.append(Fraction(2 * tp, den) if den else Fraction(0))
    return out


def _weighted(cm: np.ndarray) -> float:
    support = cm.sum(axis=1)
    total = sum(f * int(s) for f, s in zip(_exact_f1(cm), support))
    return float(total / int(support.sum()))


def _macro(cm: np.ndarray) -> float:
    return float(sum(_exact_f1(cm)) / len(cm))


def weighted_f1(preds, golds, labels: LabelSet) -> float:
    return _weighted(confusion_matrix(preds, golds, len(labels)))


def macro_f1(preds, golds, labels: LabelSet) -> float:
    return _macro(confusion_matrix(preds, golds, len(labels)))


def micro_f1(preds, golds, labels: LabelSet, exclude_neutral: bool = False) -> float:
    p, g = _check(preds, golds, len(labels))
    if not exclude_neutral:
        return float(np.mean(p == g))
    if labels.neutral_index is None:
        raise DataError("neutral exclusion requested but the label set has no neutral label")
    keep = g != labels.neutral_index
    if not keep.any():
        raise DataError("empty evaluation set after removing gold-neutral examples")
    p, g = p[keep], g[keep]
    tp = int(np.sum(p == g))
    fn = int(np.sum(p != g))
    fp = int(np.sum((p != g) & (p != labels.neutral_index)))
    return 2 * tp / (2 * tp + fp + fn)


def evaluate_predictions(preds, golds, labels: LabelSet) -> EvalResult:
    cm = confusion_matrix(preds, golds, len(labels))
    precision, recall, f1, support = per_class(cm)
    total = support.sum()
    accuracy = float(np.trace(cm) / total)
    exclude = labels.neutral_index is not None and bool(np.any(np.asarray(golds) != labels.neutral_index))
    return EvalResult(
        weighted_f1=_weighted(cm),
        micro_f1=micro_f1(preds, golds, labels, exclude_neutral=exclude),
        macro_f1=_macro(cm),
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        f1=f1,
        support=support,
        confusion=cm,
    )


def metric_value(name: str, preds: Sequence[int], golds: Sequence[int], labels: LabelSet) -> float:
    if name == "weighted_f1":
        return weighted_f1(preds, golds, labels)
    if name == "micro_f1":
        return micro_f1(preds, golds, labels, exclude_neutral=labels.neutral_index is not None)
    if name == "macro_f1":
        return macro_f1(preds, golds, labels)
    if name == "accuracy":
        return float(np.mean(np.asarray(preds) == np.asarray(golds)))
    raise ValueError(f"unknown metric {name!r}")
