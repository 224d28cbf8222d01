"""Classification metrics: accuracy, per-class precision/recall/F1, macro-F1."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["ClassScores", "MetricsReport", "accuracy", "per_class_scores", "macro_f1"]


@dataclass(frozen=True)
class ClassScores:
    label: int
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    macro_f1: float
    per_class: tuple[ClassScores, ...]

    @classmethod
    def from_predictions(
        cls,
        pred: np.ndarray,
        truth: np.ndarray,
        idx: np.ndarray,
        n_classes: int | None = None,
    ) -> "MetricsReport":
        scores = per_class_scores(pred, truth, idx, n_classes)
        macro = float(np.mean([s.f1 for s in scores]))
        return cls(accuracy=accuracy(pred, truth, idx), macro_f1=macro, per_class=tuple(scores))

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "per_class": [
                {
                    "label": s.label,
                    "precision": s.precision,
                    "recall": s.recall,
                    "f1": s.f1,
                    "support": s.support,
                }
                for s in self.per_class
            ],
        }


def _restrict(pred: np.ndarray, truth: np.ndarray, idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    idx = np.asarray(idx)
    if idx.size == 0:
        raise ValueError("empty index set")
    return np.asarray(pred)[idx], np.asarray(truth)[idx]


def accuracy(pred: np.ndarray, truth: np.ndarray, idx: np.ndarray) -> float:
    """Fraction of correct predictions over the given indices."""
    p, t = _restrict(pred, truth, idx)
    return float(np.mean(p == t))


def per_class_scores(
    pred: np.ndarray,
    truth: np.ndarray,
    idx: np.ndarray,
    n_classes: int | None = None,
) -> list[ClassScores]:
    """Precision/recall/F1 per class over the given indices.

    A quantity with zero denominator is scored 0, so a class absent from
    both predictions and truth contributes F1 = 0.
    """
    p, t = _restrict(pred, truth, idx)
    if n_classes is None:
        n_classes = int(max(p.max(), t.max())) + 1
    out = []
    for c in range(n_classes):
        tp = int(np.sum((p == c) & (t == c)))
        fp = int(np.sum((p == c) & (t != c)))
        fn = int(np.sum((p != c) & (t == c)))
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        out.append(ClassScores(c, precision, recall, f1, support=tp + fn))
    return out


def macro_f1(
    pred: np.ndarray,
    truth: np.ndarray,
    idx: np.ndarray,
    n_classes: int | None = None,
) -> float:
    """Unweighted mean of per-class F1 scores."""
    return float(np.mean([s.f1 for s in per_class_scores(pred, truth, idx, n_classes)]))
