from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Iterable, List, Sequence

import numpy as np
from sklearn.metrics import f1_score, roc_auc_score

logger = logging.getLogger(__name__)


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class ScoredExample:
    score: float
    label: int

    def __post_init__(self) -> None:
        if not np.isfinite(self.score):
            raise MetricError(f"score must be finite, got {self.score}")


def scored(scores: Iterable[float], labels: Iterable[int]) -> List[ScoredExample]:
    return [ScoredExample(float(s), int(y)) for s, y in zip(scores, labels)]


def auc(examples: Sequence[ScoredExample]) -> float:
    """Rank (Mann-Whitney) AUC; tied positive/negative scores count one half."""
    labels = np.array([ex.label for ex in examples])
    scores = np.array([ex.score for ex in examples], dtype=np.float64)
    if labels.size == 0 or np.all(labels == labels[0]):
        raise MetricError("AUC needs at least one positive and one negative example")
    if np.any((labels != 0) & (labels != 1)):
        raise MetricError("AUC labels must be 0 or 1")
    return float(roc_auc_score(labels, scores))


def _check_predictions(predictions: Sequence[int], labels: Sequence[int]) -> None:
    if len(predictions) == 0:
        raise MetricError("F1 needs at least one prediction")
    if len(predictions) != len(labels):
        raise MetricError(f"{len(predictions)} predictions for {len(labels)} labels")


def micro_f1(predictions: Sequence[int], labels: Sequence[int], num_classes: int) -> float:
    _check_predictions(predictions, labels)
    return float(
        f1_score(labels, predictions, labels=list(range(num_classes)), average="micro", zero_division=0)
    )


def macro_f1(predictions: Sequence[int], labels: Sequence[int], num_classes: int) -> float:
    """Unweighted mean of per-class F1; classes never predicted nor present score 0."""
    _check_predictions(predictions, labels)
    return float(
        f1_score(labels, predictions, labels=list(range(num_classes)), average="macro", zero_division=0)
    )


def multiclass_auc(probabilities: np.ndarray, labels: Sequence[int], num_classes: int) -> float:
    """Macro one-vs-rest AUC; classes without both positives and negatives are skipped."""
    probabilities = np.asarray(probabilities, dtype=np.float64)
    labels = np.asarray(labels)
    per_class = []
    for cls in range(num_classes):
        positives = labels == cls
        if not positives.any() or positives.all():
            warnings.warn(f"class {cls} has no positive/negative split; skipped in AUC", RuntimeWarning, stacklevel=2)
            continue
        per_class.append(roc_auc_score(positives.astype(int), probabilities[:, cls]))
    if not per_class:
        raise MetricError("no class could be scored for multiclass AUC")
    return float(np.mean(per_class))
