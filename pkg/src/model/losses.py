from __future__ import annotations

from typing import Sequence

import numpy as np

LOG_FLOOR = 1e-15


def loss_node_classification(probabilities: np.ndarray, classes: Sequence[int]) -> float:
    """Mean categorical cross-entropy -log p(class) over the batch."""
    probabilities = np.atleast_2d(np.asarray(probabilities, dtype=np.float64))
    classes = np.asarray(classes, dtype=np.int64)
    picked = probabilities[np.arange(classes.size), classes]
    return float(-np.mean(np.log(np.maximum(picked, LOG_FLOOR))))


def loss_link_prediction(probabilities: Sequence[float], labels: Sequence[int]) -> float:
    """Mean binary cross-entropy of positive-class probabilities against 0/1 labels."""
    p = np.asarray(probabilities, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if np.any((y != 0) & (y != 1)):
        raise ValueError("link labels must be 0 or 1")
    terms = y * np.log(np.maximum(p, LOG_FLOOR)) + (1.0 - y) * np.log(np.maximum(1.0 - p, LOG_FLOOR))
    return float(-np.mean(terms))
