from __future__ import annotations

from dataclasses import dataclass
from typing import Dict

import numpy as np
from scipy.special import softmax

from src.model.recurrent import LSTMParams, NodeHistory, lstm_forward


@dataclass
class NodeClassHead:
    """FC + softmax over L classes on a node's temporal embedding."""

    W: np.ndarray
    b: np.ndarray

    @classmethod
    def initialize(cls, dimension: int, num_classes: int, rng: np.random.Generator) -> "NodeClassHead":
        bound = 1.0 / np.sqrt(dimension)
        return cls(W=rng.uniform(-bound, bound, (num_classes, dimension)), b=np.zeros(num_classes))

    @property
    def input_dim(self) -> int:
        return int(self.W.shape[1])

    def arrays(self) -> Dict[str, np.ndarray]:
        return {"W": self.W, "b": self.b}


@dataclass
class LinkHead:
    """FC producing two logits on the concatenation [f(u); f(v)]; softmax column 1 is the link probability."""

    W: np.ndarray
    b: np.ndarray

    @classmethod
    def initialize(cls, dimension: int, rng: np.random.Generator) -> "LinkHead":
        bound = 1.0 / np.sqrt(2 * dimension)
        return cls(W=rng.uniform(-bound, bound, (2, 2 * dimension)), b=np.zeros(2))

    @property
    def input_dim(self) -> int:
        return int(self.W.shape[1])

    def arrays(self) -> Dict[str, np.ndarray]:
        return {"W": self.W, "b": self.b}


def head_probabilities(head: NodeClassHead | LinkHead, features: np.ndarray) -> np.ndarray:
    return softmax(features @ head.W.T + head.b, axis=-1)


def predict_node_class(history: NodeHistory, params: LSTMParams, head: NodeClassHead) -> np.ndarray:
    return head_probabilities(head, lstm_forward(history, params))


def predict_link(first: NodeHistory, second: NodeHistory, params: LSTMParams, head: LinkHead) -> float:
    """Positive-class probability for the ordered pair (first, second)."""
    features = np.concatenate([lstm_forward(first, params), lstm_forward(second, params)])
    return float(head_probabilities(head, features)[1])
