from __future__ import annotations

import logging
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.data.normalize import canonical_pair
from src.embedding.matrix import EmbeddingMatrix
from src.model.heads import LinkHead, NodeClassHead, head_probabilities
from src.model.losses import LOG_FLOOR, loss_link_prediction, loss_node_classification
from src.model.recurrent import (
    COMBINERS,
    LSTMParams,
    NodeHistory,
    NumericalError,
    RNNParams,
    lstm_backward_batch,
    lstm_forward_batch,
    rnn_backward_batch,
    rnn_forward_batch,
    static_backward_batch,
    static_forward_batch,
)

logger = logging.getLogger(__name__)

TASKS = ("link", "nodeclass")
Example = Tuple[Any, int]


class TemporalModel:
    """Combiner + task head over trainable per-step embedding tables.

    The tables hold the aligned embeddings; fine-tuning them under the frozen
    rotations is equivalent to fine-tuning the raw snapshot embeddings.
    """

    def __init__(
        self,
        task: str,
        embeddings: Sequence[EmbeddingMatrix],
        num_classes: int = 2,
        combiner: str = "lstm",
        directed: bool = False,
        seed: int = 0,
    ) -> None:
        if task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}, got {task!r}")
        if combiner not in COMBINERS:
            raise ValueError(f"combiner must be one of {COMBINERS}, got {combiner!r}")
        if not embeddings:
            raise ValueError("model needs at least one embedding step")
        self.task = task
        self.combiner = combiner
        self.directed = directed
        self.num_classes = num_classes if task == "nodeclass" else 2
        self.dimension = embeddings[0].dimension
        self.step_nodes: List[List[str]] = [list(m.nodes) for m in embeddings]
        self.step_columns: List[Dict[str, int]] = [{n: c for c, n in enumerate(nodes)} for nodes in self.step_nodes]
        self.tables: List[np.ndarray] = [m.values.copy() for m in embeddings]

        rng = np.random.default_rng(seed)
        self.cell: Optional[LSTMParams | RNNParams] = None
        if combiner == "lstm":
            self.cell = LSTMParams.initialize(self.dimension, rng)
        elif combiner == "rnn":
            self.cell = RNNParams.initialize(self.dimension, rng)
        if task == "link":
            self.head: LinkHead | NodeClassHead = LinkHead.initialize(self.dimension, rng)
        else:
            self.head = NodeClassHead.initialize(self.dimension, self.num_classes, rng)

    @property
    def steps(self) -> int:
        return len(self.tables)

    def knows(self, node: str) -> bool:
        return any(node in columns for columns in self.step_columns)

    def parameters(self, include_embeddings: bool = True) -> Dict[str, np.ndarray]:
        params: Dict[str, np.ndarray] = {}
        if self.cell is not None:
            params.update({f"cell.{name}": value for name, value in self.cell.arrays().items()})
        params.update({f"head.{name}": value for name, value in self.head.arrays().items()})
        if include_embeddings:
            params.update({f"Q.{step}": table for step, table in enumerate(self.tables)})
        return params

    def history(self, node: str) -> NodeHistory:
        X, M = self.history_batch([node])
        return NodeHistory(X[0], M[0])

    def history_batch(self, nodes: Sequence[str]) -> Tuple[np.ndarray, np.ndarray]:
        X = np.zeros((len(nodes), self.steps, self.dimension))
        M = np.zeros((len(nodes), self.steps), dtype=bool)
        for step, (table, columns) in enumerate(zip(self.tables, self.step_columns)):
            rows = [(b, columns[node]) for b, node in enumerate(nodes) if node in columns]
            if rows:
                batch_idx, cols = zip(*rows)
                X[list(batch_idx), step] = table[:, list(cols)].T
                M[list(batch_idx), step] = True
        missing = [nodes[b] for b in np.flatnonzero(~M.any(axis=1))]
        if missing:
            raise KeyError(f"{len(missing)} nodes absent from every snapshot, e.g. {missing[:3]}")
        return X, M

    def _encode(self, X: np.ndarray, M: np.ndarray):
        if self.combiner == "lstm":
            return lstm_forward_batch(self.cell, X, M)
        if self.combiner == "rnn":
            return rnn_forward_batch(self.cell, X, M)
        return static_forward_batch(X, M)

    def _encode_backward(self, cache, dH: np.ndarray, shape) -> Tuple[Dict[str, np.ndarray], np.ndarray]:
        if self.combiner == "lstm":
            return lstm_backward_batch(self.cell, cache, dH, shape)
        if self.combiner == "rnn":
            return rnn_backward_batch(self.cell, cache, dH, shape)
        return {}, static_backward_batch(cache, dH, shape)

    def _batch_nodes(self, examples: Sequence[Example]) -> List[str]:
        if self.task == "nodeclass":
            return [node for node, _ in examples]
        pairs = [canonical_pair(u, v, self.directed) for (u, v), _ in examples]
        return [u for u, _ in pairs] + [v for _, v in pairs]

    def _features(self, H: np.ndarray, batch: int) -> np.ndarray:
        if self.task == "nodeclass":
            return H
        return np.concatenate([H[:batch], H[batch:]], axis=1)

    def encode_nodes(self, nodes: Sequence[str]) -> np.ndarray:
        X, M = self.history_batch(nodes)
        H, _ = self._encode(X, M)
        return H

    def probabilities(self, examples: Sequence[Example]) -> np.ndarray:
        """Per-example class probabilities, shape (B, L); for links L = 2."""
        if not examples:
            return np.zeros((0, self.num_classes))
        X, M = self.history_batch(self._batch_nodes(examples))
        H, _ = self._encode(X, M)
        return head_probabilities(self.head, self._features(H, len(examples)))

    def predict_pair(self, u: str, v: str) -> float:
        return float(self.probabilities([((u, v), 1)])[0, 1])

    def scores(self, examples: Sequence[Example]) -> np.ndarray:
        probs = self.probabilities(examples)
        return probs[:, 1] if self.task == "link" else probs

    def loss(self, examples: Sequence[Example]) -> float:
        probs = self.probabilities(examples)
        labels = [label for _, label in examples]
        if self.task == "link":
            return loss_link_prediction(probs[:, 1], labels)
        return loss_node_classification(probs, labels)

    def loss_and_gradients(
        self, examples: Sequence[Example], include_embeddings: bool = True
    ) -> Tuple[float, Dict[str, np.ndarray]]:
        """Mean batch loss and exact reverse-mode gradients for every trainable array."""
        batch = len(examples)
        if batch == 0:
            raise ValueError("empty batch")
        nodes = self._batch_nodes(examples)
        X, M = self.history_batch(nodes)
        H, cache = self._encode(X, M)
        features = self._features(H, batch)
        probs = head_probabilities(self.head, features)
        labels = np.array([label for _, label in examples], dtype=np.int64)
        if self.task == "link":
            loss = loss_link_prediction(probs[:, 1], labels)
        else:
            loss = loss_node_classification(probs, labels)

        picked = probs[np.arange(batch), labels]
        d_logits = probs.copy()
        d_logits[np.arange(batch), labels] -= 1.0
        # the log floor cuts the gradient of saturated examples
        d_logits[picked < LOG_FLOOR] = 0.0
        d_logits /= batch

        grads: Dict[str, np.ndarray] = {
            "head.W": d_logits.T @ features,
            "head.b": d_logits.sum(axis=0),
        }
        d_features = d_logits @ self.head.W
        dH = d_features if self.task == "nodeclass" else np.concatenate(
            [d_features[:, : self.dimension], d_features[:, self.dimension :]], axis=0
        )
        cell_grads, dX = self._encode_backward(cache, dH, X.shape)
        grads.update({f"cell.{name}": value for name, value in cell_grads.items()})

        if include_embeddings:
            for step, (table, columns) in enumerate(zip(self.tables, self.step_columns)):
                grad = np.zeros_like(table)
                rows = np.flatnonzero(M[:, step])
                if rows.size:
                    cols = [columns[nodes[b]] for b in rows]
                    np.add.at(grad.T, cols, dX[rows, step])
                grads[f"Q.{step}"] = grad

        for name, value in grads.items():
            if not np.all(np.isfinite(value)):
                raise NumericalError(f"non-finite gradient for {name}")
        return loss, grads

    def embeddings(self) -> List[EmbeddingMatrix]:
        node_index: Dict[str, int] = {}
        for nodes in self.step_nodes:
            for node in nodes:
                node_index.setdefault(node, len(node_index))
        return [
            EmbeddingMatrix(table.copy(), list(nodes), node_index, step)
            for step, (table, nodes) in enumerate(zip(self.tables, self.step_nodes))
        ]
