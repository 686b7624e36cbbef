"""Recurrent combiners over aligned embedding histories.

All combiners work on a batch: X is (B, T, d) and the boolean mask M is
(B, T). A masked step is skipped, i.e. the state is carried through it
unchanged, and its input row is never read.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

from src.embedding.matrix import EmbeddingMatrix

GATES = ("i", "f", "o", "g")
COMBINERS = ("lstm", "rnn", "static")


class NumericalError(ArithmeticError):
    def __init__(self, message: str, step: Optional[int] = None) -> None:
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step


@dataclass
class NodeHistory:
    """T x d matrix of a node's aligned embeddings; rows where the node is absent are zero."""

    matrix: np.ndarray
    mask: np.ndarray

    def __post_init__(self) -> None:
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.matrix.ndim != 2 or self.mask.shape != (self.matrix.shape[0],):
            raise ValueError(f"history shape {self.matrix.shape} does not match mask {self.mask.shape}")
        if not self.mask.any():
            raise ValueError("history has no present step")
        if np.any(self.matrix[~self.mask] != 0.0):
            raise ValueError("masked-off history rows must be zero")


def build_histories(
    aligned: Sequence[EmbeddingMatrix], nodes: Optional[Iterable[str]] = None
) -> Dict[str, NodeHistory]:
    if not aligned:
        raise ValueError("need at least one embedding matrix")
    dimension = aligned[0].dimension
    if nodes is None:
        nodes = dict.fromkeys(node for matrix in aligned for node in matrix.nodes)
    histories: Dict[str, NodeHistory] = {}
    for node in nodes:
        matrix = np.zeros((len(aligned), dimension))
        mask = np.zeros(len(aligned), dtype=bool)
        for step, embedding in enumerate(aligned):
            if embedding.has(node):
                matrix[step] = embedding.vector(node)
                mask[step] = True
        if mask.any():
            histories[node] = NodeHistory(matrix, mask)
    return histories


def stack_histories(histories: Sequence[NodeHistory]) -> Tuple[np.ndarray, np.ndarray]:
    return np.stack([h.matrix for h in histories]), np.stack([h.mask for h in histories])


@dataclass
class LSTMParams:
    W_i: np.ndarray
    W_f: np.ndarray
    W_o: np.ndarray
    W_g: np.ndarray
    U_i: np.ndarray
    U_f: np.ndarray
    U_o: np.ndarray
    U_g: np.ndarray
    b_i: np.ndarray
    b_f: np.ndarray
    b_o: np.ndarray
    b_g: np.ndarray

    @classmethod
    def initialize(cls, dimension: int, rng: np.random.Generator) -> "LSTMParams":
        bound = 1.0 / np.sqrt(dimension)
        weights = {
            f"{kind}_{gate}": rng.uniform(-bound, bound, (dimension, dimension))
            for kind in ("W", "U")
            for gate in GATES
        }
        biases = {f"b_{gate}": np.zeros(dimension) for gate in GATES}
        biases["b_f"] = np.ones(dimension)
        return cls(**weights, **biases)

    @classmethod
    def zeros(cls, dimension: int) -> "LSTMParams":
        shapes = {f.name: (dimension,) if f.name.startswith("b_") else (dimension, dimension) for f in fields(cls)}
        return cls(**{name: np.zeros(shape) for name, shape in shapes.items()})

    def arrays(self) -> Dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class RNNParams:
    """f_t = tanh(A f_{t-1} + B x_t)."""

    A: np.ndarray
    B: np.ndarray

    @classmethod
    def initialize(cls, dimension: int, rng: np.random.Generator) -> "RNNParams":
        bound = 1.0 / np.sqrt(dimension)
        return cls(
            A=rng.uniform(-bound, bound, (dimension, dimension)),
            B=rng.uniform(-bound, bound, (dimension, dimension)),
        )

    def arrays(self) -> Dict[str, np.ndarray]:
        return {"A": self.A, "B": self.B}


@dataclass
class _LSTMStep:
    t: int
    mask: np.ndarray
    x: np.ndarray
    h_prev: np.ndarray
    c_prev: np.ndarray
    gates: Dict[str, np.ndarray]
    tanh_c: np.ndarray


def lstm_forward_batch(params: LSTMParams, X: np.ndarray, M: np.ndarray) -> Tuple[np.ndarray, List[_LSTMStep]]:
    batch, steps, _ = X.shape
    hidden = params.b_i.shape[0]
    h = np.zeros((batch, hidden))
    c = np.zeros((batch, hidden))
    cache: List[_LSTMStep] = []
    for t in range(steps):
        present = M[:, t][:, None]
        if not present.any():
            continue
        x = np.where(present, X[:, t], 0.0)
        pre = {
            gate: x @ getattr(params, f"W_{gate}").T + h @ getattr(params, f"U_{gate}").T + getattr(params, f"b_{gate}")
            for gate in GATES
        }
        gates = {gate: expit(pre[gate]) for gate in ("i", "f", "o")}
        gates["g"] = np.tanh(pre["g"])
        c_new = gates["f"] * c + gates["i"] * gates["g"]
        tanh_c = np.tanh(c_new)
        h_new = gates["o"] * tanh_c
        if not np.all(np.isfinite(h_new)):
            raise NumericalError("non-finite LSTM state", step=t)
        cache.append(_LSTMStep(t, present, x, h, c, gates, tanh_c))
        h = np.where(present, h_new, h)
        c = np.where(present, c_new, c)
    return h, cache


def lstm_backward_batch(
    params: LSTMParams, cache: List[_LSTMStep], dH: np.ndarray, shape: Tuple[int, int, int]
) -> Tuple[Dict[str, np.ndarray], np.ndarray]:
    grads = {name: np.zeros_like(value) for name, value in params.arrays().items()}
    dX = np.zeros(shape)
    dh = dH.copy()
    dc = np.zeros_like(dH)
    for step in reversed(cache):
        present = step.mask
        dh_step = np.where(present, dh, 0.0)
        dc_step = np.where(present, dc, 0.0)
        g = step.gates
        dc_total = dc_step + dh_step * g["o"] * (1.0 - step.tanh_c**2)
        d_pre = {
            "i": dc_total * g["g"] * g["i"] * (1.0 - g["i"]),
            "f": dc_total * step.c_prev * g["f"] * (1.0 - g["f"]),
            "o": dh_step * step.tanh_c * g["o"] * (1.0 - g["o"]),
            "g": dc_total * g["i"] * (1.0 - g["g"] ** 2),
        }
        dx = np.zeros_like(step.x)
        dh_prev = np.zeros_like(dh)
        for gate, delta in d_pre.items():
            W = getattr(params, f"W_{gate}")
            U = getattr(params, f"U_{gate}")
            grads[f"W_{gate}"] += delta.T @ step.x
            grads[f"U_{gate}"] += delta.T @ step.h_prev
            grads[f"b_{gate}"] += delta.sum(axis=0)
            dx += delta @ W
            dh_prev += delta @ U
        dX[:, step.t] = np.where(present, dx, 0.0)
        dh = dh_prev + np.where(present, 0.0, dh)
        dc = dc_total * g["f"] + np.where(present, 0.0, dc)
    return grads, dX


def rnn_forward_batch(params: RNNParams, X: np.ndarray, M: np.ndarray) -> Tuple[np.ndarray, list]:
    batch, steps, _ = X.shape
    h = np.zeros((batch, params.A.shape[0]))
    cache = []
    for t in range(steps):
        present = M[:, t][:, None]
        if not present.any():
            continue
        x = np.where(present, X[:, t], 0.0)
        h_new = np.tanh(h @ params.A.T + x @ params.B.T)
        if not np.all(np.isfinite(h_new)):
            raise NumericalError("non-finite RNN state", step=t)
        cache.append((t, present, x, h, h_new))
        h = np.where(present, h_new, h)
    return h, cache


def rnn_backward_batch(
    params: RNNParams, cache: list, dH: np.ndarray, shape: Tuple[int, int, int]
) -> Tuple[Dict[str, np.ndarray], np.ndarray]:
    grads = {"A": np.zeros_like(params.A), "B": np.zeros_like(params.B)}
    dX = np.zeros(shape)
    dh = dH.copy()
    for t, present, x, h_prev, h_new in reversed(cache):
        delta = np.where(present, dh, 0.0) * (1.0 - h_new**2)
        grads["A"] += delta.T @ h_prev
        grads["B"] += delta.T @ x
        dX[:, t] = np.where(present, delta @ params.B, 0.0)
        dh = delta @ params.A + np.where(present, 0.0, dh)
    return grads, dX


def last_present_step(M: np.ndarray) -> np.ndarray:
    return M.shape[1] - 1 - np.argmax(M[:, ::-1], axis=1)


def static_forward_batch(X: np.ndarray, M: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    last = last_present_step(M)
    return X[np.arange(X.shape[0]), last].copy(), last


def static_backward_batch(last: np.ndarray, dH: np.ndarray, shape: Tuple[int, int, int]) -> np.ndarray:
    dX = np.zeros(shape)
    dX[np.arange(shape[0]), last] = dH
    return dX


def lstm_forward(history: NodeHistory, params: LSTMParams) -> np.ndarray:
    """Final hidden state h_T of one node's history."""
    h, _ = lstm_forward_batch(params, history.matrix[None], history.mask[None])
    return h[0]
