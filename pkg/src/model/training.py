from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd

from src.embedding.matrix import EmbeddingMatrix
from src.model.temporal_model import Example, TemporalModel

logger = logging.getLogger(__name__)


class TrainingDivergedError(ArithmeticError):
    def __init__(self, epoch: int, loss: float) -> None:
        super().__init__(f"training diverged at epoch {epoch}: loss={loss}")
        self.epoch = epoch


@dataclass
class TrainConfig:
    epochs: int = 20
    batch_size: int = 256
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    finetune_embeddings: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError(f"Adam betas must lie in [0, 1), got {self.beta1}, {self.beta2}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


class Adam:
    def __init__(self, cfg: TrainConfig) -> None:
        self.cfg = cfg
        self.t = 0
        self.first: Dict[str, np.ndarray] = {}
        self.second: Dict[str, np.ndarray] = {}

    def step(self, params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray]) -> None:
        """In-place update of every array in `params` that has a gradient."""
        cfg = self.cfg
        self.t += 1
        correction1 = 1.0 - cfg.beta1**self.t
        correction2 = 1.0 - cfg.beta2**self.t
        for name, grad in grads.items():
            if name not in params:
                continue
            m = self.first.setdefault(name, np.zeros_like(grad))
            v = self.second.setdefault(name, np.zeros_like(grad))
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * grad
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * grad**2
            params[name] -= cfg.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + cfg.epsilon)


@dataclass
class TrainResult:
    model: TemporalModel
    losses: List[float] = field(default_factory=list)


def train(model: TemporalModel, examples: Sequence[Example], cfg: TrainConfig) -> TrainResult:
    """Mini-batch Adam over the model; returns the per-epoch mean training loss."""
    if not examples:
        raise ValueError("training set is empty")
    rng = np.random.default_rng(cfg.seed)
    optimizer = Adam(cfg)
    params = model.parameters(include_embeddings=cfg.finetune_embeddings)
    losses: List[float] = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(examples))
        total = 0.0
        for start in range(0, len(examples), cfg.batch_size):
            batch = [examples[int(i)] for i in order[start : start + cfg.batch_size]]
            loss, grads = model.loss_and_gradients(batch, include_embeddings=cfg.finetune_embeddings)
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch, loss)
            optimizer.step(params, grads)
            total += loss * len(batch)
        mean_loss = total / len(examples)
        if not np.isfinite(mean_loss):
            raise TrainingDivergedError(epoch, mean_loss)
        losses.append(mean_loss)
        logger.debug("epoch %d loss %.6f", epoch, mean_loss)
    logger.info("trained %s/%s model for %d epochs, final loss %.5f", model.task, model.combiner, cfg.epochs, losses[-1])
    return TrainResult(model=model, losses=losses)


def write_loss_trace(losses: Sequence[float], path: Path) -> None:
    frame = pd.DataFrame({"epoch": np.arange(1, len(losses) + 1), "loss": list(losses)})
    frame.to_csv(path, index=False, float_format="%.10g")


def save_checkpoint(model: TemporalModel, path: Path, config: Dict[str, Any] | None = None) -> None:
    """npz archive of every parameter tensor plus a JSON header (d, T, L, node tables, config echo)."""
    meta = {
        "task": model.task,
        "combiner": model.combiner,
        "directed": model.directed,
        "d": model.dimension,
        "T": model.steps,
        "L": model.num_classes,
        "step_nodes": model.step_nodes,
        "config": config or {},
    }
    arrays = {name: value for name, value in model.parameters(include_embeddings=True).items()}
    np.savez_compressed(path, __meta__=np.array(json.dumps(meta)), **arrays)


def load_checkpoint(path: Path) -> Tuple[TemporalModel, Dict[str, Any]]:
    with np.load(path, allow_pickle=False) as archive:
        meta = json.loads(str(archive["__meta__"]))
        arrays = {name: archive[name] for name in archive.files if name != "__meta__"}
    node_index: Dict[str, int] = {}
    for nodes in meta["step_nodes"]:
        for node in nodes:
            node_index.setdefault(node, len(node_index))
    embeddings = [
        EmbeddingMatrix(arrays[f"Q.{step}"], nodes, node_index, step)
        for step, nodes in enumerate(meta["step_nodes"])
    ]
    model = TemporalModel(
        meta["task"], embeddings, num_classes=meta["L"], combiner=meta["combiner"], directed=meta["directed"]
    )
    for name, target in model.parameters(include_embeddings=True).items():
        target[...] = arrays[name]
    return model, meta
