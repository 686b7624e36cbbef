from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

from src.embedding.matrix import EmbeddingMatrix
from src.embedding.walks import WalkCorpus

logger = logging.getLogger(__name__)

NOISE_POWER = 0.75


@dataclass
class SkipGramConfig:
    dimension: int = 128
    window: int = 10
    negatives: int = 5
    epochs: int = 5
    learning_rate: float = 0.025
    min_learning_rate_ratio: float = 1e-4
    seed: int = 0
    # >1 trains shards of the corpus on threads with unsynchronized updates; results then vary run to run
    workers: int = 1

    def __post_init__(self) -> None:
        if self.dimension < 2:
            raise ValueError(f"dimension (d) must be >= 2, got {self.dimension}")
        if self.window < 1:
            raise ValueError(f"window (k) must be >= 1, got {self.window}")
        if self.negatives < 1:
            raise ValueError(f"negatives must be >= 1, got {self.negatives}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _context_pairs(length: int, window: int) -> Tuple[np.ndarray, np.ndarray]:
    offsets = np.concatenate([np.arange(-window, 0), np.arange(1, window + 1)])
    centers = np.repeat(np.arange(length), offsets.size)
    contexts = centers + np.tile(offsets, length)
    keep = (contexts >= 0) & (contexts < length)
    return centers[keep], contexts[keep]


class SkipGramModel:
    """Skip-gram with negative sampling; one SGD step per walk over all its (target, context) pairs."""

    def __init__(self, vocabulary: Sequence[str], counts: np.ndarray, cfg: SkipGramConfig) -> None:
        self.cfg = cfg
        self.vocabulary = list(vocabulary)
        self.index = {node: idx for idx, node in enumerate(self.vocabulary)}
        self.rng = np.random.default_rng(cfg.seed)
        size, dim = len(self.vocabulary), cfg.dimension
        self.target_vectors = (self.rng.random((size, dim)) - 0.5) / dim
        self.context_vectors = np.zeros((size, dim))
        noise = np.asarray(counts, dtype=np.float64) ** NOISE_POWER
        self.noise_cdf = np.cumsum(noise / noise.sum())
        self.noise_cdf[-1] = 1.0

    def _step(self, walk: np.ndarray, lr: float, rng: np.random.Generator) -> Tuple[float, int]:
        centers, contexts = _context_pairs(walk.size, self.cfg.window)
        if centers.size == 0:
            return 0.0, 0
        targets = walk[centers]
        noise = np.searchsorted(self.noise_cdf, rng.random((targets.size, self.cfg.negatives)), side="right")
        samples = np.concatenate([walk[contexts][:, None], noise], axis=1)
        labels = np.zeros(samples.shape)
        labels[:, 0] = 1.0

        v = self.target_vectors[targets]
        u = self.context_vectors[samples]
        scores = np.einsum("pd,pkd->pk", v, u)
        signed = np.where(labels > 0, scores, -scores)
        loss = float(np.logaddexp(0.0, -signed).sum())

        coeff = (labels - expit(scores)) * lr
        grad_targets = np.einsum("pk,pkd->pd", coeff, u)
        grad_contexts = coeff[:, :, None] * v[:, None, :]
        np.add.at(self.target_vectors, targets, grad_targets)
        np.add.at(self.context_vectors, samples.ravel(), grad_contexts.reshape(-1, v.shape[1]))
        return loss, targets.size

    def _learning_rate(self, step: int, total_steps: int) -> float:
        floor = self.cfg.learning_rate * self.cfg.min_learning_rate_ratio
        return max(self.cfg.learning_rate * (1.0 - step / total_steps), floor)

    def _train_shard(
        self, walks: Sequence[np.ndarray], first_step: int, stride: int, total_steps: int, rng: np.random.Generator
    ) -> Tuple[float, int]:
        loss_sum, pair_count = 0.0, 0
        for offset, walk in enumerate(walks):
            loss, pairs = self._step(walk, self._learning_rate(first_step + offset * stride, total_steps), rng)
            loss_sum += loss
            pair_count += pairs
        return loss_sum, pair_count

    def fit(self, corpus: WalkCorpus) -> List[float]:
        """Train in place; returns the mean per-pair loss of each epoch.

        With `workers > 1` each epoch's walks are dealt round-robin to threads
        that update the shared vectors without locking, each drawing negatives
        from its own stream. The result is then not reproducible.
        """
        encoded = [np.fromiter((self.index[node] for node in walk), dtype=np.int64) for walk in corpus.walks]
        total_steps = max(1, self.cfg.epochs * len(encoded))
        workers = min(self.cfg.workers, max(len(encoded), 1))
        epoch_losses: List[float] = []
        for epoch in range(self.cfg.epochs):
            first = epoch * len(encoded)
            if workers == 1:
                loss_sum, pair_count = self._train_shard(encoded, first, 1, total_steps, self.rng)
            else:
                streams = [np.random.default_rng([self.cfg.seed, epoch, shard]) for shard in range(workers)]
                with ThreadPoolExecutor(max_workers=workers) as pool:
                    futures = [
                        pool.submit(self._train_shard, encoded[shard::workers], first + shard, workers, total_steps, rng)
                        for shard, rng in enumerate(streams)
                    ]
                    outcomes = [future.result() for future in futures]
                loss_sum = sum(loss for loss, _ in outcomes)
                pair_count = sum(pairs for _, pairs in outcomes)
            mean_loss = loss_sum / max(pair_count, 1)
            if not np.isfinite(mean_loss):
                raise ArithmeticError(f"skip-gram loss is non-finite at epoch {epoch + 1}")
            epoch_losses.append(mean_loss)
            logger.debug("skip-gram epoch %d loss %.5f", epoch + 1, mean_loss)
        return epoch_losses


def build_model(
    corpus: WalkCorpus,
    cfg: SkipGramConfig,
    node_index: Dict[str, int],
    nodes: Optional[Sequence[str]] = None,
) -> SkipGramModel:
    if not corpus.walks:
        raise ValueError("cannot train skip-gram on an empty corpus")
    vocabulary = corpus.vocabulary()
    unknown = [node for node in vocabulary if node not in node_index]
    if unknown:
        raise ValueError(f"{len(unknown)} corpus nodes are missing from the node index, e.g. {unknown[:3]}")
    columns = set(vocabulary) | set(nodes or [])
    ordered = sorted(columns, key=node_index.__getitem__)
    counts = dict.fromkeys(ordered, 0)
    for walk in corpus.walks:
        for node in walk:
            counts[node] += 1
    return SkipGramModel(ordered, np.array([counts[node] for node in ordered]), cfg)


def train_skipgram(
    corpus: WalkCorpus,
    cfg: SkipGramConfig,
    node_index: Dict[str, int],
    nodes: Optional[Sequence[str]] = None,
    timestep: int = 0,
) -> EmbeddingMatrix:
    """Target vectors of a trained skip-gram model as a d x |V_t| matrix."""
    model = build_model(corpus, cfg, node_index, nodes)
    model.fit(corpus)
    return EmbeddingMatrix(model.target_vectors.T.copy(), model.vocabulary, node_index, timestep)
