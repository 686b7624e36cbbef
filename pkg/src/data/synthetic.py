from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Tuple

import numpy as np
from scipy.optimize import brentq

from src.data.temporal_graph import TemporalEdge, TemporalGraph, clustering_coefficient

logger = logging.getLogger(__name__)

TARGET_SHAPES = ("linear", "logarithmic", "sinusoidal", "exponential")
DEFICIT_FLOOR = 0.1
EXPONENTIAL_SPREAD = 100.0


class SynthesisError(ValueError):
    pass


@dataclass
class SynthConfig:
    n: int = 100
    m: int = 2000
    T: int = 20
    target: str = "linear"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError(f"n must be >= 2, got {self.n}")
        if not 1 <= self.m <= self.n * (self.n - 1) // 2:
            raise ValueError(f"m must be in [1, n(n-1)/2 = {self.n * (self.n - 1) // 2}], got {self.m}")
        if self.T < 1:
            raise ValueError(f"T must be >= 1, got {self.T}")
        if self.m < self.T:
            raise ValueError(f"m={self.m} cannot give every one of T={self.T} steps an edge")
        if self.target not in TARGET_SHAPES:
            raise ValueError(f"target must be one of {TARGET_SHAPES}, got {self.target!r}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _exponential(ranks: np.ndarray, spread: float) -> np.ndarray:
    return spread ** ((ranks - 1.0) / (ranks.size - 1))


def exponential_spread(n: int, m: int) -> float:
    """Max/min ratio of the exponential profile: 100, or the largest ratio whose top degree still fits in n-1."""
    ranks = np.arange(1, n + 1, dtype=float)

    def overshoot(spread: float) -> float:
        shape = _exponential(ranks, spread)
        return 2 * m * shape[-1] / shape.sum() - (n - 1)

    if overshoot(EXPONENTIAL_SPREAD) <= 0:
        return EXPONENTIAL_SPREAD
    if overshoot(1.0) >= 0:
        return 1.0
    return float(brentq(overshoot, 1.0, EXPONENTIAL_SPREAD, xtol=1e-10))


def _shape(cfg: SynthConfig) -> Tuple[np.ndarray, float]:
    """Unscaled shape over ranks 1..n and the constant offset added after scaling."""
    ranks = np.arange(1, cfg.n + 1, dtype=float)
    if cfg.target == "linear":
        return ranks, 0.0
    if cfg.target == "logarithmic":
        return np.log1p(ranks), 0.0
    if cfg.target == "sinusoidal":
        return (1.0 + np.sin(2.0 * math.pi * ranks / cfg.n)) / 2.0, 1.0
    return _exponential(ranks, exponential_spread(cfg.n, cfg.m)), 0.0


def target_degree_profile(cfg: SynthConfig) -> np.ndarray:
    """Integer target degrees per node rank, summing to exactly 2m, each within [1, n-1]."""
    total = 2 * cfg.m
    if not cfg.n <= total <= cfg.n * (cfg.n - 1):
        raise SynthesisError(f"degree sum {total} cannot be met with every degree in [1, {cfg.n - 1}]")
    shape, offset = _shape(cfg)
    scale = (total - offset * cfg.n) / shape.sum()
    degrees = np.floor(scale * shape + offset + 0.5).astype(np.int64)
    degrees = np.clip(degrees, 1, cfg.n - 1)

    diff = total - int(degrees.sum())
    while diff != 0:
        step = 1 if diff > 0 else -1
        room = degrees < cfg.n - 1 if step > 0 else degrees > 1
        candidates = np.flatnonzero(room)
        if candidates.size == 0:
            raise SynthesisError("degree profile cannot be repaired to the required sum")
        # largest entry first; among equals the highest rank
        pick = candidates[np.lexsort((-candidates, -degrees[candidates]))[0]]
        degrees[pick] += step
        diff -= step
    return degrees


def generate_with_report(cfg: SynthConfig) -> Tuple[TemporalGraph, Dict[str, Any]]:
    target = target_degree_profile(cfg)
    rng = np.random.default_rng(cfg.seed)
    nodes = [f"n{i}" for i in range(cfg.n)]
    rows, cols = np.triu_indices(cfg.n, 1)
    absent = np.ones(rows.size, dtype=bool)
    degree = np.zeros(cfg.n, dtype=np.int64)

    per_step = [cfg.m // cfg.T] * cfg.T
    per_step[-1] += cfg.m % cfg.T
    edges: List[TemporalEdge] = []
    for step, count in enumerate(per_step, start=1):
        for _ in range(count):
            deficit = np.maximum(target - degree, DEFICIT_FLOOR)
            weights = deficit[rows] * deficit[cols] * absent
            cumulative = np.cumsum(weights)
            if cumulative[-1] <= 0:
                raise SynthesisError(f"step {step}: graph is saturated, no absent pair left")
            pick = int(np.searchsorted(cumulative, rng.random() * cumulative[-1], side="right"))
            pick = min(pick, rows.size - 1)
            absent[pick] = False
            u, v = int(rows[pick]), int(cols[pick])
            degree[u] += 1
            degree[v] += 1
            edges.append(TemporalEdge(nodes[u], nodes[v], step))

    graph = TemporalGraph(nodes=nodes, edges=edges, directed=False, weighted=False)
    l1 = int(np.abs(degree - target).sum())
    report = {
        "config": cfg.to_dict(),
        "target_degrees": target.tolist(),
        "realized_degrees": degree.tolist(),
        "degree_l1_distance": l1,
        "edges_per_step": per_step,
        "clustering_coefficient": clustering_coefficient(graph.to_static()),
    }
    if cfg.target == "exponential":
        report["exponential_spread"] = exponential_spread(cfg.n, cfg.m)
    logger.info("synthetic %s graph: %d edges, degree L1 distance %d", cfg.target, len(edges), l1)
    return graph, report


def generate_temporal_graph(cfg: SynthConfig) -> TemporalGraph:
    graph, _ = generate_with_report(cfg)
    return graph
