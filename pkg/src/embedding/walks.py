from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

logger = logging.getLogger(__name__)

AliasTable = Tuple[np.ndarray, np.ndarray]
SINK_MODES = ("truncate", "restart")


@dataclass
class WalkConfig:
    p: float = 1.0
    q: float = 1.0
    num_walks: int = 10
    walk_length: int = 80
    seed: int = 0
    # what a walk does on reaching a node with no way out before `walk_length`
    on_sink: str = "truncate"

    def __post_init__(self) -> None:
        if not self.p > 0:
            raise ValueError(f"p must be positive, got {self.p}")
        if not self.q > 0:
            raise ValueError(f"q must be positive, got {self.q}")
        if self.num_walks < 1:
            raise ValueError(f"num_walks (r) must be >= 1, got {self.num_walks}")
        if self.walk_length < 2:
            raise ValueError(f"walk_length (l) must be >= 2, got {self.walk_length}")
        if self.on_sink not in SINK_MODES:
            raise ValueError(f"on_sink must be one of {SINK_MODES}, got {self.on_sink!r}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class WalkCorpus:
    walks: List[List[str]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.walks)

    def vocabulary(self) -> List[str]:
        return list(dict.fromkeys(node for walk in self.walks for node in walk))


def transition_weight(d_ux: int, p: float, q: float, edge_weight: float = 1.0) -> float:
    """Unnormalized probability of stepping to x given the previous node u at distance d_ux."""
    if d_ux == 0:
        return edge_weight / p
    if d_ux == 1:
        return edge_weight
    if d_ux == 2:
        return edge_weight / q
    raise ValueError(f"d_ux must be 0, 1 or 2, got {d_ux}")


def alias_setup(probs: Sequence[float]) -> AliasTable:
    """Vose alias tables (alias, accept) for a discrete distribution."""
    probs = np.asarray(probs, dtype=np.float64)
    probs = probs / probs.sum()
    size = probs.size
    accept = probs * size
    alias = np.zeros(size, dtype=np.int64)
    small = [i for i in range(size) if accept[i] < 1.0]
    large = [i for i in range(size) if accept[i] >= 1.0]
    while small and large:
        lo = small.pop()
        hi = large.pop()
        alias[lo] = hi
        accept[hi] = accept[hi] + accept[lo] - 1.0
        if accept[hi] < 1.0:
            small.append(hi)
        else:
            large.append(hi)
    for idx in small + large:
        accept[idx] = 1.0
    return alias, accept


def alias_draw(table: AliasTable, u1: float, u2: float) -> int:
    alias, accept = table
    idx = int(u1 * accept.size)
    if idx == accept.size:
        idx -= 1
    return idx if u2 < accept[idx] else int(alias[idx])


def _neighbors(snapshot: nx.Graph, node: str) -> List[str]:
    if snapshot.is_directed():
        return list(snapshot.successors(node))
    return list(snapshot.neighbors(node))


def _connected(snapshot: nx.Graph, a: str, b: str) -> bool:
    return snapshot.has_edge(a, b) or snapshot.has_edge(b, a)


class BiasedWalker:
    """Second-order walks with precomputed alias tables per node and per traversed edge."""

    def __init__(self, snapshot: nx.Graph, cfg: WalkConfig) -> None:
        if snapshot.number_of_nodes() == 0:
            raise ValueError("cannot walk an empty snapshot")
        self.snapshot = snapshot
        self.cfg = cfg
        self.neighbors: Dict[str, List[str]] = {node: _neighbors(snapshot, node) for node in snapshot.nodes()}
        self.node_tables: Dict[str, AliasTable] = {}
        self.edge_tables: Dict[Tuple[str, str], AliasTable] = {}
        self._preprocess()

    def _weight(self, a: str, b: str) -> float:
        return float(self.snapshot[a][b].get("weight", 1.0))

    def edge_probabilities(self, prev: str, cur: str) -> np.ndarray:
        weights = []
        for nxt in self.neighbors[cur]:
            if nxt == prev:
                d_ux = 0
            elif _connected(self.snapshot, prev, nxt):
                d_ux = 1
            else:
                d_ux = 2
            weights.append(transition_weight(d_ux, self.cfg.p, self.cfg.q, self._weight(cur, nxt)))
        weights = np.asarray(weights, dtype=np.float64)
        return weights / weights.sum()

    def _preprocess(self) -> None:
        for node, nbrs in self.neighbors.items():
            if nbrs:
                self.node_tables[node] = alias_setup([self._weight(node, nxt) for nxt in nbrs])
        for src, dst in self.snapshot.edges():
            directions = [(src, dst)] if self.snapshot.is_directed() else [(src, dst), (dst, src)]
            for prev, cur in directions:
                if self.neighbors[cur]:
                    self.edge_tables[(prev, cur)] = alias_setup(self.edge_probabilities(prev, cur))

    def walk(self, start: str, rng: np.random.Generator, length: Optional[int] = None) -> List[str]:
        """One walk from `start`, cut short at a node without neighbours."""
        length = self.cfg.walk_length if length is None else length
        uniforms = rng.random((length, 2))
        walk = [start]
        while len(walk) < length:
            cur = walk[-1]
            nbrs = self.neighbors[cur]
            if not nbrs:
                break
            u1, u2 = uniforms[len(walk)]
            if len(walk) == 1:
                table = self.node_tables[cur]
            else:
                table = self.edge_tables[(walk[-2], cur)]
            walk.append(nbrs[alias_draw(table, u1, u2)])
        return walk

    def walk_segments(self, start: str, rng: np.random.Generator) -> List[List[str]]:
        """Walks for one start node.

        `truncate` gives a single walk that may stop early at a sink. `restart`
        spends the rest of the `walk_length` token budget on fresh walks from
        the same start, each emitted separately so every consecutive pair is
        still an edge.
        """
        segments = [self.walk(start, rng)]
        budget = self.cfg.walk_length - len(segments[0])
        while self.cfg.on_sink == "restart" and budget >= 2 and len(segments[-1]) >= 2:
            segment = self.walk(start, rng, budget)
            segments.append(segment)
            budget -= len(segment)
        return segments


def generate_walks(snapshot: nx.Graph, cfg: WalkConfig) -> WalkCorpus:
    """r walks from every node of the snapshot, start order reshuffled each round.

    With `on_sink = "restart"` a start node can contribute more than one walk per round.
    """
    walker = BiasedWalker(snapshot, cfg)
    rng = np.random.default_rng(cfg.seed)
    nodes = list(snapshot.nodes())
    walks: List[List[str]] = []
    for _ in range(cfg.num_walks):
        for idx in rng.permutation(len(nodes)):
            walks.extend(walker.walk_segments(nodes[int(idx)], rng))
    logger.debug("generated %d walks over %d nodes", len(walks), len(nodes))
    return WalkCorpus(walks)
