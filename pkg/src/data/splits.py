from __future__ import annotations

import bisect
import itertools
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Set

import numpy as np

from src.data.normalize import Pair, canonical_pair, pairs_from_json, pairs_to_json
from src.data.temporal_graph import TemporalGraph

logger = logging.getLogger(__name__)

# Below this many candidate pairs the negative pool is enumerated explicitly.
ENUMERATION_LIMIT = 2_000_000


class SplitError(ValueError):
    pass


@dataclass
class LinkSplit:
    pivot: int
    train_pos: List[Pair]
    train_neg: List[Pair]
    test_pos: List[Pair]
    test_neg: List[Pair]

    def train_examples(self) -> List[tuple]:
        return [(pair, 1) for pair in self.train_pos] + [(pair, 0) for pair in self.train_neg]

    def test_examples(self) -> List[tuple]:
        return [(pair, 1) for pair in self.test_pos] + [(pair, 0) for pair in self.test_neg]

    def to_json(self) -> Dict[str, Any]:
        return {
            "task": "link",
            "pivot": self.pivot,
            "train_pos": pairs_to_json(self.train_pos),
            "train_neg": pairs_to_json(self.train_neg),
            "test_pos": pairs_to_json(self.test_pos),
            "test_neg": pairs_to_json(self.test_neg),
        }

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> "LinkSplit":
        return cls(
            pivot=int(data["pivot"]),
            train_pos=pairs_from_json(data["train_pos"]),
            train_neg=pairs_from_json(data["train_neg"]),
            test_pos=pairs_from_json(data["test_pos"]),
            test_neg=pairs_from_json(data["test_neg"]),
        )


@dataclass
class NodeSplit:
    train_nodes: List[str]
    test_nodes: List[str]
    labels: Dict[str, int]

    def train_examples(self) -> List[tuple]:
        return [(node, self.labels[node]) for node in self.train_nodes]

    def test_examples(self) -> List[tuple]:
        return [(node, self.labels[node]) for node in self.test_nodes]

    def to_json(self) -> Dict[str, Any]:
        return {
            "task": "nodeclass",
            "train_nodes": list(self.train_nodes),
            "test_nodes": list(self.test_nodes),
            "labels": dict(self.labels),
        }

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> "NodeSplit":
        return cls(
            train_nodes=[str(node) for node in data["train_nodes"]],
            test_nodes=[str(node) for node in data["test_nodes"]],
            labels={str(node): int(label) for node, label in data["labels"].items()},
        )


def save_split(split: LinkSplit | NodeSplit, path: Path) -> None:
    with path.open("w", encoding="utf-8") as handle:
        json.dump(split.to_json(), handle, indent=2, ensure_ascii=False)


def load_split(path: Path) -> LinkSplit | NodeSplit:
    with path.open("r", encoding="utf-8") as handle:
        data = json.load(handle)
    if data.get("task") == "nodeclass":
        return NodeSplit.from_json(data)
    return LinkSplit.from_json(data)


def _first_appearance(graph: TemporalGraph) -> Dict[str, int]:
    first: Dict[str, int] = {}
    for edge in graph.edges:
        for node in (edge.src, edge.dst):
            if node not in first or edge.timestamp < first[node]:
                first[node] = edge.timestamp
    return first


def _first_connection(graph: TemporalGraph) -> Dict[Pair, int]:
    """Earliest timestamp per (canonical) pair, in order of first formation; self-loops dropped."""
    first: Dict[Pair, int] = {}
    for edge in sorted(graph.edges, key=lambda e: e.timestamp):
        if edge.src == edge.dst:
            continue
        pair = graph.pair(edge)
        if pair not in first:
            first[pair] = edge.timestamp
    return first


def select_pivot(graph: TemporalGraph, train_fraction: float = 0.8) -> int:
    """Timestamp whose edge share at or before it is closest to `train_fraction`.

    Only pivots leaving at least one post-pivot edge that first connects two
    pre-pivot nodes are considered; ties go to the earlier timestamp.
    """
    if not 0 < train_fraction < 1:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    timestamps = sorted(edge.timestamp for edge in graph.edges)
    candidates = sorted(set(timestamps))[:-1]
    if not candidates:
        raise SplitError("no pivot available: all edges share a single timestamp")

    node_first = _first_appearance(graph)
    # a pair is a valid test edge for pivots in [max(first(u), first(v)), first(pair))
    coverage = np.zeros(len(candidates) + 1, dtype=np.int64)
    for (u, v), formed in _first_connection(graph).items():
        lo = bisect.bisect_left(candidates, max(node_first[u], node_first[v]))
        hi = bisect.bisect_left(candidates, formed)
        if lo < hi:
            coverage[lo] += 1
            coverage[hi] -= 1
    valid = np.cumsum(coverage)[:-1] > 0

    total = len(timestamps)
    best: Optional[int] = None
    best_gap = math.inf
    for idx, pivot in enumerate(candidates):
        if not valid[idx]:
            continue
        share = bisect.bisect_right(timestamps, pivot) / total
        gap = abs(share - train_fraction)
        if gap < best_gap - 1e-12:
            best, best_gap = pivot, gap
    if best is None:
        raise SplitError("no pivot leaves a test edge between pre-pivot nodes")
    logger.info("selected pivot %s (train share gap %.4f)", best, best_gap)
    return best


def _all_pairs(nodes: List[str], directed: bool) -> Iterable[Pair]:
    if directed:
        return itertools.permutations(nodes, 2)
    return (canonical_pair(u, v, False) for u, v in itertools.combinations(nodes, 2))


def _sample_absent_pairs(
    nodes: List[str],
    excluded: Set[Pair],
    count: int,
    directed: bool,
    rng: np.random.Generator,
    label: str,
) -> List[Pair]:
    """Uniform sample without replacement of non-self pairs over `nodes` not in `excluded`."""
    n = len(nodes)
    total = n * (n - 1) if directed else n * (n - 1) // 2
    node_set = set(nodes)
    blocked = sum(1 for u, v in excluded if u in node_set and v in node_set and u != v)
    pool = total - blocked
    if count > pool:
        raise SplitError(f"{label}: need {count} negative pairs but only {pool} candidates exist (deficit {count - pool})")
    if count == 0:
        return []

    if total <= ENUMERATION_LIMIT or 2 * count >= pool:
        candidates = [pair for pair in _all_pairs(nodes, directed) if pair not in excluded]
        chosen = rng.choice(len(candidates), size=count, replace=False)
        return [candidates[int(i)] for i in chosen]

    sampled: List[Pair] = []
    seen: Set[Pair] = set()
    while len(sampled) < count:
        i, j = rng.integers(n, size=2)
        if i == j:
            continue
        pair = canonical_pair(nodes[int(i)], nodes[int(j)], directed)
        if pair in excluded or pair in seen:
            continue
        seen.add(pair)
        sampled.append(pair)
    return sampled


def split_link_prediction(graph: TemporalGraph, pivot: int, seed: int = 0) -> LinkSplit:
    """Positive/negative pairs before and after `pivot` for temporal link prediction."""
    node_first = _first_appearance(graph)
    first_connected = _first_connection(graph)
    pre_nodes = [node for node in graph.nodes if node_first.get(node, math.inf) <= pivot]
    pre_set = set(pre_nodes)

    train_pos = [pair for pair, formed in first_connected.items() if formed <= pivot]
    test_pos = [
        pair
        for pair, formed in first_connected.items()
        if formed > pivot and pair[0] in pre_set and pair[1] in pre_set
    ]

    rng = np.random.default_rng(seed)
    train_neg = _sample_absent_pairs(pre_nodes, set(train_pos), len(train_pos), graph.directed, rng, "train negatives")
    test_neg = _sample_absent_pairs(pre_nodes, set(first_connected), len(test_pos), graph.directed, rng, "test negatives")
    logger.info(
        "link split at pivot %s: %d train pairs, %d test pairs", pivot, len(train_pos), len(test_pos)
    )
    return LinkSplit(pivot, train_pos, train_neg, test_pos, test_neg)


def split_node_classification(
    labels: Dict[str, int],
    fraction: float = 0.8,
    seed: int = 0,
    graph: Optional[TemporalGraph] = None,
) -> NodeSplit:
    if not 0 < fraction < 1:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    if len(labels) < 2:
        raise SplitError(f"need at least 2 labeled nodes, got {len(labels)}")
    if graph is not None:
        known = set(graph.nodes)
        missing = [node for node in labels if node not in known]
        if missing:
            raise SplitError(f"{len(missing)} labeled nodes are not in the graph, e.g. {missing[:3]}")
    nodes = list(labels)
    order = np.random.default_rng(seed).permutation(len(nodes))
    cut = math.floor(fraction * len(nodes))
    if cut == 0 or cut == len(nodes):
        raise SplitError(f"fraction {fraction} leaves an empty side for {len(nodes)} labeled nodes")
    train = [nodes[int(i)] for i in order[:cut]]
    test = [nodes[int(i)] for i in order[cut:]]
    return NodeSplit(train_nodes=train, test_nodes=test, labels=dict(labels))
