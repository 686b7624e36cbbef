from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Tuple

import networkx as nx

from src.data.normalize import build_node_index, canonical_pair, label_to_class_map, normalize_node_id

logger = logging.getLogger(__name__)


class EdgeListParseError(ValueError):
    def __init__(self, path: Path | str, line_number: int, message: str) -> None:
        super().__init__(f"{path}:{line_number}: {message}")
        self.path = str(path)
        self.line_number = line_number


class SnapshotError(ValueError):
    pass


@dataclass(frozen=True)
class TemporalEdge:
    src: str
    dst: str
    timestamp: int
    weight: float = 1.0

    def __post_init__(self) -> None:
        if not self.weight > 0:
            raise ValueError(f"edge weight must be positive, got {self.weight}")


@dataclass
class TemporalGraph:
    nodes: List[str]
    edges: List[TemporalEdge]
    directed: bool = False
    weighted: bool = False

    def __post_init__(self) -> None:
        known = set(self.nodes)
        for edge in self.edges:
            if edge.src not in known or edge.dst not in known:
                raise ValueError(f"edge endpoint missing from node set: {edge.src!r} -> {edge.dst!r}")
        if not self.weighted and any(edge.weight != 1.0 for edge in self.edges):
            raise ValueError("unweighted graph carries edge weights other than 1.0")

    @classmethod
    def from_edges(cls, edges: Iterable[TemporalEdge], directed: bool = False, weighted: bool = False) -> "TemporalGraph":
        edges = list(edges)
        nodes = list(build_node_index(node for edge in edges for node in (edge.src, edge.dst)))
        return cls(nodes=nodes, edges=edges, directed=directed, weighted=weighted)

    def pair(self, edge: TemporalEdge) -> Tuple[str, str]:
        return canonical_pair(edge.src, edge.dst, self.directed)

    def timestamps(self) -> List[int]:
        return sorted({edge.timestamp for edge in self.edges})

    def until(self, timestamp: int) -> "TemporalGraph":
        """Sub-graph of edges with timestamp <= `timestamp`; nodes are their endpoints."""
        kept = [edge for edge in self.edges if edge.timestamp <= timestamp]
        present = {node for edge in kept for node in (edge.src, edge.dst)}
        nodes = [node for node in self.nodes if node in present]
        return TemporalGraph(nodes=nodes, edges=kept, directed=self.directed, weighted=self.weighted)

    def total_weight_by_pair(self) -> Dict[Tuple[str, str], float]:
        totals: Dict[Tuple[str, str], float] = {}
        for edge in self.edges:
            key = self.pair(edge)
            totals[key] = totals.get(key, 0.0) + edge.weight
        return totals

    def to_static(self) -> nx.Graph:
        return _static_graph(self.nodes, self.edges, self.directed)


@dataclass
class SnapshotSeries:
    boundaries: List[int]
    snapshots: List[nx.Graph]
    node_index: Dict[str, int]
    directed: bool = False
    first_step: Dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.snapshots)

    def subset(self, steps: List[int]) -> "SnapshotSeries":
        boundaries = [self.boundaries[k] for k in steps]
        snapshots = [self.snapshots[k] for k in steps]
        first_step: Dict[str, int] = {}
        for pos, snapshot in enumerate(snapshots):
            for node in snapshot.nodes():
                first_step.setdefault(node, pos)
        return SnapshotSeries(boundaries, snapshots, dict(self.node_index), self.directed, first_step)


def _parse_number(text: str, kind: type, path: Path, line_number: int, field_name: str):
    try:
        value = float(text)
    except ValueError:
        raise EdgeListParseError(path, line_number, f"non-numeric {field_name}: {text!r}") from None
    if kind is int:
        if not value.is_integer():
            raise EdgeListParseError(path, line_number, f"{field_name} must be an integer: {text!r}")
        return int(value)
    return value


def ingest_edge_list(path: Path | str, directed: bool = False, weighted: bool = False) -> TemporalGraph:
    """Parse `src<TAB>dst<TAB>timestamp[<TAB>weight]` lines into a TemporalGraph."""
    path = Path(path)
    edges: List[TemporalEdge] = []
    with path.open("r", encoding="utf-8") as handle:
        for line_number, raw in enumerate(handle, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) not in (3, 4):
                raise EdgeListParseError(path, line_number, f"expected 3 or 4 tab-separated fields, got {len(parts)}")
            src, dst = normalize_node_id(parts[0]), normalize_node_id(parts[1])
            if not src or not dst:
                raise EdgeListParseError(path, line_number, "empty node id")
            timestamp = _parse_number(parts[2], int, path, line_number, "timestamp")
            weight = 1.0
            if len(parts) == 4:
                weight = _parse_number(parts[3], float, path, line_number, "weight")
                if not weight > 0:
                    raise EdgeListParseError(path, line_number, f"weight must be positive: {parts[3]!r}")
            edges.append(TemporalEdge(src, dst, timestamp, weight if weighted else 1.0))
    graph = TemporalGraph.from_edges(edges, directed=directed, weighted=weighted)
    logger.info("ingested %s: %d nodes, %d edges", path, len(graph.nodes), len(graph.edges))
    return graph


def write_edge_list(graph: TemporalGraph, path: Path | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for edge in graph.edges:
            if graph.weighted:
                handle.write(f"{edge.src}\t{edge.dst}\t{edge.timestamp}\t{edge.weight:g}\n")
            else:
                handle.write(f"{edge.src}\t{edge.dst}\t{edge.timestamp}\n")


def load_labels(path: Path | str) -> Tuple[Dict[str, int], List[str]]:
    """Read `node<TAB>label` lines; returns node -> class index and the class names."""
    path = Path(path)
    raw: Dict[str, str] = {}
    with path.open("r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise EdgeListParseError(path, line_number, f"expected node<TAB>label, got {len(parts)} fields")
            raw[normalize_node_id(parts[0])] = parts[1].strip()
    class_map = label_to_class_map(raw.values())
    return {node: class_map[name] for node, name in raw.items()}, sorted(class_map, key=class_map.get)


def collapse_multi_edges(graph: TemporalGraph, granularity: int = 1) -> TemporalGraph:
    """Merge edges sharing (pair, time bucket) into one edge carrying the summed weight."""
    if granularity <= 0:
        raise ValueError(f"granularity must be positive, got {granularity}")
    merged: Dict[Tuple[str, str, int], float] = {}
    for edge in graph.edges:
        bucket = (edge.timestamp // granularity) * granularity
        src, dst = graph.pair(edge)
        key = (src, dst, bucket)
        merged[key] = merged.get(key, 0.0) + edge.weight
    edges = [TemporalEdge(src, dst, bucket, weight) for (src, dst, bucket), weight in merged.items()]
    weighted = graph.weighted or any(edge.weight != 1.0 for edge in edges)
    return TemporalGraph(nodes=list(graph.nodes), edges=edges, directed=graph.directed, weighted=weighted)


def _static_graph(nodes: Iterable[str], edges: Iterable[TemporalEdge], directed: bool) -> nx.Graph:
    static = nx.DiGraph() if directed else nx.Graph()
    static.add_nodes_from(nodes)
    for edge in edges:
        if static.has_edge(edge.src, edge.dst):
            static[edge.src][edge.dst]["weight"] += edge.weight
        else:
            static.add_edge(edge.src, edge.dst, weight=edge.weight)
    return static


def snapshot_boundaries(t_min: int, t_max: int, count: int) -> List[int]:
    span = t_max - t_min
    return [t_min + (k * span) // count for k in range(1, count + 1)]


def build_snapshots(graph: TemporalGraph, count: int) -> SnapshotSeries:
    """Cumulative snapshots at `count` equal-width boundaries over the observed time range."""
    if count < 1:
        raise SnapshotError(f"number of snapshots must be >= 1, got {count}")
    if not graph.edges:
        raise SnapshotError("cannot build snapshots from a graph without edges")
    distinct = graph.timestamps()
    if count > len(distinct):
        raise SnapshotError(
            f"T={count} exceeds the {len(distinct)} distinct timestamps; use T <= {len(distinct)}"
        )
    boundaries = snapshot_boundaries(distinct[0], distinct[-1], count)
    ordered = sorted(graph.edges, key=lambda edge: edge.timestamp)
    node_index = build_node_index(graph.nodes)

    snapshots: List[nx.Graph] = []
    first_step: Dict[str, int] = {}
    current = nx.DiGraph() if graph.directed else nx.Graph()
    cursor = 0
    for step, boundary in enumerate(boundaries):
        while cursor < len(ordered) and ordered[cursor].timestamp <= boundary:
            edge = ordered[cursor]
            for node in (edge.src, edge.dst):
                if node not in first_step:
                    first_step[node] = step
                    current.add_node(node)
            if current.has_edge(edge.src, edge.dst):
                current[edge.src][edge.dst]["weight"] += edge.weight
            else:
                current.add_edge(edge.src, edge.dst, weight=edge.weight)
            cursor += 1
        # node iteration order follows the shared node index
        snapshot = nx.DiGraph() if graph.directed else nx.Graph()
        snapshot.add_nodes_from(sorted(current.nodes(), key=node_index.__getitem__))
        snapshot.add_edges_from(current.edges(data=True))
        snapshots.append(snapshot)
    logger.debug("built %d snapshots with boundaries %s", count, boundaries)
    return SnapshotSeries(boundaries, snapshots, node_index, graph.directed, first_step)


def select_subset(count: int, fraction: float) -> List[int]:
    """Evenly spaced snapshot indices, ceil(fraction * count) of them, always ending at the last one."""
    if not 0 < fraction <= 1:
        raise ValueError(f"timestep_fraction must be in (0, 1], got {fraction}")
    size = min(count, max(1, math.ceil(round(fraction * count, 9))))
    stride = count / size
    return sorted({count - 1 - int(j * stride) for j in range(size)})


def clustering_coefficient(snapshot: nx.Graph) -> float:
    """Global clustering coefficient 3 * triangles / connected triples of the undirected simple view."""
    simple = nx.Graph()
    simple.add_nodes_from(snapshot.nodes())
    simple.add_edges_from((u, v) for u, v in snapshot.edges() if u != v)
    return float(nx.transitivity(simple))


def graph_statistics(graph: TemporalGraph) -> Dict[str, object]:
    timestamps = graph.timestamps()
    return {
        "nodes": len(graph.nodes),
        "edges": len(graph.edges),
        "directed": graph.directed,
        "weighted": graph.weighted,
        "distinct_timestamps": len(timestamps),
        "time_range": [timestamps[0], timestamps[-1]] if timestamps else None,
        "clustering_coefficient": clustering_coefficient(graph.to_static()),
    }


def snapshot_statistics(series: SnapshotSeries) -> List[Dict[str, object]]:
    return [
        {
            "step": step,
            "boundary": boundary,
            "nodes": snapshot.number_of_nodes(),
            "edges": snapshot.number_of_edges(),
            "clustering_coefficient": clustering_coefficient(snapshot),
        }
        for step, (boundary, snapshot) in enumerate(zip(series.boundaries, series.snapshots))
    ]
