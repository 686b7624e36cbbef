from __future__ import annotations

from typing import Dict, Iterable, List, Tuple

Pair = Tuple[str, str]


def normalize_node_id(node: object) -> str:
    return str(node).strip()


def canonical_pair(u: str, v: str, directed: bool) -> Pair:
    """Directed pairs keep (src, dst); undirected pairs are sorted (min, max)."""
    if directed:
        return (u, v)
    return (u, v) if u <= v else (v, u)


def build_node_index(nodes: Iterable[str]) -> Dict[str, int]:
    node_index: Dict[str, int] = {}
    for node in nodes:
        if node not in node_index:
            node_index[node] = len(node_index)
    return node_index


def label_to_class_map(label_names: Iterable[str]) -> Dict[str, int]:
    return {name: idx for idx, name in enumerate(sorted(set(label_names)))}


def pairs_to_json(pairs: List[Pair]) -> List[List[str]]:
    return [[u, v] for u, v in pairs]


def pairs_from_json(rows: List[List[object]]) -> List[Pair]:
    return [(normalize_node_id(row[0]), normalize_node_id(row[1])) for row in rows]
