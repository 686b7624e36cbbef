from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence

import numpy as np

MAGIC = b"TNEM"
# magic, d, |V|, timestep
HEADER = struct.Struct("<4sIIi")


@dataclass
class EmbeddingMatrix:
    """d x |V_t| static embedding of one snapshot; column order follows `nodes`."""

    values: np.ndarray
    nodes: List[str]
    node_index: Dict[str, int]
    timestep: int = 0

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[1] != len(self.nodes):
            raise ValueError(f"values shape {self.values.shape} does not match {len(self.nodes)} nodes")
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"embedding at step {self.timestep} has non-finite entries")
        self._columns = {node: col for col, node in enumerate(self.nodes)}

    @property
    def dimension(self) -> int:
        return int(self.values.shape[0])

    def has(self, node: str) -> bool:
        return node in self._columns

    def column(self, node: str) -> int:
        return self._columns[node]

    def vector(self, node: str) -> np.ndarray:
        return self.values[:, self._columns[node]]

    def columns_for(self, nodes: Sequence[str]) -> np.ndarray:
        return self.values[:, [self._columns[node] for node in nodes]]

    def with_values(self, values: np.ndarray) -> "EmbeddingMatrix":
        return EmbeddingMatrix(values, list(self.nodes), self.node_index, self.timestep)


def write_matrix(matrix: EmbeddingMatrix, path: Path) -> None:
    """Header, row-major float64 values, then one node id per line."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as handle:
        handle.write(HEADER.pack(MAGIC, matrix.dimension, len(matrix.nodes), matrix.timestep))
        handle.write(np.ascontiguousarray(matrix.values, dtype="<f8").tobytes(order="C"))
        handle.write("\n".join(matrix.nodes).encode("utf-8"))


def read_matrix(path: Path, node_index: Dict[str, int] | None = None) -> EmbeddingMatrix:
    data = path.read_bytes()
    magic, dimension, count, timestep = HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise ValueError(f"{path} is not an embedding container (magic {magic!r})")
    start = HEADER.size
    end = start + 8 * dimension * count
    values = np.frombuffer(data[start:end], dtype="<f8").reshape(dimension, count).copy()
    tail = data[end:].decode("utf-8")
    nodes = tail.split("\n") if count else []
    if len(nodes) != count:
        raise ValueError(f"{path}: node table has {len(nodes)} entries, header says {count}")
    if node_index is None:
        node_index = {node: idx for idx, node in enumerate(nodes)}
    return EmbeddingMatrix(values, nodes, node_index, timestep)


def export_tsv(matrix: EmbeddingMatrix, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for node in matrix.nodes:
            vector = "\t".join(repr(float(x)) for x in matrix.vector(node))
            handle.write(f"{node}\t{vector}\n")


def write_series(matrices: Sequence[EmbeddingMatrix], directory: Path) -> List[Path]:
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for position, matrix in enumerate(matrices):
        path = directory / f"step_{position:03d}.tnem"
        write_matrix(matrix, path)
        paths.append(path)
    return paths


def read_series(directory: Path) -> List[EmbeddingMatrix]:
    paths = sorted(directory.glob("step_*.tnem"))
    if not paths:
        raise FileNotFoundError(f"no step_*.tnem files in {directory}")
    matrices = [read_matrix(path) for path in paths]
    node_index: Dict[str, int] = {}
    for matrix in matrices:
        for node in matrix.nodes:
            node_index.setdefault(node, len(node_index))
    return [EmbeddingMatrix(m.values, m.nodes, node_index, m.timestep) for m in matrices]
