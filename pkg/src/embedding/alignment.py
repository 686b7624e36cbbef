"""Orthogonal Procrustes alignment of consecutive snapshot embeddings.

Each step's embedding is rotated onto the already aligned previous step using
only the nodes both steps share; nodes new at a step ride along with the same
rotation.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np

from src.embedding.matrix import EmbeddingMatrix

logger = logging.getLogger(__name__)

PENALTY_WEIGHT = 1.0


class AlignmentError(ValueError):
    pass


@dataclass
class RotationMatrix:
    values: np.ndarray
    timestep: int = 0

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[0] != self.values.shape[1]:
            raise ValueError(f"rotation must be square, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"rotation at step {self.timestep} has non-finite entries")

    @classmethod
    def identity(cls, dimension: int, timestep: int = 0) -> "RotationMatrix":
        return cls(np.eye(dimension), timestep)

    def apply(self, matrix: EmbeddingMatrix) -> EmbeddingMatrix:
        return matrix.with_values(self.values @ matrix.values)


def orthogonality_residual(rotation: RotationMatrix | np.ndarray) -> float:
    values = rotation.values if isinstance(rotation, RotationMatrix) else np.asarray(rotation, dtype=np.float64)
    return float(np.linalg.norm(values.T @ values - np.eye(values.shape[1]), "fro"))


def shared_nodes(first: EmbeddingMatrix, second: EmbeddingMatrix) -> List[str]:
    return [node for node in first.nodes if second.has(node)]


def nearest_orthogonal(matrix: np.ndarray, proper: bool = False) -> np.ndarray:
    """Orthogonal polar factor U V^T of `matrix`, optionally forced to det +1."""
    u, _, vt = np.linalg.svd(matrix)
    if proper and np.linalg.det(u @ vt) < 0:
        # flip the direction of the smallest singular value
        u[:, -1] = -u[:, -1]
    return u @ vt


def solve_procrustes(source: np.ndarray, target: np.ndarray, proper: bool = False) -> np.ndarray:
    """argmin over orthogonal R of ||R @ source - target||_F, via the SVD of target @ source.T."""
    return nearest_orthogonal(target @ source.T, proper=proper)


def refine_penalized(
    rotation: np.ndarray,
    source: np.ndarray,
    target: np.ndarray,
    penalty: float = PENALTY_WEIGHT,
    steps: int = 200,
    learning_rate: float = 1e-3,
) -> np.ndarray:
    """Gradient descent on ||R A - B||^2 + penalty * ||R^T R - I||^2 starting from `rotation`."""
    current = rotation.copy()
    eye = np.eye(current.shape[0])
    scale = max(float(np.linalg.norm(source) ** 2), 1.0)
    for _ in range(steps):
        residual = current @ source - target
        gram = current.T @ current - eye
        grad = 2.0 * residual @ source.T + 4.0 * penalty * current @ gram
        current = current - (learning_rate / scale) * grad
    return current


def procrustes_align(
    q_next: EmbeddingMatrix,
    q_prev: EmbeddingMatrix,
    proper: bool = False,
    refine: bool = False,
) -> RotationMatrix:
    """Rotation mapping `q_next` onto `q_prev` over the nodes present in both."""
    if q_next.dimension != q_prev.dimension:
        raise AlignmentError(f"dimension mismatch: {q_next.dimension} vs {q_prev.dimension}")
    common = shared_nodes(q_prev, q_next)
    if not common:
        raise AlignmentError(f"steps {q_prev.timestep} and {q_next.timestep} share no nodes")
    if len(common) < q_next.dimension:
        warnings.warn(
            f"only {len(common)} shared nodes for dimension {q_next.dimension} at step {q_next.timestep}; "
            "rotation is not unique",
            RuntimeWarning,
            stacklevel=2,
        )
    source = q_next.columns_for(common)
    target = q_prev.columns_for(common)
    values = solve_procrustes(source, target, proper=proper)
    if refine:
        # back onto the orthogonal group
        values = nearest_orthogonal(refine_penalized(values, source, target), proper=proper)
    return RotationMatrix(values, q_next.timestep)


def align_series_with_rotations(
    matrices: Sequence[EmbeddingMatrix],
    proper: bool = False,
    refine: bool = False,
) -> Tuple[List[EmbeddingMatrix], List[RotationMatrix]]:
    if not matrices:
        raise AlignmentError("cannot align an empty series")
    dimension = matrices[0].dimension
    if any(matrix.dimension != dimension for matrix in matrices):
        raise AlignmentError("all matrices in a series must share the embedding dimension")
    aligned = [matrices[0]]
    rotations = [RotationMatrix.identity(dimension, matrices[0].timestep)]
    for matrix in matrices[1:]:
        rotation = procrustes_align(matrix, aligned[-1], proper=proper, refine=refine)
        aligned.append(rotation.apply(matrix))
        rotations.append(rotation)
        logger.debug("step %d orthogonality residual %.2e", matrix.timestep, orthogonality_residual(rotation))
    return aligned, rotations


def align_series(
    matrices: Sequence[EmbeddingMatrix],
    proper: bool = False,
    refine: bool = False,
) -> List[EmbeddingMatrix]:
    aligned, _ = align_series_with_rotations(matrices, proper=proper, refine=refine)
    return aligned


def export_rotation_tsv(rotation: RotationMatrix, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for row in rotation.values:
            handle.write("\t".join(repr(float(x)) for x in row) + "\n")
