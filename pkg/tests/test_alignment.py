import math

import numpy as np
import pytest

from src.data.temporal_graph import TemporalEdge, TemporalGraph, build_snapshots
from src.embedding.alignment import (
    AlignmentError,
    RotationMatrix,
    align_series,
    align_series_with_rotations,
    export_rotation_tsv,
    nearest_orthogonal,
    orthogonality_residual,
    procrustes_align,
    refine_penalized,
    solve_procrustes,
)
from src.embedding.matrix import EmbeddingMatrix
from src.embedding.skipgram import SkipGramConfig, train_skipgram
from src.embedding.walks import WalkConfig, generate_walks


def matrix_of(values, nodes=None, timestep=0):
    values = np.asarray(values, dtype=float)
    nodes = nodes or [f"v{i}" for i in range(values.shape[1])]
    return EmbeddingMatrix(values, list(nodes), {node: i for i, node in enumerate(nodes)}, timestep)


def planar(degrees):
    angle = math.radians(degrees)
    return np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])


def random_orthogonal(rng, count, d):
    q, r = np.linalg.qr(rng.normal(size=(count, d, d)))
    return q * np.sign(np.diagonal(r, axis1=1, axis2=2))[:, None, :]


def test_identical_matrices_give_identity():
    q = matrix_of(np.random.default_rng(0).normal(size=(3, 12)))
    rotation = procrustes_align(q, q)
    np.testing.assert_allclose(rotation.values, np.eye(3), atol=1e-10)


def test_planted_planar_rotation_is_recovered():
    rng = np.random.default_rng(1)
    q_prev = rng.normal(size=(2, 30))
    g = planar(37.0)
    rotation = procrustes_align(matrix_of(g @ q_prev), matrix_of(q_prev))
    np.testing.assert_allclose(rotation.values, g.T, atol=1e-6)


def test_matches_grid_search_over_angles():
    rng = np.random.default_rng(2)
    source, target = rng.normal(size=(2, 15)), rng.normal(size=(2, 15))
    closed = solve_procrustes(source, target, proper=True)
    angles = np.linspace(0.0, 360.0, 36001)
    best = min(np.linalg.norm(planar(a) @ source - target) for a in angles)
    assert np.linalg.norm(closed @ source - target) <= best + 1e-9


@pytest.mark.parametrize("seed", range(50))
def test_closed_form_beats_random_orthogonal_candidates(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 4))
    source, target = rng.normal(size=(d, 10)), rng.normal(size=(d, 10))
    closed = np.linalg.norm(solve_procrustes(source, target) @ source - target)
    candidates = random_orthogonal(rng, 100_000, d)
    residuals = np.linalg.norm(np.einsum("kij,jn->kin", candidates, source) - target, axis=(1, 2))
    assert closed <= residuals.min() + 1e-12


def test_noisy_rotation_reduces_residual():
    rng = np.random.default_rng(3)
    q_prev = rng.normal(size=(4, 50))
    g = random_orthogonal(rng, 1, 4)[0]
    q_next = g @ q_prev + rng.normal(scale=0.01, size=q_prev.shape)
    rotation = procrustes_align(matrix_of(q_next), matrix_of(q_prev))
    assert np.linalg.norm(rotation.values @ q_next - q_prev) <= np.linalg.norm(q_next - q_prev)
    assert orthogonality_residual(rotation) < 1e-10


def test_only_shared_nodes_drive_the_rotation():
    rng = np.random.default_rng(4)
    q_prev = rng.normal(size=(2, 6))
    g = planar(120.0)
    newcomer = rng.normal(size=(2, 1)) * 100
    q_next = np.hstack([g @ q_prev, newcomer])
    nodes_next = [f"v{i}" for i in range(6)] + ["late"]
    rotation = procrustes_align(matrix_of(q_next, nodes_next), matrix_of(q_prev))
    np.testing.assert_allclose(rotation.values, g.T, atol=1e-8)


def test_proper_rotation_flag_forces_positive_determinant():
    rng = np.random.default_rng(5)
    q_prev = rng.normal(size=(3, 20))
    reflection = np.diag([1.0, 1.0, -1.0])
    source, target = reflection @ q_prev, q_prev
    assert np.linalg.det(solve_procrustes(source, target)) == pytest.approx(-1.0)
    assert np.linalg.det(solve_procrustes(source, target, proper=True)) == pytest.approx(1.0)


def test_no_shared_nodes_is_an_error():
    with pytest.raises(AlignmentError, match="share no nodes"):
        procrustes_align(matrix_of(np.ones((2, 2)), ["a", "b"]), matrix_of(np.ones((2, 2)), ["c", "d"]))


def test_few_shared_nodes_warns():
    rng = np.random.default_rng(6)
    q_prev = matrix_of(rng.normal(size=(3, 2)), ["a", "b"])
    q_next = matrix_of(rng.normal(size=(3, 3)), ["a", "b", "c"])
    with pytest.warns(RuntimeWarning, match="not unique"):
        rotation = procrustes_align(q_next, q_prev)
    assert orthogonality_residual(rotation) < 1e-10


def test_dimension_mismatch():
    with pytest.raises(AlignmentError):
        procrustes_align(matrix_of(np.ones((2, 2))), matrix_of(np.ones((3, 2))))


def test_single_matrix_series_is_unchanged():
    q = matrix_of(np.random.default_rng(7).normal(size=(3, 5)))
    aligned, rotations = align_series_with_rotations([q])
    np.testing.assert_array_equal(aligned[0].values, q.values)
    np.testing.assert_array_equal(rotations[0].values, np.eye(3))


def test_identical_series_is_a_fixed_point():
    values = np.random.default_rng(8).normal(size=(3, 9))
    series = [matrix_of(values, timestep=t) for t in range(4)]
    aligned, rotations = align_series_with_rotations(series)
    for matrix, rotation in zip(aligned, rotations):
        np.testing.assert_allclose(rotation.values, np.eye(3), atol=1e-10)
        np.testing.assert_allclose(matrix.values, values, atol=1e-10)


def test_chain_undoes_cumulative_rotations():
    rng = np.random.default_rng(9)
    base = rng.normal(size=(2, 10))
    series = [matrix_of(planar(30.0 * t) @ base, timestep=t) for t in range(4)]
    for matrix in align_series(series):
        np.testing.assert_allclose(matrix.values, base, atol=1e-8)


def test_empty_series_is_an_error():
    with pytest.raises(AlignmentError):
        align_series([])


@pytest.mark.parametrize("seed", range(5))
def test_alignment_brings_independent_embeddings_closer(seed):
    edges = [TemporalEdge(f"v{u}", f"v{(u + k) % 12}", 1) for u in range(12) for k in (1, 2)]
    snapshot = build_snapshots(TemporalGraph.from_edges(edges), 1).snapshots[0]
    node_index = {node: i for i, node in enumerate(snapshot.nodes())}
    cfg = SkipGramConfig(dimension=4, window=3, epochs=3)
    runs = [
        train_skipgram(generate_walks(snapshot, WalkConfig(num_walks=10, walk_length=15, seed=10 * seed + k)),
                       SkipGramConfig(**{**cfg.to_dict(), "seed": 10 * seed + k}), node_index, timestep=k)
        for k in range(2)
    ]
    before = np.linalg.norm(runs[1].values - runs[0].values)
    aligned = align_series(runs)
    after = np.linalg.norm(aligned[1].values - aligned[0].values)
    assert after < before


def test_orthogonality_residual_values():
    assert orthogonality_residual(np.eye(3)) == 0.0
    assert orthogonality_residual(np.eye(4)[[2, 0, 3, 1]]) == 0.0
    assert orthogonality_residual(2 * np.eye(3)) == pytest.approx(3 * math.sqrt(3))
    assert orthogonality_residual(RotationMatrix.identity(2)) == 0.0


def test_penalized_refinement_does_not_worsen_objective():
    rng = np.random.default_rng(11)
    source, target = rng.normal(size=(3, 20)), rng.normal(size=(3, 20))
    closed = solve_procrustes(source, target)
    refined = refine_penalized(closed, source, target)

    def objective(r):
        return np.linalg.norm(r @ source - target) ** 2 + np.linalg.norm(r.T @ r - np.eye(3)) ** 2

    assert objective(refined) <= objective(closed) + 1e-9
    assert orthogonality_residual(nearest_orthogonal(refined)) <= 1e-8


@pytest.mark.parametrize("proper", [False, True])
@pytest.mark.parametrize("seed", range(5))
def test_refined_rotations_stay_orthogonal(seed, proper):
    rng = np.random.default_rng(40 + seed)
    prev = matrix_of(rng.normal(size=(4, 15)))
    nxt = matrix_of(rng.normal(size=(4, 15)), timestep=1)
    rotation = procrustes_align(nxt, prev, proper=proper, refine=True)
    assert orthogonality_residual(rotation) <= 1e-8
    if proper:
        assert np.linalg.det(rotation.values) == pytest.approx(1.0)
    _, rotations = align_series_with_rotations([prev, nxt], refine=True)
    assert all(orthogonality_residual(r) <= 1e-8 for r in rotations)


def test_nearest_orthogonal_keeps_rotations():
    rotation = random_orthogonal(np.random.default_rng(13), 1, 3)[0]
    np.testing.assert_allclose(nearest_orthogonal(rotation), rotation, atol=1e-12)
    np.testing.assert_allclose(nearest_orthogonal(2.5 * rotation), rotation, atol=1e-12)


def test_rotation_tsv_export(tmp_path):
    rotation = RotationMatrix(planar(45.0), timestep=2)
    export_rotation_tsv(rotation, tmp_path / "r" / "step_002.tsv")
    rows = [[float(x) for x in line.split("\t")] for line in (tmp_path / "r" / "step_002.tsv").read_text().splitlines()]
    np.testing.assert_array_equal(np.array(rows), rotation.values)


def test_realigning_an_aligned_series_gives_identity():
    rng = np.random.default_rng(12)
    series = [matrix_of(random_orthogonal(rng, 1, 3)[0] @ rng.normal(size=(3, 8)), timestep=t) for t in range(3)]
    _, rotations = align_series_with_rotations(align_series(series))
    for rotation in rotations:
        np.testing.assert_allclose(rotation.values, np.eye(3), atol=1e-6)


def test_alignment_preserves_cosine_similarities():
    rng = np.random.default_rng(13)
    series = [matrix_of(rng.normal(size=(3, 7)), timestep=t) for t in range(3)]

    def cosines(values):
        unit = values / np.linalg.norm(values, axis=0)
        return unit.T @ unit

    for before, after in zip(series, align_series(series)):
        np.testing.assert_allclose(cosines(after.values), cosines(before.values), atol=1e-10)
