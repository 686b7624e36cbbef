import numpy as np
import pytest
from scipy.stats import spearmanr

from src.data.synthetic import (
    EXPONENTIAL_SPREAD,
    TARGET_SHAPES,
    SynthConfig,
    SynthesisError,
    exponential_spread,
    generate_temporal_graph,
    generate_with_report,
    target_degree_profile,
)


def test_linear_profile_small():
    profile = target_degree_profile(SynthConfig(n=5, m=5, T=1, target="linear"))
    assert profile.tolist() == [1, 1, 2, 3, 3]


@pytest.mark.parametrize("target", TARGET_SHAPES)
@pytest.mark.parametrize("n,m", [(10, 12), (30, 200), (100, 2000)])
def test_profile_sum_and_bounds(target, n, m):
    profile = target_degree_profile(SynthConfig(n=n, m=m, T=1, target=target))
    assert profile.sum() == 2 * m
    assert profile.min() >= 1
    assert profile.max() <= n - 1


def test_linear_profile_is_monotone():
    profile = target_degree_profile(SynthConfig(n=50, m=400, T=1, target="linear"))
    assert np.all(np.diff(profile) >= 0)


def test_infeasible_profile():
    with pytest.raises(SynthesisError):
        target_degree_profile(SynthConfig(n=4, m=1, T=1))


def test_config_validation():
    with pytest.raises(ValueError):
        SynthConfig(n=10, m=5, T=6)
    with pytest.raises(ValueError):
        SynthConfig(n=4, m=7, T=1)
    with pytest.raises(ValueError):
        SynthConfig(target="powerlaw")


def test_edges_per_step_and_timestamps():
    graph, report = generate_with_report(SynthConfig(n=20, m=23, T=5, seed=3))
    assert report["edges_per_step"] == [4, 4, 4, 4, 7]
    counts = np.bincount([edge.timestamp for edge in graph.edges], minlength=6)[1:]
    assert counts.tolist() == [4, 4, 4, 4, 7]
    pairs = [graph.pair(edge) for edge in graph.edges]
    assert len(set(pairs)) == len(pairs) == 23
    assert all(u != v for u, v in pairs)
    assert graph.nodes == [f"n{i}" for i in range(20)]


def test_report_matches_realized_graph():
    graph, report = generate_with_report(SynthConfig(n=30, m=150, T=10, seed=1))
    degree = {node: 0 for node in graph.nodes}
    for edge in graph.edges:
        degree[edge.src] += 1
        degree[edge.dst] += 1
    realized = [degree[f"n{i}"] for i in range(30)]
    assert report["realized_degrees"] == realized
    assert report["degree_l1_distance"] == int(np.abs(np.array(realized) - np.array(report["target_degrees"])).sum())
    assert 0.0 <= report["clustering_coefficient"] <= 1.0


def test_generation_is_seeded():
    cfg = SynthConfig(n=30, m=100, T=5, seed=9)
    first = generate_temporal_graph(cfg)
    second = generate_temporal_graph(cfg)
    assert first.edges == second.edges
    other = generate_temporal_graph(SynthConfig(n=30, m=100, T=5, seed=10))
    assert other.edges != first.edges


def test_saturated_graph_uses_every_pair():
    graph = generate_temporal_graph(SynthConfig(n=5, m=10, T=2))
    assert len({graph.pair(edge) for edge in graph.edges}) == 10


@pytest.mark.parametrize("seed", range(5))
def test_realized_degrees_follow_linear_target(seed):
    _, report = generate_with_report(SynthConfig(n=100, m=2000, T=20, target="linear", seed=seed))
    rho, _ = spearmanr(report["realized_degrees"], report["target_degrees"])
    assert rho > 0.9


def mean_clustering(target, n=100, m=2000, T=20, seeds=range(3)):
    return np.mean(
        [
            generate_with_report(SynthConfig(n=n, m=m, T=T, target=target, seed=seed))[1]["clustering_coefficient"]
            for seed in seeds
        ]
    )


def test_exponential_profile_spans_hundredfold_when_it_fits():
    assert exponential_spread(300, 3300) == EXPONENTIAL_SPREAD
    profile = target_degree_profile(SynthConfig(n=300, m=3300, T=1, target="exponential"))
    assert 90 <= profile.max() / profile.min() <= 110


def test_dense_exponential_profile_is_not_clipped():
    spread = exponential_spread(100, 2000)
    assert 5.0 < spread < 20.0
    profile = target_degree_profile(SynthConfig(n=100, m=2000, T=1, target="exponential"))
    assert 95 <= profile.max() <= 99
    assert (profile == 99).sum() <= 5
    assert np.all(np.diff(profile) >= 0)


def test_exponential_target_is_more_clustered_than_linear():
    assert mean_clustering("exponential", n=300, m=3300, T=10) > mean_clustering("linear", n=300, m=3300, T=10)


def test_logarithmic_target_has_lowest_clustering():
    cc = {target: mean_clustering(target, seeds=range(2)) for target in TARGET_SHAPES}
    assert min(cc, key=cc.get) == "logarithmic"
