import re
from pathlib import Path

import pytest
from scipy.stats import spearmanr

from src.pipeline.suite import load_suite, run_experiment_suite

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def suite_auc(name, out_dir):
    result = run_experiment_suite(CONFIGS / name, out_dir, workers=4)
    assert result.failures == []
    table = result.table
    return table[table["metric"] == "auc"]


def mean_auc(frame, config_id):
    values = frame.loc[frame["config_id"] == config_id, "value"]
    assert len(values) == 5
    return values.mean()


def test_reproduction_suites_freeze_embeddings():
    for name in ("suite_static_baseline.toml", "suite_alignment_ablation.toml", "suite_timesteps.toml"):
        jobs = load_suite(CONFIGS / name)
        assert {job.seed for job in jobs} == {0, 1, 2, 3, 4}
        for job in jobs:
            assert job.config["train"]["finetune_embeddings"] is False
            assert job.config["T"] == 16
            assert job.config["synthetic"]["T"] == 20
    ablation = load_suite(CONFIGS / "suite_alignment_ablation.toml")
    assert {job.config["synthetic"]["target"] for job in ablation} == {"logarithmic"}


@pytest.mark.slow
def test_temporal_model_beats_static_baseline(tmp_path):
    frame = suite_auc("suite_static_baseline.toml", tmp_path)
    assert mean_auc(frame, "temporal") >= mean_auc(frame, "static") + 0.03


@pytest.mark.slow
def test_alignment_helps_on_least_clustered_graph(tmp_path):
    frame = suite_auc("suite_alignment_ablation.toml", tmp_path)
    assert mean_auc(frame, "aligned") >= mean_auc(frame, "unaligned")


@pytest.mark.slow
def test_auc_grows_with_timestep_fraction(tmp_path):
    frame = suite_auc("suite_timesteps.toml", tmp_path)
    fractions = [float(re.search(r"timestep_fraction=([0-9.]+)", config_id).group(1)) for config_id in frame["config_id"]]
    assert sorted(set(fractions)) == [0.2, 0.4, 0.6, 0.8, 1.0]
    rho, _ = spearmanr(fractions, frame["value"])
    assert rho > 0
