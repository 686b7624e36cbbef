import json
from pathlib import Path

from src.pipeline.cli import build_parser, main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def test_synth_writes_edges_and_report(tmp_path, capsys):
    out = tmp_path / "synth"
    code = main(["synth", "--n", "20", "--m", "40", "--T", "4", "--target", "linear", "--seed", "2", "--out", str(out)])
    assert code == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed["edges_per_step"] == [10, 10, 10, 10]
    assert len((out / "edges.tsv").read_text().splitlines()) == 40
    assert json.loads((out / "synth_report.json").read_text())["config"]["seed"] == 2


def test_ingest_prints_statistics(capsys):
    code = main(["ingest", "--edges", str(CONFIGS / "data" / "toy_edges.tsv")])
    assert code == 0
    stats = json.loads(capsys.readouterr().out)
    assert stats["nodes"] == 12


def test_ingest_from_config(capsys):
    assert main(["ingest", "--config", str(CONFIGS / "nodeclass_toy.toml")]) == 0
    assert json.loads(capsys.readouterr().out)["nodes"] == 12


def test_snapshot_command(capsys):
    code = main(["snapshot", "--config", str(CONFIGS / "nodeclass_toy.toml")])
    assert code == 0
    result = json.loads(capsys.readouterr().out)
    assert result["T"] == 4
    assert len(result["snapshots"]) == 4


def test_stage_failure_exits_with_json(tmp_path, capsys):
    code = main(["ingest", "--edges", str(tmp_path / "missing.tsv")])
    assert code == 1
    err = capsys.readouterr().err
    assert '"stage": "ingest"' in err
    assert '"error": "stage_failed"' in err


def test_bad_override_fails_in_config_stage(capsys):
    code = main(["train", "--config", str(CONFIGS / "nodeclass_toy.toml"), "--set", "walk.p=-1"])
    assert code == 1
    assert '"stage": "config"' in capsys.readouterr().err


def test_eval_needs_a_run_directory(capsys):
    assert main(["eval"]) == 1
    assert '"stage": "eval"' in capsys.readouterr().err


def test_parser_common_options():
    args = build_parser().parse_args(["train", "--config", "c.toml", "--seed", "4", "--no-deterministic", "--set", "T=3"])
    assert args.seed == 4 and args.deterministic is False and args.set == ["T=3"]
