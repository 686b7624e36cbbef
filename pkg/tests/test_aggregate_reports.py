import json

from scripts.aggregate_reports import collect_reports


def write_report(path, seed, value):
    path.mkdir(parents=True)
    report = {
        "task": "link",
        "dataset": "synthetic-linear",
        "seed": seed,
        "metrics": {"auc": value},
        "config": {"combiner": "lstm", "alignment": True, "timestep_fraction": 1.0},
    }
    (path / "report.json").write_text(json.dumps(report), encoding="utf-8")


def test_collects_suite_layout(tmp_path):
    write_report(tmp_path / "aligned" / "seed_0", 0, 0.7)
    write_report(tmp_path / "aligned" / "seed_1", 1, 0.8)
    write_report(tmp_path / "single", 0, 0.6)
    (tmp_path / "other.json").write_text("{}", encoding="utf-8")
    rows = collect_reports(tmp_path)
    assert [(row["config_id"], row["seed"], row["auc"]) for row in rows] == [
        ("aligned", 0, 0.7),
        ("aligned", 1, 0.8),
        ("single", 0, 0.6),
    ]
    assert rows[0]["combiner"] == "lstm"
