from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict, List, Mapping

import pandas as pd

REPORT_COLUMNS = ["config_id", "seed", "metric", "value"]


def build_report(
    task: str,
    dataset: str,
    seed: int,
    metrics: Mapping[str, float],
    config: Mapping[str, Any],
    extra: Mapping[str, Any] | None = None,
) -> Dict[str, Any]:
    report: Dict[str, Any] = {
        "task": task,
        "dataset": dataset,
        "seed": seed,
        "metrics": {name: float(value) for name, value in metrics.items()},
        "config": dict(config),
    }
    if extra:
        report.update(extra)
    return report


def dumps_report(report: Mapping[str, Any]) -> str:
    return json.dumps(report, indent=2, sort_keys=True, ensure_ascii=False)


def write_report(report: Mapping[str, Any], path: Path) -> None:
    path.write_text(dumps_report(report) + "\n", encoding="utf-8")


def load_report(path: Path) -> Dict[str, Any]:
    return json.loads(path.read_text(encoding="utf-8"))


def report_rows(config_id: str, report: Mapping[str, Any]) -> List[Dict[str, Any]]:
    return [
        {"config_id": config_id, "seed": report.get("seed"), "metric": name, "value": value}
        for name, value in sorted(report.get("metrics", {}).items())
    ]


def write_rows_csv(rows: List[Dict[str, Any]], path: Path) -> pd.DataFrame:
    frame = pd.DataFrame(rows, columns=REPORT_COLUMNS)
    frame.to_csv(path, index=False)
    return frame
