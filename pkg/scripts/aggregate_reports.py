from __future__ import annotations

import argparse
import json
from pathlib import Path
from typing import Any, Dict, List

import pandas as pd


def _load_json(path: Path) -> Any:
    with path.open("r", encoding="utf-8") as handle:
        return json.load(handle)


def _config_id(report: Dict[str, Any], path: Path, root: Path) -> str:
    # runs/<config_id>/seed_<n>/report.json as laid out by the suite runner
    relative = path.parent.relative_to(root)
    if relative.parent.name and relative.name.startswith("seed_"):
        return str(relative.parent)
    return str(relative) if str(relative) != "." else report.get("dataset", "run")


def collect_reports(root: Path) -> List[Dict[str, Any]]:
    rows: List[Dict[str, Any]] = []
    for path in sorted(root.rglob("report.json")):
        report = _load_json(path)
        if not isinstance(report, dict) or "metrics" not in report:
            continue
        config = report.get("config", {})
        row: Dict[str, Any] = {
            "config_id": _config_id(report, path, root),
            "task": report.get("task"),
            "dataset": report.get("dataset"),
            "seed": report.get("seed"),
            "combiner": config.get("combiner"),
            "alignment": config.get("alignment"),
            "timestep_fraction": config.get("timestep_fraction"),
        }
        row.update(report["metrics"])
        rows.append(row)
    return rows


def main() -> None:
    parser = argparse.ArgumentParser(description="Collect run reports into one wide CSV table.")
    parser.add_argument("root", help="Directory searched recursively for report.json files.")
    parser.add_argument("--output", help="Output CSV path (default: ROOT/reports.csv)")
    parser.add_argument("--summary", action="store_true", help="Also print per-config mean/std over seeds.")
    args = parser.parse_args()

    root = Path(args.root)
    rows = collect_reports(root)
    if not rows:
        raise SystemExit(f"no report.json files under {root}")
    frame = pd.DataFrame(rows).sort_values(["config_id", "seed"])
    output_path = Path(args.output) if args.output else root / "reports.csv"
    frame.to_csv(output_path, index=False)

    if args.summary:
        metrics = sorted({name for path in root.rglob("report.json") for name in _load_json(path).get("metrics", {})})
        summary = frame.groupby("config_id")[metrics].agg(["mean", "std"])
        print(summary.to_string())
    print(f"Wrote {len(frame)} rows to {output_path}")


if __name__ == "__main__":
    main()
