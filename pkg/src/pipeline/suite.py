from __future__ import annotations

import itertools
import json
import logging
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import pandas as pd

from src.evaluation.reports import report_rows, write_rows_csv
from src.pipeline.config_loader import PATH_KEYS, load_config_file, merge_dicts, run_config_from_dict, set_dotted
from src.pipeline.runner import run_pipeline
from src.pipeline.types import StageError

logger = logging.getLogger(__name__)


@dataclass
class SuiteJob:
    config_id: str
    seed: int
    config: Dict[str, Any] = field(default_factory=dict)


@dataclass
class SuiteResult:
    rows: List[Dict[str, Any]]
    failures: List[Dict[str, Any]]
    table: pd.DataFrame


def _format_value(value: Any) -> str:
    return value if isinstance(value, str) else json.dumps(value)


def _apply_settings(data: Dict[str, Any], settings: Dict[str, Any]) -> Dict[str, Any]:
    for key, value in settings.items():
        if isinstance(value, dict) and isinstance(data.get(key), dict):
            data[key] = merge_dicts(data[key], value)
        else:
            set_dotted(data, key, value)
    return data


def expand_sweep(run_id: str, sweep: Dict[str, List[Any]]) -> List[Tuple[str, Dict[str, Any]]]:
    """Cartesian product of a sweep table as (derived id, dotted settings) pairs."""
    if not sweep:
        return [(run_id, {})]
    keys = sorted(sweep)
    for key in keys:
        if not isinstance(sweep[key], list) or not sweep[key]:
            raise ValueError(f"sweep values for {key!r} must be a non-empty list")
    variants = []
    for combo in itertools.product(*(sweep[key] for key in keys)):
        label = ",".join(f"{key}={_format_value(value)}" for key, value in zip(keys, combo))
        variants.append((f"{run_id}[{label}]", dict(zip(keys, combo))))
    return variants


def load_suite(path: Path | str) -> List[SuiteJob]:
    """Expand a suite file into one job per (run entry, sweep point, seed).

    Suite keys: `config` (base run file, relative to the suite), `base` (inline
    base table), `seeds` (default seed list) and `[[runs]]` entries with `id`,
    optional `seeds`, `set` (overrides) and `sweep` (value lists per dotted key).
    """
    path = Path(path)
    suite = load_config_file(path)
    base: Dict[str, Any] = {}
    if suite.get("config"):
        base = load_config_file((path.parent / suite["config"]).resolve())
    inline = dict(suite.get("base", {}))
    for key in PATH_KEYS:
        if isinstance(inline.get(key), str) and not Path(inline[key]).is_absolute():
            inline[key] = str((path.parent / inline[key]).resolve())
    base = merge_dicts(base, inline)
    default_seeds = suite.get("seeds", [0])

    jobs: List[SuiteJob] = []
    seen = set()
    for index, entry in enumerate(suite.get("runs", [])):
        run_id = str(entry.get("id") or f"run{index}")
        if run_id in seen:
            raise ValueError(f"duplicate suite run id {run_id!r}")
        seen.add(run_id)
        settings = _apply_settings(merge_dicts(base, {}), entry.get("set", {}))
        for config_id, swept in expand_sweep(run_id, entry.get("sweep", {})):
            config = _apply_settings(merge_dicts(settings, {}), swept)
            for seed in entry.get("seeds", default_seeds):
                jobs.append(SuiteJob(config_id, int(seed), config))
    return jobs


def _run_dir_name(config_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9._=-]+", "_", config_id).strip("_")


def _run_one(job: SuiteJob, out_dir: str, deterministic: bool) -> Tuple[List[Dict[str, Any]], Optional[Dict[str, Any]]]:
    data = dict(job.config)
    data["seed"] = job.seed
    data["deterministic"] = deterministic
    data["output_dir"] = str(Path(out_dir) / "runs" / _run_dir_name(job.config_id) / f"seed_{job.seed}")
    try:
        cfg = run_config_from_dict(data)
        report = run_pipeline(cfg)
    except StageError as exc:
        return [], {"config_id": job.config_id, "seed": job.seed, **exc.to_dict()}
    except Exception as exc:
        return [], {
            "config_id": job.config_id,
            "seed": job.seed,
            "error": "run_failed",
            "type": type(exc).__name__,
            "message": str(exc),
        }
    return report_rows(job.config_id, report), None


def run_experiment_suite(
    path: Path | str,
    out_dir: Path | str,
    workers: int = 1,
    deterministic: bool = True,
) -> SuiteResult:
    """Run every suite job and aggregate per-seed metrics into `suite.csv`; failed runs go to `failures.json`."""
    jobs = load_suite(path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    logger.info("suite %s: %d jobs, %d workers", path, len(jobs), workers)

    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_one, job, str(out), deterministic) for job in jobs]
            outcomes = [future.result() for future in futures]
    else:
        outcomes = [_run_one(job, str(out), deterministic) for job in jobs]

    rows: List[Dict[str, Any]] = []
    failures: List[Dict[str, Any]] = []
    for job_rows, failure in outcomes:
        rows.extend(job_rows)
        if failure is not None:
            logger.warning("suite run %s seed %s failed: %s", failure["config_id"], failure["seed"], failure["message"])
            failures.append(failure)

    table = write_rows_csv(rows, out / "suite.csv")
    (out / "failures.json").write_text(json.dumps(failures, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return SuiteResult(rows=rows, failures=failures, table=table)


def summarize(table: pd.DataFrame) -> pd.DataFrame:
    """Mean and standard deviation per (config_id, metric) over seeds."""
    if table.empty:
        return pd.DataFrame(columns=["config_id", "metric", "mean", "std", "runs"])
    grouped = table.groupby(["config_id", "metric"])["value"]
    summary = grouped.agg(["mean", "std", "count"]).reset_index()
    return summary.rename(columns={"count": "runs"})

