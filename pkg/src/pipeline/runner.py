from __future__ import annotations

import json
import logging
import os
import shutil
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Tuple

import numpy as np

from src.data.cache import DiskCache
from src.data.splits import LinkSplit, NodeSplit, load_split, save_split, select_pivot, split_link_prediction
from src.data.splits import split_node_classification
from src.data.synthetic import generate_with_report
from src.data.temporal_graph import (
    SnapshotSeries,
    TemporalGraph,
    build_snapshots,
    collapse_multi_edges,
    ingest_edge_list,
    load_labels,
    select_subset,
)
from src.embedding.alignment import RotationMatrix, align_series_with_rotations, export_rotation_tsv
from src.embedding.matrix import EmbeddingMatrix, write_series
from src.embedding.static import embed_snapshots
from src.evaluation.metrics import MetricError, auc, macro_f1, micro_f1, multiclass_auc, scored
from src.evaluation.reports import build_report, load_report, write_report
from src.model.temporal_model import TemporalModel
from src.model.training import load_checkpoint, save_checkpoint, train, write_loss_trace
from src.pipeline.types import RunConfig, StageError

logger = logging.getLogger(__name__)


def _event(payload: Dict[str, Any]) -> None:
    logger.info(json.dumps(payload, ensure_ascii=False, default=str))


@contextmanager
def stage(name: str) -> Iterator[None]:
    _event({"event": "stage_start", "stage": name})
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        _event({"event": "stage_failed", "stage": name, "message": str(exc)})
        raise StageError(name, exc) from exc
    _event({"event": "stage_done", "stage": name})


@dataclass
class TaskData:
    split: LinkSplit | NodeSplit
    graph: TemporalGraph
    num_classes: int
    class_names: List[str]


def load_graph(cfg: RunConfig) -> Tuple[TemporalGraph, Optional[Dict[str, Any]]]:
    if cfg.synthetic is not None:
        graph, synth_report = generate_with_report(cfg.synthetic)
    else:
        graph = ingest_edge_list(cfg.edges, directed=cfg.directed, weighted=cfg.weighted)
        synth_report = None
    if cfg.granularity is not None:
        graph = collapse_multi_edges(graph, cfg.granularity)
    return graph, synth_report


def prepare_task(cfg: RunConfig, graph: TemporalGraph) -> TaskData:
    """Split the data; link prediction keeps only pre-pivot edges for every later stage."""
    if cfg.task == "link":
        pivot = select_pivot(graph, cfg.train_fraction)
        split = split_link_prediction(graph, pivot, seed=cfg.seed)
        return TaskData(split, graph.until(pivot), 2, ["absent", "present"])
    labels, class_names = load_labels(cfg.labels)
    split = split_node_classification(labels, cfg.train_fraction, seed=cfg.seed, graph=graph)
    return TaskData(split, graph, len(class_names), class_names)


def snapshot_steps(cfg: RunConfig, count: int) -> List[int]:
    if cfg.combiner == "static":
        return [count - 1]
    return select_subset(count, cfg.timestep_fraction)


def build_series(cfg: RunConfig, graph: TemporalGraph) -> Tuple[SnapshotSeries, List[int]]:
    series = build_snapshots(graph, cfg.T)
    steps = snapshot_steps(cfg, len(series))
    return series.subset(steps), steps


def _cache(cfg: RunConfig) -> Optional[DiskCache]:
    cache_dir = cfg.cache_dir or os.getenv("TNODE_CACHE_DIR")
    return DiskCache(Path(cache_dir)) if cache_dir else None


def embed_series(cfg: RunConfig, series: SnapshotSeries) -> List[EmbeddingMatrix]:
    # the run seed offsets every component seed so suite seeds vary the whole pipeline
    walk = replace(cfg.walk, seed=cfg.walk.seed + cfg.seed)
    skipgram = replace(cfg.skipgram, seed=cfg.skipgram.seed + cfg.seed)
    if cfg.deterministic and skipgram.workers > 1:
        logger.info("deterministic run: skip-gram workers %d -> 1", skipgram.workers)
        skipgram = replace(skipgram, workers=1)
    return embed_snapshots(series, walk, skipgram, cache=_cache(cfg))


def align_embeddings(
    cfg: RunConfig, matrices: List[EmbeddingMatrix]
) -> Tuple[List[EmbeddingMatrix], List[RotationMatrix]]:
    if not cfg.alignment:
        return list(matrices), []
    return align_series_with_rotations(matrices, proper=cfg.proper_rotation, refine=cfg.refine_rotation)


def evaluate_model(model: TemporalModel, split: LinkSplit | NodeSplit) -> Dict[str, float]:
    """Test metrics plus their train-set counterparts prefixed with `train_`."""
    metrics: Dict[str, float] = {}
    for prefix, examples in (("", split.test_examples()), ("train_", split.train_examples())):
        labels = [label for _, label in examples]
        if isinstance(split, LinkSplit):
            metrics[f"{prefix}auc"] = auc(scored(model.scores(examples), labels))
            continue
        probabilities = model.probabilities(examples)
        predictions = probabilities.argmax(axis=1).tolist()
        metrics[f"{prefix}micro_f1"] = micro_f1(predictions, labels, model.num_classes)
        metrics[f"{prefix}macro_f1"] = macro_f1(predictions, labels, model.num_classes)
        try:
            metrics[f"{prefix}auc"] = multiclass_auc(probabilities, labels, model.num_classes)
        except MetricError as exc:
            logger.warning("multiclass AUC unavailable: %s", exc)
    return metrics


def _publish(staging: Path, output_dir: Path) -> None:
    if output_dir.exists():
        shutil.rmtree(output_dir)
    staging.rename(output_dir)


def run_pipeline(cfg: RunConfig) -> Dict[str, Any]:
    """ingest -> split -> snapshot -> embed -> align -> train -> evaluate; returns the report.

    Outputs are written to a staging directory next to `cfg.output_dir` and
    moved into place only when every stage succeeded.
    """
    output_dir = Path(cfg.output_dir)
    output_dir.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=f".{output_dir.name}-", dir=output_dir.parent))
    try:
        report = _run_stages(cfg, staging)
        with stage("write"):
            _publish(staging, output_dir)
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise
    return report


def _run_stages(cfg: RunConfig, out: Path) -> Dict[str, Any]:
    with stage("ingest"):
        graph, synth_report = load_graph(cfg)
    with stage("split"):
        data = prepare_task(cfg, graph)
        save_split(data.split, out / "split.json")
    with stage("snapshot"):
        series, steps = build_series(cfg, data.graph)
    with stage("embed"):
        matrices = embed_series(cfg, series)
    with stage("align"):
        aligned, rotations = align_embeddings(cfg, matrices)
        write_series(aligned, out / "embeddings")
        for rotation in rotations:
            export_rotation_tsv(rotation, out / "rotations" / f"step_{rotation.timestep:03d}.tsv")
    with stage("train"):
        model = TemporalModel(
            cfg.task,
            aligned,
            num_classes=data.num_classes,
            combiner=cfg.combiner,
            directed=graph.directed,
            seed=cfg.seed,
        )
        result = train(model, data.split.train_examples(), replace(cfg.train, seed=cfg.train.seed + cfg.seed))
        write_loss_trace(result.losses, out / "loss_trace.csv")
        save_checkpoint(model, out / "model.npz", config=cfg.to_dict())
    with stage("evaluate"):
        metrics = evaluate_model(model, data.split)
        extra: Dict[str, Any] = {
            "snapshot_steps": steps,
            "boundaries": series.boundaries,
            "loss_trace": result.losses,
            "class_names": data.class_names,
        }
        if isinstance(data.split, LinkSplit):
            extra["pivot"] = data.split.pivot
        else:
            extra["metric_notes"] = {"auc": "macro one-vs-rest over classes with both outcomes"}
        if synth_report is not None:
            extra["synthetic"] = {
                "degree_l1_distance": synth_report["degree_l1_distance"],
                "clustering_coefficient": synth_report["clustering_coefficient"],
            }
        report = build_report(cfg.task, cfg.dataset, cfg.seed, metrics, cfg.to_dict(), extra)
        write_report(report, out / "report.json")
    _event({"event": "run_done", "task": cfg.task, "dataset": cfg.dataset, "metrics": metrics})
    return report


def evaluate_run(run_dir: Path | str) -> Dict[str, Any]:
    """Recompute metrics from a finished run's checkpoint and split."""
    run_dir = Path(run_dir)
    with stage("eval"):
        model, meta = load_checkpoint(run_dir / "model.npz")
        split = load_split(run_dir / "split.json")
        metrics = evaluate_model(model, split)
        previous = load_report(run_dir / "report.json") if (run_dir / "report.json").exists() else {}
    config = meta.get("config", {})
    return {
        "task": model.task,
        "dataset": config.get("dataset", previous.get("dataset", "")),
        "seed": config.get("seed", previous.get("seed")),
        "metrics": metrics,
        "matches_report": bool(previous)
        and all(np.isclose(previous["metrics"].get(k, np.nan), v) for k, v in metrics.items()),
    }
