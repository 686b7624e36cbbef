from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv

from src.data.synthetic import SynthConfig, generate_with_report
from src.data.temporal_graph import (
    build_snapshots,
    collapse_multi_edges,
    graph_statistics,
    ingest_edge_list,
    snapshot_statistics,
    write_edge_list,
)
from src.embedding.alignment import align_series_with_rotations, export_rotation_tsv
from src.embedding.matrix import read_series, write_series
from src.pipeline.config_loader import load_config_file, load_run_config
from src.pipeline.runner import (
    build_series,
    embed_series,
    evaluate_run,
    load_graph,
    prepare_task,
    run_pipeline,
    stage,
)
from src.pipeline.suite import run_experiment_suite, summarize
from src.pipeline.types import RunConfig, StageError


def _json_dumps(value: object) -> str:
    return json.dumps(value, default=str, indent=2, ensure_ascii=False)


def _run_config(args: argparse.Namespace) -> RunConfig:
    with stage("config"):
        return load_run_config(
            args.config,
            args.set,
            seed=args.seed,
            output_dir=args.out,
            cache_dir=args.cache_dir,
            deterministic=args.deterministic,
        )


def _out_dir(args: argparse.Namespace, default: str) -> Path:
    out = Path(args.out or default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_ingest(args: argparse.Namespace) -> Dict[str, Any]:
    if args.edges:
        with stage("ingest"):
            graph = ingest_edge_list(args.edges, directed=args.directed, weighted=args.weighted)
            if args.granularity:
                graph = collapse_multi_edges(graph, args.granularity)
    else:
        cfg = _run_config(args)
        with stage("ingest"):
            graph, _ = load_graph(cfg)
    return graph_statistics(graph)


def cmd_snapshot(args: argparse.Namespace) -> Dict[str, Any]:
    cfg = _run_config(args)
    with stage("ingest"):
        graph, _ = load_graph(cfg)
    with stage("split"):
        data = prepare_task(cfg, graph)
    with stage("snapshot"):
        series = build_snapshots(data.graph, cfg.T)
    return {"T": len(series), "boundaries": series.boundaries, "snapshots": snapshot_statistics(series)}


def cmd_embed(args: argparse.Namespace) -> Dict[str, Any]:
    cfg = _run_config(args)
    with stage("ingest"):
        graph, _ = load_graph(cfg)
    with stage("split"):
        data = prepare_task(cfg, graph)
    with stage("snapshot"):
        series, steps = build_series(cfg, data.graph)
    with stage("embed"):
        matrices = embed_series(cfg, series)
        paths = write_series(matrices, Path(cfg.output_dir) / "embeddings")
    return {"steps": steps, "dimension": matrices[0].dimension, "files": [str(p) for p in paths]}


def cmd_align(args: argparse.Namespace) -> Dict[str, Any]:
    out = _out_dir(args, "runs/aligned")
    source = Path(args.embeddings or out / "embeddings")
    with stage("align"):
        matrices = read_series(source)
        aligned, rotations = align_series_with_rotations(matrices, proper=args.proper, refine=args.refine)
        paths = write_series(aligned, out / "aligned")
        for rotation in rotations:
            export_rotation_tsv(rotation, out / "rotations" / f"step_{rotation.timestep:03d}.tsv")
    return {"steps": len(aligned), "files": [str(p) for p in paths]}


def cmd_train(args: argparse.Namespace) -> Dict[str, Any]:
    return run_pipeline(_run_config(args))


def cmd_eval(args: argparse.Namespace) -> Dict[str, Any]:
    run_dir = args.run or args.out
    if not run_dir:
        raise StageError("eval", ValueError("eval needs --run DIR (or --out)"))
    return evaluate_run(run_dir)


def cmd_synth(args: argparse.Namespace) -> Dict[str, Any]:
    with stage("config"):
        raw: Dict[str, Any] = load_config_file(args.config).get("synthetic", {}) if args.config else {}
        for key in ("n", "m", "T", "target"):
            value = getattr(args, f"synth_{key}")
            if value is not None:
                raw[key] = value
        if args.seed is not None:
            raw["seed"] = args.seed
        cfg = SynthConfig(**raw)
    with stage("synth"):
        graph, report = generate_with_report(cfg)
        out = _out_dir(args, "runs/synthetic")
        write_edge_list(graph, out / "edges.tsv")
        (out / "synth_report.json").write_text(_json_dumps(report) + "\n", encoding="utf-8")
    return report


def cmd_suite(args: argparse.Namespace) -> Dict[str, Any]:
    out = _out_dir(args, "runs/suite")
    with stage("suite"):
        result = run_experiment_suite(
            args.suite,
            out,
            workers=args.workers,
            deterministic=True if args.deterministic is None else args.deterministic,
        )
    return {
        "csv": str(out / "suite.csv"),
        "rows": len(result.rows),
        "failures": result.failures,
        "summary": summarize(result.table).to_dict(orient="records"),
    }


COMMANDS = {
    "ingest": cmd_ingest,
    "snapshot": cmd_snapshot,
    "embed": cmd_embed,
    "align": cmd_align,
    "train": cmd_train,
    "eval": cmd_eval,
    "synth": cmd_synth,
    "suite": cmd_suite,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Run config file (TOML or JSON).")
    common.add_argument("--seed", type=int, help="Run seed; offsets walk, skip-gram and training seeds.")
    common.add_argument("--out", help="Output directory (default: $TNODE_OUT_DIR or runs/latest).")
    common.add_argument("--deterministic", action=argparse.BooleanOptionalAction, default=None)
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="Override a config key.")
    common.add_argument("--cache-dir", help="Embedding cache directory (default: $TNODE_CACHE_DIR).")
    common.add_argument("--verbose", action="store_true", help="Log at DEBUG level.")

    parser = argparse.ArgumentParser(prog="tnode", description="Temporal node embeddings for link prediction and node classification.")
    sub = parser.add_subparsers(dest="command", required=True)

    ingest = sub.add_parser("ingest", parents=[common], help="Parse an edge list and print graph statistics.")
    ingest.add_argument("--edges", help="Edge TSV (src dst timestamp [weight]).")
    ingest.add_argument("--directed", action="store_true")
    ingest.add_argument("--weighted", action="store_true")
    ingest.add_argument("--granularity", type=int, help="Collapse multi-edges into buckets of this width.")

    sub.add_parser("snapshot", parents=[common], help="Build cumulative snapshots and print their statistics.")
    sub.add_parser("embed", parents=[common], help="Embed every snapshot and write the raw series.")

    align = sub.add_parser("align", parents=[common], help="Procrustes-align an embedding series.")
    align.add_argument("--embeddings", help="Directory with step_*.tnem files (default: OUT/embeddings).")
    align.add_argument("--proper", action="store_true", help="Force det(R) = +1.")
    align.add_argument("--refine", action="store_true", help="Refine with the orthogonality-penalized objective.")

    sub.add_parser("train", parents=[common], help="Run the full pipeline and write the report.")

    evaluate = sub.add_parser("eval", parents=[common], help="Recompute metrics from a run directory.")
    evaluate.add_argument("--run", help="Run directory holding model.npz and split.json.")

    synth = sub.add_parser("synth", parents=[common], help="Generate a synthetic temporal graph.")
    synth.add_argument("--n", dest="synth_n", type=int)
    synth.add_argument("--m", dest="synth_m", type=int)
    synth.add_argument("--T", dest="synth_T", type=int)
    synth.add_argument("--target", dest="synth_target")

    suite = sub.add_parser("suite", parents=[common], help="Run an experiment suite and aggregate metrics.")
    suite.add_argument("suite", help="Suite file (TOML or JSON).")
    suite.add_argument("--workers", type=int, default=1, help="Parallel processes.")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        result = COMMANDS[args.command](args)
    except StageError as exc:
        print(_json_dumps(exc.to_dict()), file=sys.stderr)
        return 1
    print(_json_dumps(result))
    return 0


if __name__ == "__main__":
    sys.exit(main())
