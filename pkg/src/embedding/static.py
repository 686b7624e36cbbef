from __future__ import annotations

import logging
from dataclasses import replace
from typing import List, Optional

import networkx as nx

from src.data.cache import DiskCache, digest_key
from src.data.temporal_graph import SnapshotSeries
from src.embedding.matrix import EmbeddingMatrix
from src.embedding.skipgram import SkipGramConfig, train_skipgram
from src.embedding.walks import WalkConfig, generate_walks

logger = logging.getLogger(__name__)


def _snapshot_key(snapshot: nx.Graph, wcfg: WalkConfig, scfg: SkipGramConfig) -> str:
    edges = sorted((str(u), str(v), float(data.get("weight", 1.0))) for u, v, data in snapshot.edges(data=True))
    return digest_key(
        {
            "directed": snapshot.is_directed(),
            "nodes": list(snapshot.nodes()),
            "edges": edges,
            "walk": wcfg.to_dict(),
            "skipgram": scfg.to_dict(),
        }
    )


def embed_snapshot(
    snapshot: nx.Graph,
    node_index,
    wcfg: WalkConfig,
    scfg: SkipGramConfig,
    timestep: int = 0,
    cache: Optional[DiskCache] = None,
) -> EmbeddingMatrix:
    key = _snapshot_key(snapshot, wcfg, scfg) if cache is not None else None
    if cache is not None:
        cached = cache.get(key)
        if cached is not None:
            logger.debug("embedding cache hit for step %d", timestep)
            return EmbeddingMatrix(cached["values"], list(cached["meta"]["nodes"]), node_index, timestep)

    corpus = generate_walks(snapshot, wcfg)
    matrix = train_skipgram(corpus, scfg, node_index, nodes=list(snapshot.nodes()), timestep=timestep)
    if cache is not None:
        cache.set(key, {"values": matrix.values}, meta={"nodes": matrix.nodes})
    return matrix


def embed_snapshots(
    series: SnapshotSeries,
    wcfg: WalkConfig,
    scfg: SkipGramConfig,
    cache: Optional[DiskCache] = None,
) -> List[EmbeddingMatrix]:
    """One static embedding per snapshot; every step gets its own walk and skip-gram seed."""
    matrices = []
    for step, snapshot in enumerate(series.snapshots):
        step_walk = replace(wcfg, seed=wcfg.seed + step)
        step_skipgram = replace(scfg, seed=scfg.seed + step)
        matrices.append(embed_snapshot(snapshot, series.node_index, step_walk, step_skipgram, step, cache))
        logger.info("embedded step %d/%d (%d nodes)", step + 1, len(series), snapshot.number_of_nodes())
    return matrices
