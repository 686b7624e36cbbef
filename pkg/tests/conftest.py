import numpy as np
import pytest

from src.embedding.matrix import EmbeddingMatrix
from src.model.temporal_model import TemporalModel


def random_series(rng, steps, dimension, nodes, scale=1.0):
    """Embedding series where node k first appears at step k % steps."""
    node_index = {node: i for i, node in enumerate(nodes)}
    series = []
    for step in range(steps):
        present = [node for k, node in enumerate(nodes) if k % steps <= step]
        series.append(EmbeddingMatrix(rng.normal(scale=scale, size=(dimension, len(present))), present, node_index, step))
    return series


@pytest.fixture
def make_model():
    def factory(task="link", combiner="lstm", steps=3, dimension=2, num_classes=2, nodes=6, seed=0, randomize=True):
        rng = np.random.default_rng(seed)
        names = [f"n{i}" for i in range(nodes)]
        model = TemporalModel(
            task, random_series(rng, steps, dimension, names), num_classes=num_classes, combiner=combiner, seed=seed
        )
        if randomize:
            for value in model.parameters(include_embeddings=False).values():
                value[...] = rng.normal(scale=0.5, size=value.shape)
        return model

    return factory
