"""Exact k-nearest-neighbor classification over embedding vectors.

No dimensionality reduction or oversampling is applied before
classification; the model stores the training vectors verbatim and scores
queries by the positive fraction among the k nearest points under
Euclidean distance with uniform weighting. Search is an exact linear scan;
distance ties are broken by ascending insertion index.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .io import Embedding


class DistanceMetric(Enum):
    EUCLIDEAN = "euclidean"


class WeightScheme(Enum):
    UNIFORM = "uniform"


@dataclass(frozen=True)
class KnnConfig:
    k: int = 5
    metric: DistanceMetric = DistanceMetric.EUCLIDEAN
    weighting: WeightScheme = WeightScheme.UNIFORM
    threshold: float = 0.5

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must lie in [0, 1]")


@dataclass(frozen=True)
class KnnModel:
    vectors: np.ndarray       # (n, dim)
    labels: np.ndarray        # (n,), values in {0, 1}
    ids: tuple[str, ...]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return self.vectors.shape[0]


@dataclass(frozen=True)
class Prediction:
    id: str
    score: float
    label: int


def knn_fit(embeddings: Sequence[Embedding], labels: Mapping[str, int],
            cfg: KnnConfig) -> KnnModel:
    """Store all labeled embeddings verbatim as the model."""
    if len(embeddings) < cfg.k:
        raise ValueError(f"need at least k={cfg.k} training points, "
                         f"got {len(embeddings)}")
    dim = len(embeddings[0].vector)
    vectors = np.empty((len(embeddings), dim))
    y = np.empty(len(embeddings), dtype=np.int64)
    ids = []
    for i, e in enumerate(embeddings):
        if len(e.vector) != dim:
            raise ValueError(f"embedding {e.id!r}: dimension {len(e.vector)} "
                             f"!= {dim}")
        if e.id not in labels:
            raise ValueError(f"no label for embedding {e.id!r}")
        if labels[e.id] not in (0, 1):
            raise ValueError(f"label for {e.id!r} must be 0 or 1")
        vectors[i] = e.vector
        y[i] = labels[e.id]
        ids.append(e.id)
    vectors.setflags(write=False)
    y.setflags(write=False)
    return KnnModel(vectors, y, tuple(ids))


def _check_query(model: KnnModel, query: np.ndarray) -> np.ndarray:
    query = np.asarray(query, dtype=np.float64)
    if query.shape != (model.dim,):
        raise ValueError(f"query dimension {query.shape} != ({model.dim},)")
    return query


def knn_score(model: KnnModel, query, cfg: KnnConfig) -> float:
    """Positive-neighbor fraction among the k nearest training points."""
    query = _check_query(model, query)
    if cfg.k > len(model):
        raise ValueError(f"k={cfg.k} exceeds training size {len(model)}")
    dist_sq = np.sum((model.vectors - query) ** 2, axis=1)
    order = np.argsort(dist_sq, kind="stable")[:cfg.k]
    return float(model.labels[order].mean())


def knn_score_batch(model: KnnModel, queries: np.ndarray,
                    cfg: KnnConfig) -> np.ndarray:
    """knn_score over rows of `queries`; bit-identical to per-query scoring."""
    queries = np.asarray(queries, dtype=np.float64)
    if queries.ndim != 2 or queries.shape[1] != model.dim:
        raise ValueError(f"queries must have shape (n, {model.dim})")
    return np.array([knn_score(model, q, cfg) for q in queries])


def knn_predict(model: KnnModel, query, cfg: KnnConfig,
                query_id: str = "") -> Prediction:
    score = knn_score(model, query, cfg)
    return Prediction(query_id, score, int(score >= cfg.threshold))
