"""Semantic retrieval: pick the most similar demonstrated object for a task.

A live observation is compared against every demonstration of the task by
cosine similarity of CLS vectors; the argmax wins, ties broken by lowest
record id so results are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DimensionMismatchError,
    EmptyTaskSubsetError,
    EmptyTestSetError,
    InvalidRecordError,
    UnfamiliarObjectError,
    ZeroNormError,
)
from .model import DemonstrationRecord, FeatureBundle, MemoryBuffer


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of the angle between two vectors, clipped into [-1, 1].

    Inputs are compared at float64 precision regardless of storage dtype.
    """
    va = np.asarray(a, dtype=np.float64).reshape(-1)
    vb = np.asarray(b, dtype=np.float64).reshape(-1)
    if va.shape != vb.shape:
        raise DimensionMismatchError(
            f"cosine inputs disagree: {va.shape[0]} vs {vb.shape[0]}"
        )
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        raise ZeroNormError("cosine similarity undefined for zero-norm vector")
    return float(np.clip(np.dot(va, vb) / (na * nb), -1.0, 1.0))


@dataclass(frozen=True)
class RetrievalConfig:
    """``novelty_threshold`` (optional) rejects queries whose best similarity
    is below it; disabled by default."""

    novelty_threshold: Optional[float] = None


@dataclass(frozen=True)
class RetrievalResult:
    record: DemonstrationRecord
    similarity: float
    ranking: tuple[tuple[str, float], ...]


def retrieve(
    live: FeatureBundle,
    task: str,
    buffer: MemoryBuffer,
    config: RetrievalConfig = RetrievalConfig(),
) -> RetrievalResult:
    """Nearest demonstration of ``task`` by CLS cosine similarity.

    The full ranking (id, similarity) sorted by descending similarity,
    ties by ascending id, is returned alongside the winner.
    """
    subset = buffer.task_subset(task)
    if not subset:
        raise EmptyTaskSubsetError(f"no demonstrations recorded for task {task!r}")
    scored = [
        (record.record_id, cosine_similarity(live.cls, record.bottleneck_features.cls))
        for record in subset
    ]
    scored.sort(key=lambda item: (-item[1], item[0]))
    best_id, best_sim = scored[0]
    if config.novelty_threshold is not None and best_sim < config.novelty_threshold:
        raise UnfamiliarObjectError(
            f"best similarity {best_sim:.4f} below novelty threshold "
            f"{config.novelty_threshold:.4f}"
        )
    return RetrievalResult(
        record=buffer.get(best_id), similarity=best_sim, ranking=tuple(scored)
    )


def retrieval_benchmark(
    test_set: Sequence[tuple[FeatureBundle, str]],
    buffer: MemoryBuffer,
    label_key: str = "class",
) -> float:
    """Top-1 class accuracy over labeled query bundles.

    Every buffer record must carry a class label under ``label_key`` in its
    metadata; queries are scored against the whole buffer, task-agnostic.
    """
    if not test_set:
        raise EmptyTestSetError("retrieval benchmark needs at least one query")
    records = buffer.records()
    if not records:
        raise EmptyTaskSubsetError("retrieval benchmark needs a non-empty buffer")
    labels = []
    for record in records:
        if label_key not in record.metadata:
            raise InvalidRecordError(
                f"metadata.{label_key}", f"record {record.record_id!r} has no class label"
            )
        labels.append(record.metadata[label_key])
    hits = 0
    for bundle, expected in test_set:
        scored = [
            (cosine_similarity(bundle.cls, record.bottleneck_features.cls), record.record_id, i)
            for i, record in enumerate(records)
        ]
        scored.sort(key=lambda item: (-item[0], item[1]))
        if labels[scored[0][2]] == expected:
            hits += 1
    return hits / len(test_set)
