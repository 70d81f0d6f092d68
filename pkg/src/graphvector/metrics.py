"""Distance metrics over float32 vectors.

All kernels are numpy-batched: `pairwise(queries, base)` computes a full
(q, n) distance matrix in one shot, `to_many(q, base)` a single row. Lower
distance always means more similar, so inner product is negated and cosine
vectors are unit-normalized at ingest (distance = 1 - dot).
"""

from __future__ import annotations

import enum

import numpy as np

__all__ = ["Metric", "normalize", "distance", "distance_many", "pairwise"]


class Metric(str, enum.Enum):
    L2 = "L2"
    COSINE = "COSINE"
    INNER_PRODUCT = "INNER_PRODUCT"

    @classmethod
    def parse(cls, text: str) -> "Metric":
        try:
            return cls(text.strip().upper())
        except ValueError:
            raise ValueError(f"unknown metric {text!r}") from None


def normalize(vec: np.ndarray) -> np.ndarray:
    """Unit-normalize one vector or a batch of row vectors (for COSINE ingest)."""
    arr = np.asarray(vec, dtype=np.float32)
    if arr.ndim == 1:
        norm = float(np.linalg.norm(arr))
        if norm == 0.0:
            raise ValueError("cannot normalize a zero vector")
        return (arr / norm).astype(np.float32)
    norms = np.linalg.norm(arr, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise ValueError("cannot normalize a zero vector")
    return (arr / norms).astype(np.float32)


def distance(metric: Metric, a: np.ndarray, b: np.ndarray) -> float:
    """Distance between two single vectors."""
    a = np.asarray(a, dtype=np.float32)
    b = np.asarray(b, dtype=np.float32)
    if metric is Metric.L2:
        diff = a.astype(np.float64) - b.astype(np.float64)
        return float(np.sqrt(np.dot(diff, diff)))
    dot = float(np.dot(a.astype(np.float64), b.astype(np.float64)))
    if metric is Metric.COSINE:
        return 1.0 - dot
    return -dot


def distance_many(metric: Metric, q: np.ndarray, base: np.ndarray) -> np.ndarray:
    """Distances from one query vector to every row of `base`, as float64."""
    q = np.asarray(q, dtype=np.float32)
    base = np.asarray(base, dtype=np.float32)
    if base.size == 0:
        return np.zeros(0, dtype=np.float64)
    if metric is Metric.L2:
        diff = base.astype(np.float64) - q.astype(np.float64)
        return np.sqrt(np.einsum("ij,ij->i", diff, diff))
    dots = base.astype(np.float64) @ q.astype(np.float64)
    if metric is Metric.COSINE:
        return 1.0 - dots
    return -dots


def pairwise(metric: Metric, queries: np.ndarray, base: np.ndarray) -> np.ndarray:
    """(q, n) matrix of distances from each query row to each base row."""
    queries = np.asarray(queries, dtype=np.float64)
    base = np.asarray(base, dtype=np.float64)
    if queries.ndim == 1:
        queries = queries[None, :]
    if base.size == 0:
        return np.zeros((queries.shape[0], 0), dtype=np.float64)
    dots = queries @ base.T
    if metric is Metric.COSINE:
        return 1.0 - dots
    if metric is Metric.INNER_PRODUCT:
        return -dots
    qq = np.einsum("ij,ij->i", queries, queries)[:, None]
    bb = np.einsum("ij,ij->i", base, base)[None, :]
    sq = np.maximum(qq + bb - 2.0 * dots, 0.0)
    return np.sqrt(sq)
