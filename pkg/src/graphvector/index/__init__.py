"""Vector index layer: a FLAT exact index plus a navigable-graph ANN index.

Both expose the same four functions (get_embedding, top_k_search,
range_search, update_items) so upper layers pick a kind per embedding
attribute and stay agnostic otherwise.
"""

from __future__ import annotations

import zlib

import numpy as np

from ..metrics import Metric
from .base import (Filter, FilterLike, IndexParams, IndexStats, SearchParams,
                   VectorIndex, RANGE_EF_MIN, RANGE_K0)
from .flat import FlatIndex
from .hnsw import HnswIndex

__all__ = ["Filter", "FilterLike", "IndexParams", "IndexStats", "SearchParams",
           "VectorIndex", "FlatIndex", "HnswIndex", "build_index", "level_seed",
           "RANGE_EF_MIN", "RANGE_K0"]


def level_seed(segment_ordinal: int, attr: str) -> int:
    """Deterministic per-(segment, attribute) seed for level assignment."""
    return (segment_ordinal << 32) ^ zlib.crc32(attr.encode())


def build_index(kind: str, dim: int, metric: Metric,
                items: list[tuple[int, np.ndarray]] | None = None,
                params: IndexParams | None = None, seed: int = 0) -> VectorIndex:
    """Construct an index of the given kind and bulk-load `items`."""
    kind = kind.upper()
    if kind == "FLAT":
        idx: VectorIndex = FlatIndex(dim, metric, capacity=max(len(items or []), 16))
    elif kind == "HNSW":
        idx = HnswIndex(dim, metric, params or IndexParams(metric=metric),
                        seed=seed, capacity=max(len(items or []), 64))
    else:
        raise ValueError(f"unknown index kind {kind!r}")
    for ordinal, vec in items or []:
        idx.add(ordinal, vec)
    return idx
