"""Shared contracts for the vector index layer.

Both index kinds expose the same four operations (get_embedding,
top_k_search, range_search, update_items) plus counters, so the storage
layer can treat them interchangeably. Ordinals are in-segment vertex ids;
a Filter is a bitmap-backed validity test over those ordinals.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from ..errors import DimensionMismatch
from ..metrics import Metric
from ..records import Action, DeltaRecord

RANGE_EF_MIN = 128
RANGE_K0 = 16


@dataclass(frozen=True)
class IndexParams:
    M: int = 16
    ef_construction: int = 128
    metric: Metric = Metric.L2

    def __post_init__(self):
        if self.M < 2:
            raise ValueError(f"M must be >= 2, got {self.M}")
        if self.ef_construction < self.M:
            raise ValueError("ef_construction must be >= M")


@dataclass(frozen=True)
class SearchParams:
    k: int
    ef: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.ef < self.k:
            object.__setattr__(self, "ef", self.k)


class Filter:
    """Bitmap-backed validity test over in-segment ordinals.

    `mask[i]` says whether ordinal i may appear in results. Ordinals at or
    beyond the mask length are invalid. valid_count is the cached popcount.
    """

    __slots__ = ("mask", "valid_count")

    def __init__(self, mask: np.ndarray):
        self.mask = np.asarray(mask, dtype=bool)
        self.valid_count = int(np.count_nonzero(self.mask))

    def __call__(self, ordinal: int) -> bool:
        return ordinal < len(self.mask) and bool(self.mask[ordinal])

    @classmethod
    def from_ordinals(cls, ordinals: Iterable[int], size: int) -> "Filter":
        mask = np.zeros(size, dtype=bool)
        ords = list(ordinals)
        if ords:
            mask[np.asarray(ords, dtype=np.int64)] = True
        return cls(mask)

    @classmethod
    def all_valid(cls, size: int) -> "Filter":
        return cls(np.ones(size, dtype=bool))


FilterLike = Filter | Callable[[int], bool] | None


@dataclass
class IndexStats:
    distance_computations: int = 0
    hops: int = 0
    tombstone_fraction: float = 0.0

    def as_dict(self) -> dict:
        return {
            "distance_computations": self.distance_computations,
            "hops": self.hops,
            "tombstone_fraction": self.tombstone_fraction,
        }


@dataclass
class _Counter:
    distance_computations: int = 0
    hops: int = 0


class VectorIndex(abc.ABC):
    """One segment's vector index."""

    metric: Metric
    dim: int
    snapshot_tid: int

    def __init__(self, dim: int, metric: Metric):
        if dim <= 0:
            raise ValueError(f"dimension must be positive, got {dim}")
        self.dim = dim
        self.metric = metric
        self.snapshot_tid = 0
        self._counter = _Counter()

    # --- abstract surface ---

    @abc.abstractmethod
    def add(self, ordinal: int, vector: np.ndarray) -> None:
        """Insert or replace the vector for one ordinal."""

    @abc.abstractmethod
    def remove(self, ordinal: int) -> None:
        """Tombstone one ordinal; unknown ordinals are a no-op."""

    @abc.abstractmethod
    def get_embedding(self, ordinal: int) -> np.ndarray | None:
        """Current vector for an ordinal, None if absent or tombstoned."""

    @abc.abstractmethod
    def top_k_search(self, q: np.ndarray, sp: SearchParams,
                     filt: FilterLike = None) -> list[tuple[int, float]]:
        """Valid top-k as (ordinal, distance), ascending distance then ordinal."""

    @abc.abstractmethod
    def ordinals(self) -> list[int]:
        """Live (non-tombstoned) ordinals."""

    @abc.abstractmethod
    def count(self) -> int:
        """Number of live vectors."""

    @abc.abstractmethod
    def tombstone_fraction(self) -> float:
        ...

    # --- shared behavior ---

    def check_query(self, q: np.ndarray) -> np.ndarray:
        q = np.asarray(q, dtype=np.float32)
        if q.shape != (self.dim,):
            raise DimensionMismatch(f"query has shape {q.shape}, index dimension {self.dim}")
        return q

    def range_search(self, q: np.ndarray, threshold: float,
                     filt: FilterLike = None,
                     ef_min: int = RANGE_EF_MIN) -> list[tuple[int, float]]:
        """All valid (ordinal, distance) with distance strictly below threshold.

        Grown top-k probing: start at k0, search with ef = max(2k, ef_min),
        and double k while the result is full and its median distance is
        still below the threshold.
        """
        q = self.check_query(q)
        if threshold <= 0:
            return []
        k = RANGE_K0
        while True:
            res = self.top_k_search(q, SearchParams(k=k, ef=max(2 * k, ef_min)), filt)
            if len(res) == k and float(np.median([d for _, d in res])) < threshold:
                k *= 2
                continue
            break
        return [(o, d) for o, d in res if d < threshold]

    def scan_topk(self, q: np.ndarray, sp: SearchParams,
                  filt: FilterLike = None) -> list[tuple[int, float]]:
        """Exact top-k by scanning every valid vector, skipping the graph.

        The flat index is already a scan, so the default just delegates.
        """
        return self.top_k_search(q, sp, filt)

    def update_items(self, deltas: list[DeltaRecord], num_threads: int = 1) -> None:
        """Apply a TID-ordered batch of upserts and deletes.

        Work is partitioned by id so each id's records are applied in order
        by a single thread; the final state per id is its last record.
        """
        for rec in deltas:
            if rec.action is Action.UPSERT and rec.value.shape != (self.dim,):
                raise DimensionMismatch(
                    f"record vector has shape {rec.value.shape}, index dimension {self.dim}")
        if num_threads <= 1 or len(deltas) < 2:
            for rec in deltas:
                self._apply(rec)
            return
        import threading

        buckets: list[list[DeltaRecord]] = [[] for _ in range(num_threads)]
        for rec in deltas:
            buckets[rec.id % num_threads].append(rec)

        def run(bucket: list[DeltaRecord]):
            for rec in bucket:
                self._apply(rec)

        threads = [threading.Thread(target=run, args=(b,)) for b in buckets if b]
        for t in threads:
            t.start()
        for t in threads:
            t.join()

    def _apply(self, rec: DeltaRecord) -> None:
        if rec.action is Action.UPSERT:
            self.add(rec.id, rec.value)
        else:
            self.remove(rec.id)

    def stats(self) -> IndexStats:
        return IndexStats(
            distance_computations=self._counter.distance_computations,
            hops=self._counter.hops,
            tombstone_fraction=self.tombstone_fraction(),
        )

    @staticmethod
    def _as_predicate(filt: FilterLike) -> Callable[[int], bool] | None:
        if filt is None:
            return None
        return filt
