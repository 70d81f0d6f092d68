"""Exact brute-force index.

FLAT is the in-engine oracle: every search is a full scan over live rows,
so results are exact by construction. Rows are kept in one contiguous
float32 matrix for batched distance evaluation.
"""

from __future__ import annotations

import numpy as np

from ..metrics import Metric, distance_many
from .base import Filter, FilterLike, SearchParams, VectorIndex


class FlatIndex(VectorIndex):

    def __init__(self, dim: int, metric: Metric, capacity: int = 16):
        super().__init__(dim, metric)
        self._matrix = np.zeros((max(capacity, 1), dim), dtype=np.float32)
        self._ordinals = np.zeros(max(capacity, 1), dtype=np.int64)
        self._slot_of: dict[int, int] = {}
        self._dead: set[int] = set()  # tombstoned ordinals
        self._n = 0

    # --- mutation ---

    def _grow(self):
        cap = self._matrix.shape[0]
        if self._n < cap:
            return
        new = np.zeros((cap * 2, self.dim), dtype=np.float32)
        new[:cap] = self._matrix
        self._matrix = new
        ords = np.zeros(cap * 2, dtype=np.int64)
        ords[:cap] = self._ordinals
        self._ordinals = ords

    def add(self, ordinal: int, vector: np.ndarray) -> None:
        vec = np.asarray(vector, dtype=np.float32)
        if vec.shape != (self.dim,):
            from ..errors import DimensionMismatch
            raise DimensionMismatch(f"vector has shape {vec.shape}, index dimension {self.dim}")
        slot = self._slot_of.get(ordinal)
        if slot is None:
            self._grow()
            slot = self._n
            self._n += 1
            self._slot_of[ordinal] = slot
            self._ordinals[slot] = ordinal
        self._matrix[slot] = vec
        self._dead.discard(ordinal)

    def remove(self, ordinal: int) -> None:
        if ordinal in self._slot_of:
            self._dead.add(ordinal)

    # --- reads ---

    def get_embedding(self, ordinal: int) -> np.ndarray | None:
        slot = self._slot_of.get(ordinal)
        if slot is None or ordinal in self._dead:
            return None
        return self._matrix[slot].copy()

    def ordinals(self) -> list[int]:
        return [o for o in self._slot_of if o not in self._dead]

    def count(self) -> int:
        return len(self._slot_of) - len(self._dead)

    def tombstone_fraction(self) -> float:
        if not self._slot_of:
            return 0.0
        return len(self._dead) / len(self._slot_of)

    def top_k_search(self, q: np.ndarray, sp: SearchParams,
                     filt: FilterLike = None) -> list[tuple[int, float]]:
        q = self.check_query(q)
        if self._n == 0:
            return []
        ords = self._ordinals[: self._n]
        keep = np.ones(self._n, dtype=bool)
        if self._dead:
            dead = np.fromiter(self._dead, dtype=np.int64)
            keep &= ~np.isin(ords, dead)
        if isinstance(filt, Filter):
            m = filt.mask
            inside = ords < len(m)
            ok = np.zeros(self._n, dtype=bool)
            ok[inside] = m[ords[inside]]
            keep &= ok
        elif filt is not None:
            keep &= np.fromiter((filt(int(o)) for o in ords), dtype=bool, count=self._n)
        idx = np.nonzero(keep)[0]
        if idx.size == 0:
            return []
        dists = distance_many(self.metric, q, self._matrix[idx])
        self._counter.distance_computations += int(idx.size)
        self._counter.hops += 1
        order = np.lexsort((ords[idx], dists))[: sp.k]
        return [(int(ords[idx[i]]), float(dists[i])) for i in order]

    def range_search(self, q: np.ndarray, threshold: float,
                     filt: FilterLike = None, ef_min: int = 128) -> list[tuple[int, float]]:
        # single linear scan; no probing needed when every distance is exact
        q = self.check_query(q)
        if threshold <= 0 or self._n == 0:
            return []
        res = self.top_k_search(q, SearchParams(k=max(self.count(), 1)), filt)
        return [(o, d) for o, d in res if d < threshold]

    def clone(self) -> "FlatIndex":
        other = FlatIndex(self.dim, self.metric, capacity=self._matrix.shape[0])
        other.snapshot_tid = self.snapshot_tid
        other._matrix = self._matrix.copy()
        other._ordinals = self._ordinals.copy()
        other._slot_of = dict(self._slot_of)
        other._dead = set(self._dead)
        other._n = self._n
        return other
