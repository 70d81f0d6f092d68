"""Hierarchical navigable small world index.

Multi-layer proximity graph searched greedily from a single entry point:
upper layers are descended with a beam of 1, the base layer with a beam of
`ef`. Neighbor lists are pruned with the relative-distance heuristic so the
graph stays navigable. Deletes are tombstones: the node keeps routing
traffic but can no longer appear in results. Replacing a vector tombstones
the old node and inserts a fresh one under the same ordinal.

Internals work on monotone surrogate distances (squared L2, 1-dot, -dot) in
float32, computed as norm(x)^2 - 2<x,q> + norm(q)^2 against cached row
norms; reported distances are recomputed in float64 so FLAT and HNSW emit
identical values for identical hits.
"""

from __future__ import annotations

import math
import random
import struct
import threading
from heapq import heapify, heappop, heappush
from pathlib import Path

import numpy as np

from ..errors import DecodeError, DimensionMismatch
from ..metrics import Metric, distance_many
from .base import Filter, FilterLike, IndexParams, SearchParams, VectorIndex

MAGIC = b"GHNS"
FORMAT_VERSION = 1
MAX_LEVEL_CAP = 32

_METRIC_CODE = {Metric.L2: 0, Metric.COSINE: 1, Metric.INNER_PRODUCT: 2}
_METRIC_FROM_CODE = {v: k for k, v in _METRIC_CODE.items()}


class HnswIndex(VectorIndex):

    def __init__(self, dim: int, metric: Metric, params: IndexParams | None = None,
                 seed: int = 0, capacity: int = 64):
        super().__init__(dim, metric)
        self.params = params or IndexParams(metric=metric)
        self.seed = seed
        self._rng = random.Random(seed)
        self._ml = 1.0 / math.log(self.params.M)
        self._m0 = 2 * self.params.M

        cap = max(capacity, 4)
        self._matrix = np.zeros((cap, dim), dtype=np.float32)
        self._norms2 = np.zeros(cap, dtype=np.float32)
        self._ordinal = np.zeros(cap, dtype=np.int64)
        self._tomb = np.zeros(cap, dtype=bool)
        self._visited: list[int] = [0] * cap
        self._visit_tag = 0
        self._level: list[int] = []
        self._links0: list[list[int]] = []
        self._links_up: list[list[list[int]]] = []  # per slot, index l-1 = level l
        self._slot_of: dict[int, int] = {}
        self._nslots = 0
        self._ntomb = 0
        self._entry = -1
        self._max_level = -1
        self._lock = threading.Lock()

    # --- internal distance kernel (order-preserving surrogates) ---

    def _kern(self, q32: np.ndarray, q2: float, slots: list[int]) -> np.ndarray:
        self._counter.distance_computations += len(slots)
        dots = self._matrix[slots] @ q32
        if self.metric is Metric.L2:
            return self._norms2[slots] - 2.0 * dots + q2
        if self.metric is Metric.COSINE:
            return 1.0 - dots
        return -dots

    def _kern_one(self, q32: np.ndarray, q2: float, slot: int) -> float:
        return float(self._kern(q32, q2, [slot])[0])

    def _q2(self, q32: np.ndarray) -> float:
        if self.metric is Metric.L2:
            return float(q32 @ q32)
        return 0.0

    # --- storage management ---

    def _grow(self):
        cap = self._matrix.shape[0]
        if self._nslots < cap:
            return
        new_cap = cap * 2
        matrix = np.zeros((new_cap, self.dim), dtype=np.float32)
        matrix[:cap] = self._matrix
        self._matrix = matrix
        for name, dtype in (("_norms2", np.float32), ("_ordinal", np.int64)):
            old = getattr(self, name)
            new = np.zeros(new_cap, dtype=dtype)
            new[:cap] = old
            setattr(self, name, new)
        tomb = np.zeros(new_cap, dtype=bool)
        tomb[:cap] = self._tomb
        self._tomb = tomb
        self._visited.extend([0] * (new_cap - cap))

    def _alloc_slot(self, ordinal: int, vec: np.ndarray, level: int) -> int:
        self._grow()
        slot = self._nslots
        self._nslots += 1
        self._matrix[slot] = vec
        self._norms2[slot] = float(vec @ vec)
        self._ordinal[slot] = ordinal
        self._level.append(level)
        self._links0.append([])
        self._links_up.append([[] for _ in range(level)])
        return slot

    def _random_level(self) -> int:
        u = 1.0 - self._rng.random()  # (0, 1]
        return min(int(-math.log(u) * self._ml), MAX_LEVEL_CAP)

    def _neighbors(self, slot: int, level: int) -> list[int]:
        if level == 0:
            return self._links0[slot]
        return self._links_up[slot][level - 1]

    def _set_neighbors(self, slot: int, level: int, links: list[int]) -> None:
        if level == 0:
            self._links0[slot] = links
        else:
            self._links_up[slot][level - 1] = links

    # --- graph search ---

    def _greedy(self, q32: np.ndarray, q2: float, slot: int, d: float,
                level: int) -> tuple[int, float]:
        while True:
            neigh = self._neighbors(slot, level)
            if not neigh:
                return slot, d
            self._counter.hops += 1
            ds = self._kern(q32, q2, neigh)
            i = int(np.argmin(ds))
            if ds[i] >= d:
                return slot, d
            slot, d = neigh[i], float(ds[i])

    def _search_layer(self, q32: np.ndarray, q2: float, eps: list[tuple[float, int]],
                      ef: int, level: int) -> list[tuple[float, int]]:
        """Beam search over one layer; returns (surrogate, slot) ascending."""
        self._visit_tag += 1
        tag = self._visit_tag
        visited = self._visited
        cand = list(eps)
        heapify(cand)
        top = [(-d, s) for d, s in eps]
        heapify(top)
        for _, s in eps:
            visited[s] = tag
        while len(top) > ef:
            heappop(top)
        links = self._links0 if level == 0 else None
        while cand:
            d, s = heappop(cand)
            if len(top) >= ef and d > -top[0][0]:
                break
            neigh = links[s] if links is not None else self._links_up[s][level - 1]
            fresh = []
            for n in neigh:
                if visited[n] != tag:
                    visited[n] = tag
                    fresh.append(n)
            if not fresh:
                continue
            self._counter.hops += 1
            ds = self._kern(q32, q2, fresh)
            bound = -top[0][0]
            nfull = len(top) >= ef
            for nd, ns in zip(ds.tolist(), fresh):
                if not nfull or nd < bound:
                    heappush(cand, (nd, ns))
                    heappush(top, (-nd, ns))
                    if len(top) > ef:
                        heappop(top)
                    bound = -top[0][0]
                    nfull = len(top) >= ef
        return sorted((-x, s) for x, s in top)

    def _search_base_filtered(self, q32: np.ndarray, q2: float,
                              eps: list[tuple[float, int]], ef: int,
                              valid) -> list[tuple[float, int]]:
        """Base-layer beam search collecting only valid slots into the result.

        Invalid slots (tombstones, filtered-out ordinals) still route
        traversal, so one call yields up to ef valid candidates.
        """
        self._visit_tag += 1
        tag = self._visit_tag
        visited = self._visited
        cand = list(eps)
        heapify(cand)
        top: list[tuple[float, int]] = []
        for d, s in eps:
            visited[s] = tag
            if valid(s):
                heappush(top, (-d, s))
        while len(top) > ef:
            heappop(top)
        links = self._links0
        while cand:
            d, s = heappop(cand)
            if len(top) >= ef and d > -top[0][0]:
                break
            fresh = []
            for n in links[s]:
                if visited[n] != tag:
                    visited[n] = tag
                    fresh.append(n)
            if not fresh:
                continue
            self._counter.hops += 1
            ds = self._kern(q32, q2, fresh)
            for nd, ns in zip(ds.tolist(), fresh):
                if len(top) < ef or nd < -top[0][0]:
                    heappush(cand, (nd, ns))
                    if valid(ns):
                        heappush(top, (-nd, ns))
                        if len(top) > ef:
                            heappop(top)
        return sorted((-x, s) for x, s in top)

    # --- neighbor selection ---

    def _pairwise_surrogate(self, slots: list[int]) -> np.ndarray:
        rows = self._matrix[slots]
        self._counter.distance_computations += len(slots) * len(slots)
        g = rows @ rows.T
        if self.metric is Metric.L2:
            n2 = self._norms2[slots]
            return n2[None, :] - 2.0 * g + n2[:, None]
        if self.metric is Metric.COSINE:
            return 1.0 - g
        return -g

    def _select_heuristic(self, cands: list[tuple[float, int]], m: int) -> list[tuple[float, int]]:
        """Relative-distance pruning: keep a candidate only if it is closer to
        the query point than to every already-kept neighbor."""
        if len(cands) <= m:
            return list(cands)
        pair = self._pairwise_surrogate([s for _, s in cands])
        sel: list[int] = []
        out: list[tuple[float, int]] = []
        for i, (d, s) in enumerate(cands):
            if len(out) >= m:
                break
            row = pair[i]
            ok = True
            for j in sel:
                if row[j] < d:
                    ok = False
                    break
            if ok:
                out.append((d, s))
                sel.append(i)
        return out

    def _link_back(self, slot: int, new_slot: int, d: float, level: int) -> None:
        links = self._neighbors(slot, level)
        cap = self._m0 if level == 0 else self.params.M
        if len(links) < cap:
            links.append(new_slot)
            return
        cand_slots = links + [new_slot]
        ds = self._kern(self._matrix[slot], float(self._norms2[slot]), cand_slots)
        cands = sorted(zip(ds.tolist(), cand_slots))
        sel = self._select_heuristic(cands, cap)
        self._set_neighbors(slot, level, [s for _, s in sel])

    # --- mutation ---

    def add(self, ordinal: int, vector: np.ndarray) -> None:
        vec = np.ascontiguousarray(vector, dtype=np.float32)
        if vec.shape != (self.dim,):
            raise DimensionMismatch(f"vector has shape {vec.shape}, index dimension {self.dim}")
        with self._lock:
            old = self._slot_of.get(ordinal)
            if old is not None and not self._tomb[old]:
                self._tomb[old] = True
                self._ntomb += 1
            level = self._random_level()
            slot = self._alloc_slot(ordinal, vec, level)
            self._slot_of[ordinal] = slot
            if self._entry < 0:
                self._entry = slot
                self._max_level = level
                return
            q2 = self._q2(vec)
            ep = self._entry
            epd = self._kern_one(vec, q2, ep)
            for lvl in range(self._max_level, level, -1):
                ep, epd = self._greedy(vec, q2, ep, epd, lvl)
            eps = [(epd, ep)]
            for lvl in range(min(level, self._max_level), -1, -1):
                cands = self._search_layer(vec, q2, eps, self.params.ef_construction, lvl)
                neigh = self._select_heuristic(cands, self.params.M)
                self._set_neighbors(slot, lvl, [s for _, s in neigh])
                for nd, ns in neigh:
                    self._link_back(ns, slot, nd, lvl)
                eps = cands
            if level > self._max_level:
                self._entry = slot
                self._max_level = level

    def remove(self, ordinal: int) -> None:
        with self._lock:
            slot = self._slot_of.get(ordinal)
            if slot is not None and not self._tomb[slot]:
                self._tomb[slot] = True
                self._ntomb += 1

    # --- reads ---

    def get_embedding(self, ordinal: int) -> np.ndarray | None:
        slot = self._slot_of.get(ordinal)
        if slot is None or self._tomb[slot]:
            return None
        return self._matrix[slot].copy()

    def ordinals(self) -> list[int]:
        return [int(o) for o, s in self._slot_of.items() if not self._tomb[s]]

    def count(self) -> int:
        return self._nslots - self._ntomb

    def tombstone_fraction(self) -> float:
        if self._nslots == 0:
            return 0.0
        return self._ntomb / self._nslots

    def _make_valid(self, filt: FilterLike):
        tomb = self._tomb
        ordv = self._ordinal
        if filt is None:
            return lambda s: not tomb[s]
        if isinstance(filt, Filter):
            mask = filt.mask
            m = len(mask)
            return lambda s: (not tomb[s]) and ordv[s] < m and mask[ordv[s]]
        return lambda s: (not tomb[s]) and filt(int(ordv[s]))

    def top_k_search(self, q: np.ndarray, sp: SearchParams,
                     filt: FilterLike = None) -> list[tuple[int, float]]:
        q = self.check_query(q)
        if self._entry < 0 or self.count() == 0:
            return []
        q32 = np.ascontiguousarray(q, dtype=np.float32)
        q2 = self._q2(q32)
        valid = self._make_valid(filt)
        ep = self._entry
        epd = self._kern_one(q32, q2, ep)
        for lvl in range(self._max_level, 0, -1):
            ep, epd = self._greedy(q32, q2, ep, epd, lvl)
        hits = self._search_base_filtered(q32, q2, [(epd, ep)], max(sp.ef, sp.k), valid)
        if not hits:
            return []
        slots = [s for _, s in hits]
        true_d = distance_many(self.metric, q, self._matrix[slots])
        ranked = sorted(
            (float(d), int(self._ordinal[s])) for d, s in zip(true_d, slots)
        )
        return [(o, d) for d, o in ranked[: sp.k]]

    def scan_topk(self, q: np.ndarray, sp: SearchParams,
                  filt: FilterLike = None) -> list[tuple[int, float]]:
        """Exact top-k over valid vectors without touching the graph.

        Used when a filter leaves too few candidates for graph traversal to
        reach them reliably.
        """
        q = self.check_query(q)
        n = self._nslots
        if n == 0:
            return []
        keep = ~self._tomb[:n]
        ords = self._ordinal[:n]
        if isinstance(filt, Filter):
            mask = filt.mask
            m = len(mask)
            ok = (ords < m)
            ok[ok] = mask[ords[ok]]
            keep = keep & ok
        elif filt is not None:
            keep = keep & np.fromiter((filt(int(o)) for o in ords), dtype=bool, count=n)
        slots = np.nonzero(keep)[0]
        if slots.size == 0:
            return []
        dists = distance_many(self.metric, q, self._matrix[slots])
        self._counter.distance_computations += int(slots.size)
        self._counter.hops += 1
        order = np.lexsort((ords[slots], dists))[: sp.k]
        return [(int(ords[slots[i]]), float(dists[i])) for i in order]

    # --- persistence ---

    def save(self, path: str | Path) -> None:
        path = Path(path)
        out = bytearray()
        out += MAGIC
        out += struct.pack("<IIIBI", FORMAT_VERSION, self.params.M,
                           self.params.ef_construction, _METRIC_CODE[self.metric],
                           self.dim)
        out += struct.pack("<QQQqiq", self.count(), self.snapshot_tid, self._nslots,
                           self._entry, self._max_level, self.seed)
        n = self._nslots
        out += self._ordinal[:n].astype("<i8").tobytes()
        out += np.asarray(self._level, dtype="<u4").tobytes()
        out += np.packbits(self._tomb[:n], bitorder="little").tobytes()
        for slot in range(n):
            for lvl in range(self._level[slot] + 1):
                links = self._neighbors(slot, lvl)
                out += struct.pack("<I", len(links))
                out += np.asarray(links, dtype="<u4").tobytes()
        out += np.ascontiguousarray(self._matrix[:n], dtype="<f4").tobytes()
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_bytes(bytes(out))
        tmp.replace(path)

    @classmethod
    def load(cls, path: str | Path) -> "HnswIndex":
        buf = Path(path).read_bytes()
        if buf[:4] != MAGIC:
            raise DecodeError(f"{path}: bad magic {buf[:4]!r}")
        off = 4
        version, M, efc, metric_code, dim = struct.unpack_from("<IIIBI", buf, off)
        off += struct.calcsize("<IIIBI")
        if version != FORMAT_VERSION:
            raise DecodeError(f"{path}: unsupported version {version}")
        live, snapshot_tid, nslots, entry, max_level, seed = struct.unpack_from("<QQQqiq", buf, off)
        off += struct.calcsize("<QQQqiq")
        metric = _METRIC_FROM_CODE.get(metric_code)
        if metric is None:
            raise DecodeError(f"{path}: bad metric code {metric_code}")
        idx = cls(dim, metric, IndexParams(M=M, ef_construction=efc, metric=metric),
                  seed=seed, capacity=max(nslots, 4))
        idx.snapshot_tid = snapshot_tid
        idx._nslots = nslots
        idx._entry = entry
        idx._max_level = max_level
        idx._ordinal[:nslots] = np.frombuffer(buf, dtype="<i8", count=nslots, offset=off)
        off += 8 * nslots
        levels = np.frombuffer(buf, dtype="<u4", count=nslots, offset=off)
        idx._level = [int(x) for x in levels]
        off += 4 * nslots
        nbytes = (nslots + 7) // 8
        bits = np.frombuffer(buf, dtype=np.uint8, count=nbytes, offset=off)
        idx._tomb[:nslots] = np.unpackbits(bits, bitorder="little")[:nslots].astype(bool)
        off += nbytes
        idx._links0 = []
        idx._links_up = []
        for slot in range(nslots):
            per_level = []
            for _ in range(idx._level[slot] + 1):
                (deg,) = struct.unpack_from("<I", buf, off)
                off += 4
                links = np.frombuffer(buf, dtype="<u4", count=deg, offset=off)
                off += 4 * deg
                per_level.append([int(x) for x in links])
            idx._links0.append(per_level[0])
            idx._links_up.append(per_level[1:])
        vecs = np.frombuffer(buf, dtype="<f4", count=nslots * dim, offset=off)
        off += 4 * nslots * dim
        if off != len(buf):
            raise DecodeError(f"{path}: trailing bytes after index payload")
        idx._matrix[:nslots] = vecs.reshape(nslots, dim)
        idx._norms2[:nslots] = np.einsum("ij,ij->i", idx._matrix[:nslots],
                                         idx._matrix[:nslots])
        idx._ntomb = int(np.count_nonzero(idx._tomb[:nslots]))
        if idx.count() != live:
            raise DecodeError(f"{path}: live count mismatch")
        for slot in range(nslots):
            idx._slot_of[int(idx._ordinal[slot])] = slot
        return idx

    def clone(self) -> "HnswIndex":
        """Deep copy used to build the next snapshot incrementally."""
        other = HnswIndex(self.dim, self.metric, self.params, seed=self.seed,
                          capacity=self._matrix.shape[0])
        other.snapshot_tid = self.snapshot_tid
        other._rng.setstate(self._rng.getstate())
        other._matrix = self._matrix.copy()
        other._norms2 = self._norms2.copy()
        other._ordinal = self._ordinal.copy()
        other._tomb = self._tomb.copy()
        other._visited = [0] * len(self._visited)
        other._level = list(self._level)
        other._links0 = [list(l) for l in self._links0]
        other._links_up = [[list(l) for l in per] for per in self._links_up]
        other._slot_of = dict(self._slot_of)
        other._nslots = self._nslots
        other._ntomb = self._ntomb
        other._entry = self._entry
        other._max_level = self._max_level
        return other
