"""Hybrid query execution over vertex sets.

Every operation pins one TID and combines three primitives: predicate scans
that produce per-segment bitmaps, pattern expansion over adjacency, and
per-segment vector search merged into a global top-k. Filtering is always
applied before the vector search (pre-filter), so results are sound by
construction and ranking quality is the only approximation.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import SemanticError, UnknownVertexType, ValidationError
from .metrics import Metric, distance
from .predicates import Predicate, TruePred
from .schema import EmbeddingMeta
from .storage import Database

VertexRef = tuple[str, int]  # (vertex type, global per-type ordinal)


class VertexSet:
    """Per-(type, segment) bitmaps of member ordinals."""

    def __init__(self, capacity: int,
                 masks: dict[tuple[str, int], np.ndarray] | None = None):
        self.capacity = capacity
        self.masks: dict[tuple[str, int], np.ndarray] = {}
        if masks:
            for key, m in masks.items():
                m = np.asarray(m, dtype=bool)
                if m.any():
                    self.masks[key] = m.copy()

    @classmethod
    def from_members(cls, db: Database, members: Iterable[VertexRef]) -> "VertexSet":
        vs = cls(db.segment_capacity)
        for type_name, gid in members:
            seg, off = db.seg_of(gid)
            key = (type_name, seg)
            m = vs.masks.get(key)
            if m is None or len(m) <= off:
                grown = np.zeros(max(off + 1, 0 if m is None else len(m)), dtype=bool)
                if m is not None:
                    grown[: len(m)] = m
                vs.masks[key] = m = grown
            m[off] = True
        return vs

    @classmethod
    def all_of(cls, db: Database, type_name: str, at_tid: int) -> "VertexSet":
        vs = cls(db.segment_capacity)
        for seg in db.segments_of(type_name):
            m = db.live_mask(type_name, seg, at_tid)
            if m.any():
                vs.masks[(type_name, seg)] = m.copy()
        return vs

    def mask_for(self, type_name: str, seg: int) -> np.ndarray | None:
        return self.masks.get((type_name, seg))

    def contains(self, type_name: str, gid: int) -> bool:
        seg, off = divmod(gid, self.capacity)
        m = self.masks.get((type_name, seg))
        return m is not None and off < len(m) and bool(m[off])

    def members(self) -> list[VertexRef]:
        out = []
        for (type_name, seg), m in sorted(self.masks.items()):
            base = seg * self.capacity
            out.extend((type_name, base + int(off)) for off in np.nonzero(m)[0])
        return out

    def types(self) -> set[str]:
        return {t for t, _ in self.masks}

    def intersect(self, other: "VertexSet") -> "VertexSet":
        vs = VertexSet(self.capacity)
        for key, m in self.masks.items():
            o = other.masks.get(key)
            if o is None:
                continue
            n = min(len(m), len(o))
            merged = m[:n] & o[:n]
            if merged.any():
                vs.masks[key] = merged
        return vs

    def union(self, other: "VertexSet") -> "VertexSet":
        vs = VertexSet(self.capacity, self.masks)
        for key, o in other.masks.items():
            m = vs.masks.get(key)
            if m is None:
                vs.masks[key] = o.copy()
            else:
                n = max(len(m), len(o))
                merged = np.zeros(n, dtype=bool)
                merged[: len(m)] |= m
                merged[: len(o)] |= o
                vs.masks[key] = merged
        return vs

    def __len__(self) -> int:
        return sum(int(np.count_nonzero(m)) for m in self.masks.values())

    def __eq__(self, other) -> bool:
        if not isinstance(other, VertexSet):
            return NotImplemented
        return self.members() == other.members()

    def __repr__(self) -> str:
        return f"VertexSet({len(self)} members, {len(self.masks)} segments)"


class DistanceMap(dict):
    """vertex -> distance, iteration order = ascending distance."""

    def ranked(self) -> list[tuple[VertexRef, float]]:
        return list(self.items())


class PairHeap:
    """Bounded accumulator keeping the k smallest (distance, s, t) triples."""

    class _Rev:
        __slots__ = ("key",)

        def __init__(self, key):
            self.key = key

        def __lt__(self, other):
            return self.key > other.key

    def __init__(self, k: int):
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        self.k = k
        self._heap: list[PairHeap._Rev] = []

    def offer(self, s: VertexRef, t: VertexRef, dist: float) -> None:
        key = (dist, s, t)
        if len(self._heap) < self.k:
            heapq.heappush(self._heap, self._Rev(key))
        elif key < self._heap[0].key:
            heapq.heapreplace(self._heap, self._Rev(key))

    def items(self) -> list[tuple[VertexRef, VertexRef, float]]:
        triples = sorted(r.key for r in self._heap)
        return [(s, t, d) for d, s, t in triples]

    def __len__(self) -> int:
        return len(self._heap)


@dataclass
class PlanStep:
    """One rendered action; plans execute bottom-up but print top-down."""

    kind: str  # VertexAction | EdgeAction | EmbeddingAction
    args: tuple[str, ...]
    payload: dict = field(default_factory=dict)

    def render(self) -> str:
        return f"{self.kind}[{', '.join(self.args)}]"


@dataclass
class SearchResult:
    """Ranked vertices plus the set form and execution counters."""

    ranked: list[tuple[VertexRef, float]]
    vertex_set: VertexSet
    stats: dict

    def to_json(self, db: Database) -> dict:
        return {
            "vertices": [{"type": t, "id": db.pid_of(t, gid)}
                         for (t, gid), _ in self.ranked],
            "distances": [d for _, d in self.ranked],
            "stats": self.stats,
        }


def _new_stats() -> dict:
    return {"segments_touched": 0, "index_segments": 0, "bruteforce_segments": 0}


def merge_local_topk(locals_: Sequence[Sequence[tuple[VertexRef, float]]],
                     k: int) -> list[tuple[VertexRef, float]]:
    """Global top-k from per-segment lists: ascending (distance, vertex)."""
    merged = []
    for part in locals_:
        merged.extend(part)
    merged.sort(key=lambda item: (item[1], item[0]))
    return merged[:k]


def _check_targets(db: Database, attrs: Sequence[tuple[str, str]]) -> EmbeddingMeta:
    return db.catalog.check_search_targets(list(attrs))


def _search_segments(db: Database, attrs: Sequence[tuple[str, str]], q: np.ndarray,
                     k: int, ef: int, filter_set: VertexSet | None, at_tid: int,
                     stats: dict) -> list[list[tuple[VertexRef, float]]]:
    locals_: list[list[tuple[VertexRef, float]]] = []
    for type_name, attr in attrs:
        for seg in db.segments_of(type_name):
            mask = filter_set.mask_for(type_name, seg) if filter_set is not None else None
            if filter_set is not None and mask is None:
                continue  # no members in this segment
            part, info = db.segment_topk(type_name, attr, seg, q, k, ef, mask, at_tid)
            if info["touched"]:
                stats["segments_touched"] += 1
            if info["route"] == "index":
                stats["index_segments"] += 1
            elif info["route"] == "bruteforce":
                stats["bruteforce_segments"] += 1
            base = seg * db.segment_capacity
            locals_.append([((type_name, base + off), d) for off, d in part])
    return locals_


def vector_search(db: Database, attrs: Sequence[tuple[str, str]], q,
                  k: int, *, filter: VertexSet | None = None, ef: int = 64,
                  distance_map_out: DistanceMap | None = None,
                  at_tid: int | None = None,
                  stats_out: dict | None = None) -> VertexSet:
    """Top-k nearest valid vertices across every listed (type, attr).

    All attrs must be mutually compatible; the result is a vertex set, with
    the ranking available through distance_map_out.
    """
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    meta = _check_targets(db, attrs)
    q = np.asarray(q, dtype=np.float32)
    if meta.metric is Metric.COSINE:
        from .metrics import normalize
        q = normalize(q)
    stats = _new_stats()
    t0 = time.perf_counter()
    with db.pinned(at_tid) as tid:
        locals_ = _search_segments(db, attrs, q, k, ef, filter, tid, stats)
        ranked = merge_local_topk(locals_, k)
    stats["vector_search_ms"] = (time.perf_counter() - t0) * 1e3
    if distance_map_out is not None:
        for ref, d in ranked:
            distance_map_out[ref] = d
    if stats_out is not None:
        stats_out.update(stats)
    return VertexSet.from_members(db, [ref for ref, _ in ranked])


def search_ranked(db: Database, attrs: Sequence[tuple[str, str]], q, k: int, *,
                  filter: VertexSet | None = None, ef: int = 64,
                  at_tid: int | None = None) -> SearchResult:
    """vector_search plus the ranking and counters in one result object."""
    dm = DistanceMap()
    stats: dict = {}
    vs = vector_search(db, attrs, q, k, filter=filter, ef=ef,
                       distance_map_out=dm, at_tid=at_tid, stats_out=stats)
    return SearchResult(ranked=dm.ranked(), vertex_set=vs, stats=stats)


def filtered_topk(db: Database, vertex_type: str, predicate: Predicate,
                  attr: str, q, k: int, ef: int = 64,
                  at_tid: int | None = None,
                  stats_out: dict | None = None) -> list[tuple[VertexRef, float]]:
    """Predicate bitmap per segment, then filtered per-segment search."""
    stats = _new_stats()
    with db.pinned(at_tid) as tid:
        masks = db.segment_scan(vertex_type, predicate, tid)
        vs = VertexSet(db.segment_capacity,
                       {(vertex_type, seg): m for seg, m in masks.items()})
        meta = db.catalog.embedding_meta(vertex_type, attr)
        q2 = np.asarray(q, dtype=np.float32)
        if meta.metric is Metric.COSINE:
            from .metrics import normalize
            q2 = normalize(q2)
        locals_ = _search_segments(db, [(vertex_type, attr)], q2, k, ef, vs, tid, stats)
        ranked = merge_local_topk(locals_, k)
    if stats_out is not None:
        stats_out.update(stats)
    return ranked


@dataclass
class PathVertex:
    alias: str | None
    type_name: str | None
    predicate: Predicate | None = None
    members: VertexSet | None = None  # set-variable constraint


@dataclass(frozen=True)
class PathEdge:
    edge_type: str
    forward: bool  # True: left-[edge]->right; False: left<-[edge]-right


@dataclass
class PatternResult:
    bindings: list[tuple[VertexRef, ...]]
    aliases: dict[str, int]  # alias -> position in each binding tuple
    sets: dict[str, VertexSet]

    def vertex_set(self, alias: str) -> VertexSet:
        return self.sets[alias]


def _vertex_candidates(db: Database, pv: PathVertex, at_tid: int) -> list[VertexRef]:
    pred = pv.predicate or TruePred()
    out: list[VertexRef] = []
    if pv.members is not None:
        for type_name, gid in pv.members.members():
            if pv.type_name is not None and type_name != pv.type_name:
                continue
            attrs = db.vertex_attrs(type_name, gid, at_tid)
            if attrs is not None and pred.evaluate(attrs):
                out.append((type_name, gid))
        return out
    if pv.type_name is None:
        raise UnknownVertexType("pattern vertex needs a type or a set variable")
    db.catalog.get_vertex_type(pv.type_name)
    for seg, mask in db.segment_scan(pv.type_name, pred, at_tid).items():
        base = seg * db.segment_capacity
        out.extend((pv.type_name, base + int(off)) for off in np.nonzero(mask)[0])
    return out


def _vertex_admits(db: Database, pv: PathVertex, ref: VertexRef, at_tid: int) -> bool:
    type_name, gid = ref
    if pv.type_name is not None and type_name != pv.type_name:
        return False
    if pv.members is not None and not pv.members.contains(type_name, gid):
        return False
    if pv.predicate is not None:
        attrs = db.vertex_attrs(type_name, gid, at_tid)
        if attrs is None or not pv.predicate.evaluate(attrs):
            return False
    return True


def pattern_match(db: Database, path: Sequence, at_tid: int | None = None) -> PatternResult:
    """All bindings of a linear path pattern.

    path alternates PathVertex, PathEdge, PathVertex, ... The binding list
    holds one VertexRef per path vertex, in path order.
    """
    verts = [p for p in path if isinstance(p, PathVertex)]
    edges = [p for p in path if isinstance(p, PathEdge)]
    if len(verts) != len(edges) + 1 or not verts:
        raise ValidationError("path must alternate vertex, edge, vertex, ...")
    named = [v.alias for v in verts if v.alias is not None]
    if len(named) != len(set(named)):
        raise ValidationError(f"duplicate alias in pattern: {named}")
    for e in edges:
        db.catalog.get_edge_type(e.edge_type)

    with db.pinned(at_tid) as tid:
        bindings: list[tuple[VertexRef, ...]] = [
            (ref,) for ref in _vertex_candidates(db, verts[0], tid)]
        for e, nxt in zip(edges, verts[1:]):
            et = db.catalog.get_edge_type(e.edge_type)
            grown: list[tuple[VertexRef, ...]] = []
            for binding in bindings:
                cur_type, cur_gid = binding[-1]
                if e.forward:
                    if et.from_type != cur_type:
                        continue
                    hops = db.out_neighbors(cur_type, cur_gid, e.edge_type, tid)
                else:
                    if et.to_type != cur_type:
                        continue
                    hops = db.in_neighbors(cur_type, cur_gid, e.edge_type, tid)
                for ref in hops:
                    if _vertex_admits(db, nxt, ref, tid):
                        grown.append(binding + (ref,))
            bindings = grown
        bindings = sorted(set(bindings))
        aliases = {v.alias: i for i, v in enumerate(verts) if v.alias is not None}
        sets = {a: VertexSet.from_members(db, {b[i] for b in bindings})
                for a, i in aliases.items()}
    return PatternResult(bindings=bindings, aliases=aliases, sets=sets)


def pattern_filtered_topk(db: Database, path: Sequence, target_alias: str,
                          attr: str, q, k: int, ef: int = 64,
                          at_tid: int | None = None,
                          stats_out: dict | None = None) -> list[tuple[VertexRef, float]]:
    """Pattern as filter: top-k over the target alias binding set."""
    with db.pinned(at_tid) as tid:
        pr = pattern_match(db, path, at_tid=tid)
        if target_alias not in pr.aliases:
            raise ValidationError(f"pattern has no alias {target_alias!r}")
        target = pr.sets[target_alias]
        if len(target) == 0:
            if stats_out is not None:
                stats_out.update(_new_stats())
            return []
        attrs = [(t, attr) for t in sorted(target.types())]
        dm = DistanceMap()
        stats: dict = {}
        vector_search(db, attrs, q, k, filter=target, ef=ef,
                      distance_map_out=dm, at_tid=tid, stats_out=stats)
    if stats_out is not None:
        stats_out.update(stats)
    return dm.ranked()


def similarity_join(db: Database, path: Sequence, s_alias: str, t_alias: str,
                    s_attr: str, t_attr: str, k: int,
                    at_tid: int | None = None) -> list[tuple[VertexRef, VertexRef, float]]:
    """k most similar (s, t) pairs among pattern bindings, brute force.

    Pairs are deduplicated across bindings; ties break by (s, t).
    """
    with db.pinned(at_tid) as tid:
        pr = pattern_match(db, path, at_tid=tid)
        for a in (s_alias, t_alias):
            if a not in pr.aliases:
                raise ValidationError(f"pattern has no alias {a!r}")
        si, ti = pr.aliases[s_alias], pr.aliases[t_alias]
        pairs = sorted({(b[si], b[ti]) for b in pr.bindings})
        if not pairs:
            return []
        targets = [(t, s_attr) for t in sorted(pr.sets[s_alias].types())] + \
                  [(t, t_attr) for t in sorted(pr.sets[t_alias].types())]
        meta = _check_targets(db, targets)  # SemanticError on mismatch
        heap = PairHeap(k)
        cache: dict[tuple[VertexRef, str], np.ndarray | None] = {}

        def emb(ref: VertexRef, attr: str):
            key = (ref, attr)
            if key not in cache:
                cache[key] = db.get_embedding(ref[0], db.pid_of(ref[0], ref[1]),
                                              attr, tid)
            return cache[key]

        for s_ref, t_ref in pairs:
            sv = emb(s_ref, s_attr)
            tv = emb(t_ref, t_attr)
            if sv is None or tv is None:
                continue
            heap.offer(s_ref, t_ref, distance(meta.metric, sv, tv))
    return heap.items()


def range_query(db: Database, vertex_type: str, attr: str, q, threshold: float,
                filter: VertexSet | None = None,
                at_tid: int | None = None) -> list[tuple[VertexRef, float]]:
    """Every valid (vertex, distance) with distance strictly below threshold."""
    meta = db.catalog.embedding_meta(vertex_type, attr)
    if meta.metric is Metric.INNER_PRODUCT:
        raise SemanticError(
            "range search is not defined for INNER_PRODUCT (unbounded below)")
    q = np.asarray(q, dtype=np.float32)
    if meta.metric is Metric.COSINE:
        from .metrics import normalize
        q = normalize(q)
    out: list[tuple[VertexRef, float]] = []
    with db.pinned(at_tid) as tid:
        for seg in db.segments_of(vertex_type):
            mask = filter.mask_for(vertex_type, seg) if filter is not None else None
            if filter is not None and mask is None:
                continue
            part = db.segment_range(vertex_type, attr, seg, q, threshold, mask, tid)
            base = seg * db.segment_capacity
            out.extend(((vertex_type, base + off), d) for off, d in part)
    out.sort(key=lambda item: (item[1], item[0]))
    return out
