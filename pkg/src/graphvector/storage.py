"""Segmented property-graph storage with MVCC vector deltas.

Vertices of one type are packed into fixed-capacity segments; scalar rows
and adjacency live in the vertex segment, embedding vectors live in
separate per-(segment, attribute) streams that share the segment's id
space. Every committed transaction gets one TID from a global counter, and
readers resolve any past TID against immutable index snapshots plus the
delta records that follow them.

On-disk layout under the database root:

    catalog.json, meta.json
    data/<type>/seg<k>.vtx                    scalar rows + adjacency (JSON)
    data/<type>/<attr>/seg<k>.emb             GVEC header + dense f32 rows
    data/<type>/<attr>/seg<k>.delta.<n>       GDLT header + delta records
    data/<type>/<attr>/seg<k>.hnsw            graph index snapshot
    wal/partition<p>.log                      JSONL commit log

Vertex segment files never contain vector payloads; the decoupling is
structural and checked by tests.
"""

from __future__ import annotations

import json
import os
import struct
import threading
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .errors import (ConflictError, DecodeError, DimensionMismatch,
                     ValidationError)
from .index import (Filter, HnswIndex, IndexParams, SearchParams, VectorIndex,
                    build_index, level_seed)
from .metrics import Metric, distance_many, normalize
from .predicates import Predicate
from .records import Action, DeltaRecord, decode_records, encode_records
from .schema import Catalog, EmbeddingMeta

DELTA_MAGIC = b"GDLT"
EMB_MAGIC = b"GVEC"
DEFAULT_SEGMENT_CAPACITY = 1024

VertexKey = tuple[str, int]  # (vertex type, global per-type ordinal)


# ---------------------------------------------------------------------------
# delta files and index snapshots


class DeltaFile:
    """One persisted run of delta records covering the TID interval
    (tid_lo, tid_hi]."""

    def __init__(self, path: Path | None, dim: int, tid_lo: int, tid_hi: int,
                 count: int, records: list[DeltaRecord] | None = None):
        if tid_hi <= tid_lo:
            raise ValueError(f"empty or inverted interval ({tid_lo}, {tid_hi}]")
        self.path = path
        self.dim = dim
        self.tid_lo = tid_lo
        self.tid_hi = tid_hi
        self.count = count
        self._records = records

    def records(self) -> list[DeltaRecord]:
        if self._records is None:
            buf = self.path.read_bytes()
            self._records = _decode_delta_file(buf, self.path)[3]
        return self._records

    @classmethod
    def write(cls, path: Path, records: list[DeltaRecord], dim: int,
              tid_lo: int, tid_hi: int) -> "DeltaFile":
        payload = encode_records(records, dim)
        head = DELTA_MAGIC + struct.pack("<IIQQQ", 1, dim, tid_lo, tid_hi, len(records))
        tmp = path.with_suffix(path.suffix + ".tmp")
        with open(tmp, "wb") as fh:
            fh.write(head)
            fh.write(payload)
            fh.flush()
            os.fsync(fh.fileno())
        tmp.replace(path)
        return cls(path, dim, tid_lo, tid_hi, len(records), list(records))

    @classmethod
    def open(cls, path: Path) -> "DeltaFile":
        buf = path.read_bytes()
        dim, tid_lo, tid_hi, records = _decode_delta_file(buf, path)
        return cls(path, dim, tid_lo, tid_hi, len(records), records)


def _decode_delta_file(buf: bytes, path) -> tuple[int, int, int, list[DeltaRecord]]:
    if buf[:4] != DELTA_MAGIC:
        raise DecodeError(f"{path}: bad delta magic {buf[:4]!r}")
    version, dim, tid_lo, tid_hi, count = struct.unpack_from("<IIQQQ", buf, 4)
    if version != 1:
        raise DecodeError(f"{path}: unsupported delta version {version}")
    records = decode_records(buf[4 + struct.calcsize("<IIQQQ"):], dim)
    if len(records) != count:
        raise DecodeError(f"{path}: record count mismatch")
    return dim, tid_lo, tid_hi, records


class IndexSnapshot:
    """Immutable published index valid up to snapshot_tid."""

    def __init__(self, index: VectorIndex, snapshot_tid: int):
        self.index = index
        self.snapshot_tid = snapshot_tid
        index.snapshot_tid = snapshot_tid
        self._refs = 0
        self._lock = threading.Lock()

    def pin(self) -> None:
        with self._lock:
            self._refs += 1

    def unpin(self) -> None:
        with self._lock:
            self._refs -= 1

    @property
    def refcount(self) -> int:
        return self._refs


class EmbeddingStream:
    """Mutation pipeline for one (segment, embedding attribute):
    in-memory records -> delta files -> index snapshots."""

    def __init__(self, type_name: str, attr: str, segment: int, meta: EmbeddingMeta,
                 index_params: IndexParams):
        self.type_name = type_name
        self.attr = attr
        self.segment = segment
        self.meta = meta
        self.index_params = index_params
        self.mem: list[DeltaRecord] = []
        self.files: list[DeltaFile] = []
        self.snapshots: list[IndexSnapshot] = []
        self.next_file_no = 0
        self.lock = threading.Lock()

    def snapshot_at(self, at_tid: int) -> IndexSnapshot | None:
        best = None
        for snap in self.snapshots:
            if snap.snapshot_tid <= at_tid:
                best = snap
        return best

    def newest_snapshot_tid(self) -> int:
        return self.snapshots[-1].snapshot_tid if self.snapshots else 0

    def persisted_hi(self) -> int:
        hi = self.newest_snapshot_tid()
        if self.files:
            hi = max(hi, self.files[-1].tid_hi)
        return hi

    def pending_state(self, at_tid: int, snapshot_tid: int) -> dict[int, DeltaRecord]:
        """Last-writer-wins fold of records in (snapshot_tid, at_tid].

        mem is copied before files so a concurrent delta_merge (which
        publishes the new file before trimming mem) can only produce
        duplicates, never gaps; folding by tid makes duplicates harmless.
        """
        mem_copy = list(self.mem)
        files = self.files
        pending: dict[int, DeltaRecord] = {}

        def fold(rec: DeltaRecord) -> None:
            if snapshot_tid < rec.tid <= at_tid:
                cur = pending.get(rec.id)
                if cur is None or rec.tid >= cur.tid:
                    pending[rec.id] = rec

        for f in files:
            if f.tid_hi <= snapshot_tid or f.tid_lo >= at_tid:
                continue
            for rec in f.records():
                fold(rec)
        for rec in mem_copy:
            fold(rec)
        return pending

    def fresh_index(self, seed_extra: int = 0) -> VectorIndex:
        seed = level_seed(self.segment, self.attr) + seed_extra
        return build_index(self.meta.index_kind, self.meta.dimension,
                           self.meta.metric, None, self.index_params, seed=seed)


# ---------------------------------------------------------------------------
# vertex segments


class VertexSegment:
    """Scalar rows, tombstones, and outgoing adjacency for one id range."""

    def __init__(self, type_name: str, ordinal: int, capacity: int):
        self.type_name = type_name
        self.ordinal = ordinal
        self.capacity = capacity
        # in-segment ordinal -> list of (tid, attrs | None); None marks deletion
        self.rows: dict[int, list[tuple[int, dict | None]]] = {}
        # in-segment ordinal -> list of (tid, edge_type, dst_type, dst_gid)
        self.out_edges: dict[int, list[tuple[int, str, str, int]]] = {}
        self.last_write: dict[int, int] = {}

    def visible_attrs(self, off: int, at_tid: int) -> dict | None:
        versions = self.rows.get(off)
        if not versions:
            return None
        chosen = None
        for tid, attrs in versions:
            if tid > at_tid:
                break
            chosen = attrs
        return chosen

    def row_count(self) -> int:
        return len(self.rows)


# ---------------------------------------------------------------------------
# transactions


class Transaction:
    """Buffered writes that become visible atomically at one TID."""

    def __init__(self, db: "Database"):
        self.db = db
        self.begin_tid = db.committed_tid
        self.ops: list[tuple] = []
        self._done = False

    # -- op builders (validation happens eagerly where it is type-local) --

    def insert_vertex(self, type_name: str, pid, attrs: dict | None = None) -> None:
        vt = self.db.catalog.get_vertex_type(type_name)
        attrs = dict(attrs or {})
        for a in attrs:
            if a not in vt.attributes and a != vt.primary_id:
                raise ValidationError(f"{type_name} has no scalar attribute {a!r}")
        attrs[vt.primary_id] = pid
        self.ops.append(("vertex_upsert", type_name, pid, attrs))

    update_vertex = insert_vertex  # same buffered shape; both are row upserts

    def delete_vertex(self, type_name: str, pid) -> None:
        self.db.catalog.get_vertex_type(type_name)
        self.ops.append(("vertex_delete", type_name, pid))

    def add_edge(self, edge_type: str, src_pid, dst_pid) -> None:
        self.db.catalog.get_edge_type(edge_type)
        self.ops.append(("edge_add", edge_type, src_pid, dst_pid))

    def upsert_embedding(self, type_name: str, pid, attr: str, vector) -> None:
        meta = self.db.catalog.embedding_meta(type_name, attr)
        vec = np.asarray(vector, dtype=np.float32)
        if vec.shape != (meta.dimension,):
            raise ValidationError(
                f"{type_name}.{attr} expects dimension {meta.dimension}, got shape {vec.shape}")
        if not np.all(np.isfinite(vec)):
            raise ValidationError(f"{type_name}.{attr}: vector values must be finite")
        if meta.metric is Metric.COSINE:
            try:
                vec = normalize(vec)
            except ValueError:
                raise ValidationError(
                    f"{type_name}.{attr}: zero vector not allowed under COSINE") from None
        self.ops.append(("emb_upsert", type_name, pid, attr, vec))

    def delete_embedding(self, type_name: str, pid, attr: str) -> None:
        self.db.catalog.embedding_meta(type_name, attr)
        self.ops.append(("emb_delete", type_name, pid, attr))

    def commit(self) -> int:
        if self._done:
            raise ValidationError("transaction already committed")
        self._done = True
        return self.db._commit(self)


# ---------------------------------------------------------------------------
# database


class _TypeStore:
    def __init__(self, type_name: str, capacity: int):
        self.type_name = type_name
        self.capacity = capacity
        self.segments: list[VertexSegment] = []
        self.id_map: dict = {}
        self.pid_of: dict[int, object] = {}
        self.next_ordinal = 0
        # reverse adjacency: dst gid -> list of (tid, edge_type, src_type, src_gid)
        self.rev_edges: dict[int, list[tuple[int, str, str, int]]] = {}
        self.streams: dict[str, list[EmbeddingStream]] = {}

    def segment(self, seg: int) -> VertexSegment:
        while len(self.segments) <= seg:
            self.segments.append(VertexSegment(self.type_name, len(self.segments),
                                               self.capacity))
        return self.segments[seg]


class Database:
    """Embeddable engine instance. `root=None` keeps everything in memory."""

    def __init__(self, root: str | Path | None = None, catalog: Catalog | None = None,
                 segment_capacity: int = DEFAULT_SEGMENT_CAPACITY,
                 num_partitions: int = 1, fsync_wal: bool = False,
                 index_params: IndexParams | None = None):
        self.root = Path(root) if root is not None else None
        self.catalog = catalog or Catalog()
        self.segment_capacity = segment_capacity
        self.num_partitions = num_partitions
        self.fsync_wal = fsync_wal
        self.index_params = index_params or IndexParams()
        self.committed_tid = 0
        self._stores: dict[str, _TypeStore] = {}
        self._commit_lock = threading.Lock()
        self._pin_lock = threading.Lock()
        self._pins: dict[int, int] = {}
        self._live_cache: dict[tuple, np.ndarray] = {}
        self._wal_handles: dict[int, object] = {}
        if self.root is not None:
            (self.root / "data").mkdir(parents=True, exist_ok=True)
            (self.root / "wal").mkdir(parents=True, exist_ok=True)

    # --- plumbing ---

    def store(self, type_name: str) -> _TypeStore:
        self.catalog.get_vertex_type(type_name)
        st = self._stores.get(type_name)
        if st is None:
            st = _TypeStore(type_name, self.segment_capacity)
            self._stores[type_name] = st
        return st

    def stream(self, type_name: str, attr: str, seg: int) -> EmbeddingStream:
        meta = self.catalog.embedding_meta(type_name, attr)
        st = self.store(type_name)
        per_seg = st.streams.setdefault(attr, [])
        while len(per_seg) <= seg:
            params = IndexParams(self.index_params.M, self.index_params.ef_construction,
                                 meta.metric)
            per_seg.append(EmbeddingStream(type_name, attr, len(per_seg), meta, params))
        return per_seg[seg]

    def segments_of(self, type_name: str) -> list[int]:
        st = self._stores.get(type_name)
        return list(range(len(st.segments))) if st else []

    def seg_of(self, gid: int) -> tuple[int, int]:
        return divmod(gid, self.segment_capacity)

    def partition_of_segment(self, seg: int) -> int:
        return seg % self.num_partitions

    def partition_segments(self, num_partitions: int) -> dict[tuple[str, int], int]:
        """Deterministic round-robin segment placement."""
        out = {}
        for type_name in sorted(self._stores):
            for seg in self.segments_of(type_name):
                out[(type_name, seg)] = seg % num_partitions
        return out

    # --- transactions ---

    def begin(self) -> Transaction:
        return Transaction(self)

    @contextmanager
    def transact(self):
        txn = self.begin()
        yield txn
        txn.commit()

    def _resolve_for_txn(self, txn: Transaction, created: dict) -> None:
        """Pre-apply validation: every referenced vertex must exist (or be
        created earlier in this transaction); conflicts fail the commit."""
        for op in txn.ops:
            kind = op[0]
            if kind == "vertex_upsert":
                created[(op[1], op[2])] = True
            elif kind in ("emb_upsert", "emb_delete", "vertex_delete"):
                type_name, pid = op[1], op[2]
                if (type_name, pid) in created:
                    continue
                if self.store(type_name).id_map.get(pid) is None:
                    raise ValidationError(f"{type_name} vertex {pid!r} does not exist")
            elif kind == "edge_add":
                et = self.catalog.get_edge_type(op[1])
                for t, pid in ((et.from_type, op[2]), (et.to_type, op[3])):
                    if (t, pid) in created:
                        continue
                    if self.store(t).id_map.get(pid) is None:
                        raise ValidationError(f"{t} vertex {pid!r} does not exist")

    def _conflict_check(self, txn: Transaction) -> None:
        touched: set[tuple[str, object]] = set()
        for op in txn.ops:
            kind = op[0]
            if kind == "edge_add":
                et = self.catalog.get_edge_type(op[1])
                touched.add((et.from_type, op[2]))
            else:
                touched.add((op[1], op[2]))
        for type_name, pid in touched:
            st = self.store(type_name)
            gid = st.id_map.get(pid)
            if gid is None:
                continue
            seg, off = self.seg_of(gid)
            last = st.segment(seg).last_write.get(off, 0)
            if last > txn.begin_tid:
                raise ConflictError(
                    f"{type_name} vertex {pid!r} was modified at tid {last} "
                    f"after this transaction began at tid {txn.begin_tid}")

    def _commit(self, txn: Transaction) -> int:
        if not txn.ops:
            return self.committed_tid
        with self._commit_lock:
            self._resolve_for_txn(txn, {})
            self._conflict_check(txn)
            tid = self.committed_tid + 1
            self._wal_append(tid, txn.ops)
            for op in txn.ops:
                self._apply(tid, op)
            self._live_cache.clear()
            self.committed_tid = tid  # publish: readers pin this last
        return tid

    def _ensure_vertex(self, tid: int, type_name: str, pid) -> int:
        st = self.store(type_name)
        gid = st.id_map.get(pid)
        if gid is None:
            gid = st.next_ordinal
            st.next_ordinal += 1
            st.id_map[pid] = gid
            st.pid_of[gid] = pid
        return gid

    def _apply(self, tid: int, op: tuple) -> None:
        kind = op[0]
        if kind == "vertex_upsert":
            _, type_name, pid, attrs = op
            st = self.store(type_name)
            gid = self._ensure_vertex(tid, type_name, pid)
            seg, off = self.seg_of(gid)
            segment = st.segment(seg)
            versions = segment.rows.setdefault(off, [])
            base = versions[-1][1] if versions and versions[-1][1] is not None else {}
            merged = dict(base)
            merged.update(attrs)
            versions.append((tid, merged))
            segment.last_write[off] = tid
        elif kind == "vertex_delete":
            _, type_name, pid = op
            st = self.store(type_name)
            gid = st.id_map.get(pid)
            if gid is None:
                return
            seg, off = self.seg_of(gid)
            segment = st.segment(seg)
            segment.rows.setdefault(off, []).append((tid, None))
            segment.last_write[off] = tid
            # embeddings of a deleted vertex disappear with it
            vt = self.catalog.get_vertex_type(type_name)
            for attr in vt.embeddings:
                stream = self.stream(type_name, attr, seg)
                stream.mem.append(DeltaRecord(Action.DELETE, off, tid))
        elif kind == "edge_add":
            _, edge_type, src_pid, dst_pid = op
            et = self.catalog.get_edge_type(edge_type)
            src_st = self.store(et.from_type)
            dst_st = self.store(et.to_type)
            src_gid = src_st.id_map[src_pid]
            dst_gid = dst_st.id_map[dst_pid]
            seg, off = self.seg_of(src_gid)
            segment = src_st.segment(seg)
            segment.out_edges.setdefault(off, []).append((tid, edge_type, et.to_type, dst_gid))
            segment.last_write[off] = tid
            dst_st.rev_edges.setdefault(dst_gid, []).append((tid, edge_type, et.from_type, src_gid))
        elif kind == "emb_upsert":
            _, type_name, pid, attr, vec = op
            gid = self._ensure_vertex(tid, type_name, pid)
            seg, off = self.seg_of(gid)
            self.store(type_name).segment(seg).last_write[off] = tid
            self.stream(type_name, attr, seg).mem.append(
                DeltaRecord(Action.UPSERT, off, tid, vec))
        elif kind == "emb_delete":
            _, type_name, pid, attr = op
            st = self.store(type_name)
            gid = st.id_map.get(pid)
            if gid is None:
                return
            seg, off = self.seg_of(gid)
            st.segment(seg).last_write[off] = tid
            self.stream(type_name, attr, seg).mem.append(
                DeltaRecord(Action.DELETE, off, tid))
        else:
            raise ValidationError(f"unknown op kind {kind!r}")

    # --- pins ---

    @contextmanager
    def pinned(self, at_tid: int | None = None):
        tid = self.committed_tid if at_tid is None else at_tid
        with self._pin_lock:
            self._pins[tid] = self._pins.get(tid, 0) + 1
        try:
            yield tid
        finally:
            with self._pin_lock:
                self._pins[tid] -= 1
                if self._pins[tid] == 0:
                    del self._pins[tid]

    def min_pinned_tid(self) -> int | None:
        with self._pin_lock:
            return min(self._pins) if self._pins else None

    # --- reads ---

    def resolve(self, type_name: str, pid) -> int | None:
        return self.store(type_name).id_map.get(pid)

    def pid_of(self, type_name: str, gid: int):
        return self.store(type_name).pid_of.get(gid)

    def vertex_attrs(self, type_name: str, gid: int, at_tid: int) -> dict | None:
        st = self.store(type_name)
        seg, off = self.seg_of(gid)
        if seg >= len(st.segments):
            return None
        return st.segments[seg].visible_attrs(off, at_tid)

    def vertex_exists(self, type_name: str, gid: int, at_tid: int) -> bool:
        return self.vertex_attrs(type_name, gid, at_tid) is not None

    def live_mask(self, type_name: str, seg: int, at_tid: int) -> np.ndarray:
        key = (type_name, seg, at_tid)
        cached = self._live_cache.get(key)
        if cached is not None:
            return cached
        st = self.store(type_name)
        segment = st.segment(seg)
        size = self._segment_row_span(st, seg)
        mask = np.zeros(size, dtype=bool)
        for off in segment.rows:
            if segment.visible_attrs(off, at_tid) is not None:
                mask[off] = True
        self._live_cache[key] = mask
        return mask

    def _segment_row_span(self, st: _TypeStore, seg: int) -> int:
        hi = min(st.next_ordinal - seg * self.segment_capacity, self.segment_capacity)
        return max(hi, 0)

    def segment_scan(self, type_name: str, predicate: Predicate,
                     at_tid: int) -> dict[int, np.ndarray]:
        """Per-segment bitmaps of live vertices satisfying the predicate."""
        st = self.store(type_name)
        out: dict[int, np.ndarray] = {}
        for seg_no in range(len(st.segments)):
            segment = st.segments[seg_no]
            mask = np.zeros(self._segment_row_span(st, seg_no), dtype=bool)
            for off in segment.rows:
                attrs = segment.visible_attrs(off, at_tid)
                if attrs is not None and predicate.evaluate(attrs):
                    mask[off] = True
            out[seg_no] = mask
        return out

    def out_neighbors(self, type_name: str, gid: int, edge_type: str | None,
                      at_tid: int) -> list[tuple[str, int]]:
        st = self.store(type_name)
        seg, off = self.seg_of(gid)
        if seg >= len(st.segments):
            return []
        result = []
        for tid, etype, dst_type, dst_gid in st.segments[seg].out_edges.get(off, []):
            if tid > at_tid or (edge_type is not None and etype != edge_type):
                continue
            if self.vertex_exists(dst_type, dst_gid, at_tid):
                result.append((dst_type, dst_gid))
        return result

    def in_neighbors(self, type_name: str, gid: int, edge_type: str | None,
                     at_tid: int) -> list[tuple[str, int]]:
        st = self.store(type_name)
        result = []
        for tid, etype, src_type, src_gid in st.rev_edges.get(gid, []):
            if tid > at_tid or (edge_type is not None and etype != edge_type):
                continue
            if self.vertex_exists(src_type, src_gid, at_tid):
                result.append((src_type, src_gid))
        return result

    # --- embedding reads (snapshot + delta combination) ---

    def get_embedding(self, type_name: str, pid, attr: str,
                      at_tid: int | None = None) -> np.ndarray | None:
        meta = self.catalog.embedding_meta(type_name, attr)  # raises UnknownAttribute
        at = self.committed_tid if at_tid is None else at_tid
        gid = self.resolve(type_name, pid)
        if gid is None:
            return None
        seg, off = self.seg_of(gid)
        st = self.store(type_name)
        if attr not in st.streams or seg >= len(st.streams[attr]):
            return None
        stream = st.streams[attr][seg]
        snap = stream.snapshot_at(at)
        snap_tid = snap.snapshot_tid if snap else 0
        pending = stream.pending_state(at, snap_tid)
        rec = pending.get(off)
        if rec is not None:
            return rec.value.copy() if rec.action is Action.UPSERT else None
        if snap is not None:
            return snap.index.get_embedding(off)
        return None

    def segment_vector_state(self, type_name: str, attr: str, seg: int,
                             at_tid: int) -> dict[int, np.ndarray]:
        """Fully materialized in-segment ordinal -> vector map at a TID."""
        st = self.store(type_name)
        if attr not in st.streams or seg >= len(st.streams[attr]):
            return {}
        stream = st.streams[attr][seg]
        snap = stream.snapshot_at(at_tid)
        snap_tid = snap.snapshot_tid if snap else 0
        state: dict[int, np.ndarray] = {}
        if snap is not None:
            for o in snap.index.ordinals():
                state[o] = snap.index.get_embedding(o)
        for off, rec in stream.pending_state(at_tid, snap_tid).items():
            if rec.action is Action.UPSERT:
                state[off] = rec.value.copy()
            else:
                state.pop(off, None)
        return state

    def segment_topk(self, type_name: str, attr: str, seg: int, q: np.ndarray,
                     k: int, ef: int, mask: np.ndarray | None, at_tid: int,
                     bruteforce_factor: float = 0.01,
                     bruteforce_min_mult: int = 4) -> tuple[list[tuple[int, float]], dict]:
        """Valid top-k of one segment at a TID: index snapshot search plus a
        brute-force pass over the newer delta records, merged.

        Returns (results as (in-segment ordinal, distance)), info with the
        route taken. Falls back to a full scan when the filter keeps fewer
        than max(4k, 1% of the segment) candidates.
        """
        meta = self.catalog.embedding_meta(type_name, attr)
        q = np.asarray(q, dtype=np.float32)
        if q.shape != (meta.dimension,):
            raise DimensionMismatch(
                f"query has shape {q.shape}, {type_name}.{attr} dimension {meta.dimension}")
        st = self.store(type_name)
        info = {"route": "empty", "touched": False}
        if attr not in st.streams or seg >= len(st.streams[attr]):
            return [], info
        stream = st.streams[attr][seg]
        snap = stream.snapshot_at(at_tid)
        snap_tid = snap.snapshot_tid if snap else 0
        pending = stream.pending_state(at_tid, snap_tid)
        live = self.live_mask(type_name, seg, at_tid)
        span = len(live)
        if mask is not None:
            valid = np.zeros(span, dtype=bool)
            m = min(span, len(mask))
            valid[:m] = mask[:m] & live[:m]
        else:
            valid = live.copy()

        results: list[tuple[int, float]] = []
        if snap is not None and snap.index.count() > 0:
            snap.pin()
            try:
                idx_mask = valid.copy()
                for off in pending:
                    if off < span:
                        idx_mask[off] = False
                filt = Filter(idx_mask)
                seg_live = int(np.count_nonzero(live))
                threshold = max(bruteforce_min_mult * k,
                                int(bruteforce_factor * seg_live))
                if filt.valid_count == 0:
                    info["route"] = "none"
                elif filt.valid_count < threshold:
                    results = snap.index.scan_topk(q, SearchParams(k=k, ef=max(ef, k)), filt)
                    info["route"] = "bruteforce"
                else:
                    results = snap.index.top_k_search(q, SearchParams(k=k, ef=max(ef, k)), filt)
                    info["route"] = "index"
            finally:
                snap.unpin()

        fresh = [(off, rec.value) for off, rec in pending.items()
                 if rec.action is Action.UPSERT and off < span and valid[off]]
        if fresh:
            offs = np.array([o for o, _ in fresh], dtype=np.int64)
            matv = np.stack([v for _, v in fresh])
            dists = distance_many(meta.metric, q, matv)
            order = np.lexsort((offs, dists))
            results.extend((int(offs[i]), float(dists[i])) for i in order[:k])
            results.sort(key=lambda t: (t[1], t[0]))
            results = results[:k]
        info["touched"] = info["route"] != "empty" or bool(fresh)
        return results, info

    def segment_range(self, type_name: str, attr: str, seg: int, q: np.ndarray,
                      threshold: float, mask: np.ndarray | None,
                      at_tid: int) -> list[tuple[int, float]]:
        """All valid (ordinal, distance) below threshold for one segment."""
        meta = self.catalog.embedding_meta(type_name, attr)
        q = np.asarray(q, dtype=np.float32)
        if q.shape != (meta.dimension,):
            raise DimensionMismatch(
                f"query has shape {q.shape}, {type_name}.{attr} dimension {meta.dimension}")
        if threshold <= 0:
            return []
        st = self.store(type_name)
        if attr not in st.streams or seg >= len(st.streams[attr]):
            return []
        stream = st.streams[attr][seg]
        snap = stream.snapshot_at(at_tid)
        snap_tid = snap.snapshot_tid if snap else 0
        pending = stream.pending_state(at_tid, snap_tid)
        live = self.live_mask(type_name, seg, at_tid)
        span = len(live)
        if mask is not None:
            valid = np.zeros(span, dtype=bool)
            m = min(span, len(mask))
            valid[:m] = mask[:m] & live[:m]
        else:
            valid = live.copy()
        results: list[tuple[int, float]] = []
        if snap is not None and snap.index.count() > 0:
            snap.pin()
            try:
                idx_mask = valid.copy()
                for off in pending:
                    if off < span:
                        idx_mask[off] = False
                results = snap.index.range_search(q, threshold, Filter(idx_mask))
            finally:
                snap.unpin()
        fresh = [(off, rec.value) for off, rec in pending.items()
                 if rec.action is Action.UPSERT and off < span and valid[off]]
        if fresh:
            offs = np.array([o for o, _ in fresh], dtype=np.int64)
            matv = np.stack([v for _, v in fresh])
            dists = distance_many(meta.metric, q, matv)
            results.extend((int(o), float(d)) for o, d in zip(offs, dists) if d < threshold)
        results.sort(key=lambda t: (t[1], t[0]))
        return results

    # --- WAL ---

    def _wal_handle(self, partition: int):
        fh = self._wal_handles.get(partition)
        if fh is None:
            path = self.root / "wal" / f"partition{partition}.log"
            fh = open(path, "a", encoding="utf-8")
            self._wal_handles[partition] = fh
        return fh

    def _wal_append(self, tid: int, ops: list[tuple]) -> None:
        if self.root is None:
            return
        by_partition: dict[int, list] = {}
        for op in ops:
            part = self._op_partition(op)
            by_partition.setdefault(part, []).append(_op_to_json(op))
        for part, jops in sorted(by_partition.items()):
            fh = self._wal_handle(part)
            fh.write(json.dumps({"tid": tid, "ops": jops}) + "\n")
            fh.flush()
            if self.fsync_wal:
                os.fsync(fh.fileno())

    def _op_partition(self, op: tuple) -> int:
        kind = op[0]
        if kind == "edge_add":
            et = self.catalog.get_edge_type(op[1])
            type_name, pid = et.from_type, op[2]
        else:
            type_name, pid = op[1], op[2]
        gid = self.store(type_name).id_map.get(pid)
        if gid is None:
            return 0
        return self.partition_of_segment(gid // self.segment_capacity)

    # --- checkpoint and recovery ---

    def flush(self) -> None:
        """Persist scalar segments, dense vector state, and catalog; then
        truncate the commit logs. Delta files and index snapshots are written
        by the vacuum paths as they run."""
        if self.root is None:
            raise ValidationError("in-memory database has no files to flush")
        from .vacuum import delta_merge  # local import; vacuum builds on storage

        tid = self.committed_tid
        for type_name, st in self._stores.items():
            for attr, per_seg in st.streams.items():
                for stream in per_seg:
                    delta_merge(self, type_name, attr, stream.segment, tid)
        self.catalog.dump(self.root / "catalog.json")
        for type_name, st in self._stores.items():
            tdir = self.root / "data" / type_name
            tdir.mkdir(parents=True, exist_ok=True)
            for segment in st.segments:
                self._write_vtx(tdir / f"seg{segment.ordinal}.vtx", st, segment, tid)
            for attr, per_seg in st.streams.items():
                adir = tdir / attr
                adir.mkdir(parents=True, exist_ok=True)
                for stream in per_seg:
                    self._write_emb(adir / f"seg{stream.segment}.emb", type_name,
                                    attr, stream, tid)
        meta = {
            "committed_tid": tid,
            "segment_capacity": self.segment_capacity,
            "next_ordinal": {t: st.next_ordinal for t, st in self._stores.items()},
        }
        (self.root / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))
        for part, fh in self._wal_handles.items():
            fh.close()
        self._wal_handles.clear()
        for path in (self.root / "wal").glob("partition*.log"):
            path.write_text("")

    def _write_vtx(self, path: Path, st: _TypeStore, segment: VertexSegment,
                   at_tid: int) -> None:
        rows = {}
        for off in sorted(segment.rows):
            attrs = segment.visible_attrs(off, at_tid)
            gid = segment.ordinal * self.segment_capacity + off
            rows[str(off)] = {
                "pid": st.pid_of.get(gid),
                "attrs": attrs,
                "deleted": attrs is None,
            }
        edges = {}
        for off in sorted(segment.out_edges):
            visible = [[etype, dst_type, dst_gid]
                       for tid, etype, dst_type, dst_gid in segment.out_edges[off]
                       if tid <= at_tid]
            if visible:
                edges[str(off)] = visible
        doc = {"format": "GVTX", "version": 1, "type": st.type_name,
               "segment": segment.ordinal, "rows": rows, "edges": edges}
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_text(json.dumps(doc))
        tmp.replace(path)

    def _write_emb(self, path: Path, type_name: str, attr: str,
                   stream: EmbeddingStream, at_tid: int) -> None:
        state = self.segment_vector_state(type_name, attr, stream.segment, at_tid)
        dim = stream.meta.dimension
        count = (max(state) + 1) if state else 0
        mat = np.full((count, dim), np.nan, dtype="<f4")
        for off, vec in state.items():
            mat[off] = vec
        head = EMB_MAGIC + struct.pack("<IQ", dim, count)
        tmp = path.with_suffix(path.suffix + ".tmp")
        with open(tmp, "wb") as fh:
            fh.write(head)
            fh.write(mat.tobytes())
            fh.flush()
            os.fsync(fh.fileno())
        tmp.replace(path)

    @staticmethod
    def read_emb(path: str | Path) -> np.ndarray:
        """Dense rows from a .emb file; NaN rows mark absent ordinals."""
        buf = Path(path).read_bytes()
        if buf[:4] != EMB_MAGIC:
            raise DecodeError(f"{path}: bad magic {buf[:4]!r}")
        dim, count = struct.unpack_from("<IQ", buf, 4)
        expect = 4 + struct.calcsize("<IQ") + 4 * dim * count
        if len(buf) != expect:
            raise DecodeError(f"{path}: want {expect} bytes, have {len(buf)}")
        vecs = np.frombuffer(buf, dtype="<f4", count=dim * count,
                             offset=4 + struct.calcsize("<IQ"))
        return vecs.reshape(count, dim).copy()

    @classmethod
    def open(cls, root: str | Path, **kwargs) -> "Database":
        """Load a checkpointed database and replay any trailing commit log."""
        root = Path(root)
        catalog = Catalog.load(root / "catalog.json")
        meta = json.loads((root / "meta.json").read_text()) \
            if (root / "meta.json").exists() else {}
        db = cls(root, catalog=catalog,
                 segment_capacity=meta.get("segment_capacity",
                                           kwargs.pop("segment_capacity",
                                                      DEFAULT_SEGMENT_CAPACITY)),
                 **kwargs)
        checkpoint_tid = int(meta.get("committed_tid", 0))
        db.committed_tid = checkpoint_tid
        data = root / "data"
        if data.exists():
            for tdir in sorted(p for p in data.iterdir() if p.is_dir()):
                type_name = tdir.name
                if type_name not in catalog.vertex_types:
                    continue
                st = db.store(type_name)
                for vtx in sorted(tdir.glob("seg*.vtx"),
                                  key=lambda p: int(p.stem[3:])):
                    db._load_vtx(st, vtx, checkpoint_tid)
                st.next_ordinal = int(meta.get("next_ordinal", {}).get(
                    type_name, st.next_ordinal))
                for attr in catalog.vertex_types[type_name].embeddings:
                    adir = tdir / attr
                    if adir.exists():
                        db._load_streams(type_name, attr, adir, checkpoint_tid)
        db._replay_wal()
        return db

    def _load_vtx(self, st: _TypeStore, path: Path, tid: int) -> None:
        doc = json.loads(path.read_text())
        if doc.get("format") != "GVTX":
            raise DecodeError(f"{path}: not a vertex segment file")
        seg_no = int(doc["segment"])
        segment = st.segment(seg_no)
        for off_s, row in doc["rows"].items():
            off = int(off_s)
            gid = seg_no * self.segment_capacity + off
            pid = row.get("pid")
            if pid is not None:
                st.id_map[pid] = gid
                st.pid_of[gid] = pid
            segment.rows[off] = [(tid, None if row["deleted"] else row["attrs"])]
            segment.last_write[off] = tid
            st.next_ordinal = max(st.next_ordinal, gid + 1)
        for off_s, lst in doc.get("edges", {}).items():
            off = int(off_s)
            recs = [(tid, etype, dst_type, int(dst_gid)) for etype, dst_type, dst_gid in lst]
            segment.out_edges[off] = recs
            for _, etype, dst_type, dst_gid in recs:
                self.store(dst_type).rev_edges.setdefault(dst_gid, []).append(
                    (tid, etype, st.type_name, seg_no * self.segment_capacity + off))

    def _load_streams(self, type_name: str, attr: str, adir: Path,
                      checkpoint_tid: int) -> None:
        segs = sorted({int(p.stem[3:].split(".")[0])
                       for p in adir.glob("seg*") if not p.name.endswith(".tmp")})
        for seg_no in segs:
            stream = self.stream(type_name, attr, seg_no)
            hnsw_path = adir / f"seg{seg_no}.hnsw"
            emb_path = adir / f"seg{seg_no}.emb"
            if stream.meta.index_kind == "HNSW" and hnsw_path.exists():
                idx = HnswIndex.load(hnsw_path)
                stream.snapshots.append(IndexSnapshot(idx, idx.snapshot_tid))
            elif emb_path.exists():
                mat = self.read_emb(emb_path)
                items = [(off, mat[off]) for off in range(mat.shape[0])
                         if not np.any(np.isnan(mat[off]))]
                idx = build_index(stream.meta.index_kind, stream.meta.dimension,
                                  stream.meta.metric, items, stream.index_params,
                                  seed=level_seed(seg_no, attr))
                stream.snapshots.append(IndexSnapshot(idx, checkpoint_tid))
            delta_paths = sorted(adir.glob(f"seg{seg_no}.delta.*"),
                                 key=lambda p: int(p.suffix[1:]))
            snap_tid = stream.newest_snapshot_tid()
            for dpath in delta_paths:
                f = DeltaFile.open(dpath)
                stream.next_file_no = max(stream.next_file_no, int(dpath.suffix[1:]) + 1)
                if f.tid_hi <= snap_tid:
                    continue  # already folded into the loaded snapshot
                stream.files.append(f)

    def _replay_wal(self) -> None:
        checkpoint_tid = self.committed_tid
        entries: list[dict] = []
        for path in sorted((self.root / "wal").glob("partition*.log")):
            for line in path.read_text().splitlines():
                if line.strip():
                    entries.append(json.loads(line))
        entries.sort(key=lambda e: e["tid"])
        for entry in entries:
            tid = int(entry["tid"])
            for jop in entry["ops"]:
                op = _op_from_json(self.catalog, jop)
                if op[0].startswith("emb"):
                    type_name, pid = op[1], op[2]
                    gid = self.store(type_name).id_map.get(pid)
                    if gid is not None:
                        seg = gid // self.segment_capacity
                        stream = self.stream(type_name, op[3], seg)
                        if tid <= stream.persisted_hi():
                            continue  # already folded into a delta file or snapshot
                elif tid <= checkpoint_tid:
                    continue  # scalar state at the checkpoint already has it
                self._apply(tid, op)
            self.committed_tid = max(self.committed_tid, tid)

    def close(self) -> None:
        for fh in self._wal_handles.values():
            fh.close()
        self._wal_handles.clear()


def _op_to_json(op: tuple) -> list:
    kind = op[0]
    if kind == "emb_upsert":
        return [kind, op[1], op[2], op[3], [float(x) for x in op[4]]]
    return list(op)


def _op_from_json(catalog: Catalog, jop: list) -> tuple:
    kind = jop[0]
    if kind == "emb_upsert":
        return (kind, jop[1], jop[2], jop[3], np.asarray(jop[4], dtype=np.float32))
    return tuple(jop)
