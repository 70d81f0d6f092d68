"""Two-stage background maintenance for embedding streams.

Stage one (delta_merge) drains in-memory delta records into an immutable
delta file; stage two (index_merge) folds contiguous delta files into a new
index snapshot, cloning the previous one. Old snapshots and fully folded
files are garbage collected once no pinned reader can still need them.
Each stage leaves every TID readable throughout: readers combine whatever
snapshot/file/mem state they observe and get the same answer.
"""

from __future__ import annotations

import math
import threading
import time
from dataclasses import dataclass, field

from .errors import GapError
from .index import HnswIndex
from .records import DeltaRecord
from .storage import Database, DeltaFile, EmbeddingStream, IndexSnapshot

MEM_RECORDS_TRIGGER = 4096      # stage one: drain mem at this many records
MEM_AGE_TRIGGER = 1.0           # stage one: or when records sit this long (s)
PENDING_RECORDS_TRIGGER = 16384  # stage two: fold files at this many records
REBUILD_TOMBSTONE_FRACTION = 0.20


def delta_merge(db: Database, type_name: str, attr: str, seg: int,
                up_to_tid: int | None = None) -> DeltaFile | None:
    """Drain mem records with tid <= up_to_tid into one delta file.

    The file covers (persisted_hi, up_to_tid], keeping the file chain
    contiguous. Returns None when there is nothing to drain.
    """
    stream = db.stream(type_name, attr, seg)
    with stream.lock:
        up_to = db.committed_tid if up_to_tid is None else up_to_tid
        tid_lo = stream.persisted_hi()
        if up_to <= tid_lo:
            return None
        records = [r for r in stream.mem if tid_lo < r.tid <= up_to]
        if not records:
            return None
        tid_hi = max(r.tid for r in records)
        if db.root is not None:
            adir = db.root / "data" / type_name / attr
            adir.mkdir(parents=True, exist_ok=True)
            path = adir / f"seg{seg}.delta.{stream.next_file_no}"
            f = DeltaFile.write(path, records, stream.meta.dimension, tid_lo, tid_hi)
        else:
            f = DeltaFile(None, stream.meta.dimension, tid_lo, tid_hi,
                          len(records), records)
        stream.next_file_no += 1
        # publish the file before trimming mem; readers copy mem first, so
        # the worst a racing read sees is the same records twice
        with db._commit_lock:
            stream.files = stream.files + [f]
            stream.mem = [r for r in stream.mem if r.tid > tid_hi]
    return f


def index_merge(db: Database, type_name: str, attr: str, seg: int,
                num_threads: int = 1) -> IndexSnapshot | None:
    """Fold all delta files past the newest snapshot into a new snapshot.

    Clones the previous index and applies the records; raises GapError if
    the file chain has a hole (some interval of TIDs is in neither the
    snapshot nor a file). Rebuilds from live vectors instead of cloning
    when the clone would carry too many tombstones.
    """
    stream = db.stream(type_name, attr, seg)
    with stream.lock:
        prev = stream.snapshots[-1] if stream.snapshots else None
        snap_tid = prev.snapshot_tid if prev else 0
        files = [f for f in stream.files if f.tid_hi > snap_tid]
        if not files:
            return None
        expect = snap_tid
        for f in files:
            if f.tid_lo > expect:
                raise GapError(
                    f"{type_name}.{attr} seg{seg}: records in ({expect}, {f.tid_lo}] "
                    f"missing from the file chain")
            expect = f.tid_hi
        records: list[DeltaRecord] = []
        for f in files:
            records.extend(r for r in f.records() if snap_tid < r.tid <= f.tid_hi)
        new_tid = files[-1].tid_hi

        index = prev.index.clone() if prev else stream.fresh_index()
        index.update_items(records, num_threads=num_threads)
        if index.tombstone_fraction() > REBUILD_TOMBSTONE_FRACTION:
            rebuilt = stream.fresh_index(seed_extra=new_tid)
            for o in sorted(index.ordinals()):
                rebuilt.add(o, index.get_embedding(o))
            index = rebuilt
        snap = IndexSnapshot(index, new_tid)
        if db.root is not None and isinstance(index, HnswIndex):
            adir = db.root / "data" / type_name / attr
            adir.mkdir(parents=True, exist_ok=True)
            index.save(adir / f"seg{seg}.hnsw")
        stream.snapshots.append(snap)
    return snap


def gc(db: Database, type_name: str | None = None) -> dict:
    """Drop snapshots and files no reader can need any more.

    A stream is skipped (deferred) while some pinned TID is older than its
    newest snapshot, since that reader may still resolve against the older
    state. Files folded into the newest snapshot go with the snapshots.
    """
    removed_snaps = 0
    removed_files = 0
    deferred = 0
    min_pin = db.min_pinned_tid()
    for tname, st in db._stores.items():
        if type_name is not None and tname != type_name:
            continue
        for per_seg in st.streams.values():
            for stream in per_seg:
                with stream.lock:
                    if not stream.snapshots:
                        continue
                    newest = stream.snapshots[-1]
                    if min_pin is not None and min_pin < newest.snapshot_tid:
                        deferred += 1
                        continue
                    keep_snaps = []
                    for snap in stream.snapshots:
                        if snap is newest or snap.refcount > 0:
                            keep_snaps.append(snap)
                        else:
                            removed_snaps += 1
                    keep_files = []
                    for f in stream.files:
                        if f.tid_hi <= newest.snapshot_tid:
                            removed_files += 1
                            if f.path is not None:
                                f.path.unlink(missing_ok=True)
                        else:
                            keep_files.append(f)
                    stream.snapshots = keep_snaps
                    stream.files = keep_files
    return {"snapshots_removed": removed_snaps, "files_removed": removed_files,
            "deferred": deferred}


def tune_merge_threads(cpu_utilization: float, max_threads: int) -> int:
    """Merge thread budget that backs off as foreground load rises."""
    if max_threads < 1:
        raise ValueError("max_threads must be >= 1")
    util = min(max(cpu_utilization, 0.0), 1.0)
    return max(1, min(max_threads, math.floor(max_threads * (1.0 - util))))


@dataclass
class _StreamStatus:
    type_name: str
    attr: str
    segment: int
    mem_records: int
    pending_files: int
    pending_records: int
    snapshots: int
    newest_snapshot_tid: int
    tombstone_fraction: float

    def as_dict(self) -> dict:
        return {
            "type": self.type_name, "attr": self.attr, "segment": self.segment,
            "mem_records": self.mem_records, "pending_files": self.pending_files,
            "pending_records": self.pending_records, "snapshots": self.snapshots,
            "newest_snapshot_tid": self.newest_snapshot_tid,
            "tombstone_fraction": self.tombstone_fraction,
        }


class VacuumController:
    """Threshold-driven scheduler for the two merge stages plus gc.

    run_once applies one round of triggers; start() runs rounds on a
    background thread until stop(). Thread count for stage two follows
    current CPU utilization when psutil is available.
    """

    def __init__(self, db: Database, mem_records: int = MEM_RECORDS_TRIGGER,
                 mem_age: float = MEM_AGE_TRIGGER,
                 pending_records: int = PENDING_RECORDS_TRIGGER,
                 max_threads: int = 4, interval: float = 0.25):
        self.db = db
        self.mem_records = mem_records
        self.mem_age = mem_age
        self.pending_records = pending_records
        self.max_threads = max_threads
        self.interval = interval
        self._last_drain: dict[tuple, float] = {}
        self._thread: threading.Thread | None = None
        self._stop = threading.Event()
        self.rounds = 0

    def _streams(self):
        for tname, st in self.db._stores.items():
            for attr, per_seg in st.streams.items():
                for stream in per_seg:
                    yield tname, attr, stream

    def _merge_threads(self) -> int:
        try:
            import psutil
            util = psutil.cpu_percent(interval=None) / 100.0
        except Exception:
            util = 0.0
        return tune_merge_threads(util, self.max_threads)

    def run_once(self) -> dict:
        now = time.monotonic()
        drained = folded = 0
        threads = self._merge_threads()
        for tname, attr, stream in list(self._streams()):
            key = (tname, attr, stream.segment)
            last = self._last_drain.setdefault(key, now)
            if stream.mem and (len(stream.mem) >= self.mem_records
                               or now - last >= self.mem_age):
                if delta_merge(self.db, tname, attr, stream.segment) is not None:
                    drained += 1
                self._last_drain[key] = now
            snap_tid = stream.newest_snapshot_tid()
            pending = sum(f.count for f in stream.files if f.tid_hi > snap_tid)
            if pending >= self.pending_records:
                if index_merge(self.db, tname, attr, stream.segment,
                               num_threads=threads) is not None:
                    folded += 1
        collected = gc(self.db)
        self.rounds += 1
        return {"drained": drained, "folded": folded, **collected}

    def status(self) -> list[dict]:
        out = []
        for tname, attr, stream in self._streams():
            snap_tid = stream.newest_snapshot_tid()
            newest = stream.snapshots[-1] if stream.snapshots else None
            out.append(_StreamStatus(
                type_name=tname, attr=attr, segment=stream.segment,
                mem_records=len(stream.mem),
                pending_files=sum(1 for f in stream.files if f.tid_hi > snap_tid),
                pending_records=sum(f.count for f in stream.files
                                    if f.tid_hi > snap_tid),
                snapshots=len(stream.snapshots),
                newest_snapshot_tid=snap_tid,
                tombstone_fraction=(newest.index.tombstone_fraction()
                                    if newest else 0.0),
            ).as_dict())
        return out

    def start(self) -> None:
        if self._thread is not None:
            return
        self._stop.clear()

        def loop():
            while not self._stop.wait(self.interval):
                self.run_once()

        self._thread = threading.Thread(target=loop, name="vacuum", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        if self._thread is None:
            return
        self._stop.set()
        self._thread.join()
        self._thread = None
