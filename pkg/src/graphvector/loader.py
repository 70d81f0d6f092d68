"""Bulk ingestion: fvecs/bvecs vector files and CSV rows.

Scalars and vectors arrive from separate sources and meet on the primary
id. Everything goes through ordinary transactions in batches, so loaded
data is indistinguishable from data written any other way.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .datasets import read_bvecs, read_fvecs, write_fvecs
from .errors import DimensionMismatch, FormatError, ValidationError
from .storage import Database

BATCH = 512


def read_vector_csv(path, separator: str = ":") -> list[tuple[str, np.ndarray]]:
    """CSV of (id, vector) rows; vector values joined by the separator."""
    out = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row:
                continue
            if len(row) != 2:
                raise FormatError(
                    f"expected 2 columns (id, vector), got {len(row)}", i)
            try:
                vec = np.array([float(x) for x in row[1].strip().split(separator)],
                               dtype=np.float32)
            except ValueError as exc:
                raise FormatError(f"bad vector value: {exc}", i) from None
            out.append((row[0].strip(), vec))
    return out


# --- scalar coercion -----------------------------------------------------

_TRUE = {"true", "t", "1", "yes"}
_FALSE = {"false", "f", "0", "no"}


def coerce_scalar(text: str, scalar_type: str, record: int):
    text = text.strip()
    try:
        if scalar_type in ("INT", "UINT"):
            return int(text)
        if scalar_type in ("FLOAT", "DOUBLE"):
            return float(text)
        if scalar_type == "BOOL":
            low = text.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(f"not a boolean: {text!r}")
        return text  # STRING, DATETIME
    except ValueError as exc:
        raise FormatError(f"cannot read {scalar_type}: {exc}", record) from None


# --- loading entry points ------------------------------------------------

def load_vertex_csv(db: Database, path, vertex_type: str,
                    columns: list[str], batch: int = BATCH) -> int:
    """CSV rows to vertices; the first listed column is the primary id."""
    vt = db.catalog.get_vertex_type(vertex_type)
    if not columns:
        raise ValidationError("need at least the primary id column")
    types = {c: vt.scalar_type_of(c) for c in columns}
    count = 0
    txn = db.begin()
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row:
                continue
            if len(row) != len(columns):
                raise FormatError(
                    f"expected {len(columns)} columns, got {len(row)}", i)
            values = {c: coerce_scalar(row[j], types[c], i)
                      for j, c in enumerate(columns)}
            pid = values.pop(columns[0])
            txn.insert_vertex(vertex_type, pid, values)
            count += 1
            if count % batch == 0:
                txn.commit()
                txn = db.begin()
    if txn.ops:
        txn.commit()
    return count


def _coerce_pid(db: Database, vertex_type: str, raw: str, record: int):
    stype = db.catalog.get_vertex_type(vertex_type).scalar_type_of(
        db.catalog.get_vertex_type(vertex_type).primary_id)
    return coerce_scalar(raw, stype, record)


def load_embedding_csv(db: Database, path, vertex_type: str, attr: str,
                       separator: str = ":", batch: int = BATCH,
                       create_missing: bool = False) -> int:
    """CSV (id, joined-vector) rows into one embedding attribute."""
    meta = db.catalog.embedding_meta(vertex_type, attr)
    rows = read_vector_csv(path, separator)
    count = 0
    txn = db.begin()
    for i, (raw_pid, vec) in enumerate(rows):
        if vec.shape != (meta.dimension,):
            raise DimensionMismatch(
                f"record {i}: {vertex_type}.{attr} expects dimension "
                f"{meta.dimension}, got {vec.shape[0]}")
        pid = _coerce_pid(db, vertex_type, raw_pid, i)
        if create_missing and db.resolve(vertex_type, pid) is None:
            txn.insert_vertex(vertex_type, pid, {})
        txn.upsert_embedding(vertex_type, pid, attr, vec)
        count += 1
        if count % batch == 0:
            txn.commit()
            txn = db.begin()
    if txn.ops:
        txn.commit()
    return count


def load_vectors(db: Database, path, fmt: str, vertex_type: str, attr: str,
                 id_base: int = 0, batch: int = BATCH,
                 create_missing: bool = True, separator: str = ":") -> int:
    """A whole vector file; row i becomes vertex id_base + i."""
    if fmt == "csv":
        return load_embedding_csv(db, path, vertex_type, attr, separator,
                                  batch, create_missing=create_missing)
    if fmt == "fvecs":
        vectors = read_fvecs(path)
    elif fmt == "bvecs":
        vectors = read_bvecs(path)
    else:
        raise ValidationError(f"unknown vector format {fmt!r}")
    if vectors.shape[0] == 0:
        return 0
    meta = db.catalog.embedding_meta(vertex_type, attr)
    if vectors.shape[1] != meta.dimension:
        raise DimensionMismatch(
            f"{vertex_type}.{attr} expects dimension {meta.dimension}, "
            f"file has {vectors.shape[1]}")
    count = 0
    txn = db.begin()
    for i in range(vectors.shape[0]):
        pid = id_base + i
        if create_missing and db.resolve(vertex_type, pid) is None:
            txn.insert_vertex(vertex_type, pid, {})
        txn.upsert_embedding(vertex_type, pid, attr, vectors[i])
        count += 1
        if count % batch == 0:
            txn.commit()
            txn = db.begin()
    if txn.ops:
        txn.commit()
    return count


def dump_embeddings(db: Database, vertex_type: str, attr: str, path,
                    at_tid: int | None = None) -> int:
    """All live vectors to .fvecs in ascending primary id order."""
    meta = db.catalog.embedding_meta(vertex_type, attr)
    rows = []
    with db.pinned(at_tid) as tid:
        st = db.store(vertex_type)
        for pid, gid in sorted(st.id_map.items()):
            if not db.vertex_exists(vertex_type, gid, tid):
                continue
            vec = db.get_embedding(vertex_type, pid, attr, tid)
            if vec is not None:
                rows.append(vec)
    arr = (np.vstack(rows) if rows
           else np.zeros((0, meta.dimension), dtype=np.float32))
    write_fvecs(path, arr)
    return arr.shape[0]


def run_load_job(db: Database, job, data_dir) -> dict:
    """Execute a parsed loading job; sources resolve inside data_dir."""
    data_dir = Path(data_dir)
    loaded: dict[str, int] = {}
    for target in job.loads:
        path = data_dir / target.source
        if not path.exists() and path.suffix == "":
            for ext in (".csv", ".fvecs", ".bvecs"):
                cand = path.with_suffix(ext)
                if cand.exists():
                    path = cand
                    break
        if not path.exists():
            raise ValidationError(f"load source {target.source!r} not found "
                                  f"in {data_dir}")
        if target.attr is None:
            n = load_vertex_csv(db, path, target.vertex, list(target.columns))
            loaded[f"{target.vertex}@{target.source}"] = n
        else:
            if path.suffix == ".fvecs":
                n = load_vectors(db, path, "fvecs", target.vertex, target.attr)
            elif path.suffix == ".bvecs":
                n = load_vectors(db, path, "bvecs", target.vertex, target.attr)
            else:
                n = load_embedding_csv(db, path, target.vertex, target.attr,
                                       target.separator, create_missing=True)
            loaded[f"{target.vertex}.{target.attr}@{target.source}"] = n
    return {"loaded": loaded}
