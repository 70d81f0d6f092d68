"""Vector change records shared by the storage, vacuum, and index layers.

A DeltaRecord is the unit of vector mutation: an upsert or delete of one
vertex's embedding, stamped with the committing transaction id. On disk the
records are fixed-size (`u8 action, u64 id, u64 tid, f32[d]`, little-endian;
deletes carry d zero floats) so delta files stay seekable.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DecodeError

__all__ = ["Action", "DeltaRecord", "record_size", "encode_records", "decode_records",
           "fold_records"]


class Action(enum.IntEnum):
    UPSERT = 1
    DELETE = 2


@dataclass
class DeltaRecord:
    action: Action
    id: int
    tid: int
    value: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.tid <= 0:
            raise ValueError(f"tid must be strictly positive, got {self.tid}")
        if self.action is Action.UPSERT and self.value is None:
            raise ValueError("UPSERT record needs a vector value")
        if self.value is not None:
            self.value = np.asarray(self.value, dtype=np.float32)

    def __eq__(self, other):
        if not isinstance(other, DeltaRecord):
            return NotImplemented
        if (self.action, self.id, self.tid) != (other.action, other.id, other.tid):
            return False
        if self.value is None or other.value is None:
            return self.value is other.value
        return np.array_equal(self.value, other.value)


_HEAD = struct.Struct("<BQQ")  # action, id, tid


def record_size(dim: int) -> int:
    return _HEAD.size + 4 * dim


def encode_records(records: list[DeltaRecord], dim: int) -> bytes:
    out = bytearray()
    zeros = b"\x00" * (4 * dim)
    for rec in records:
        out += _HEAD.pack(int(rec.action), rec.id, rec.tid)
        if rec.action is Action.UPSERT:
            vec = np.ascontiguousarray(rec.value, dtype=np.float32)
            if vec.shape != (dim,):
                raise ValueError(f"record vector has shape {vec.shape}, want ({dim},)")
            out += vec.tobytes()
        else:
            out += zeros
    return bytes(out)


def decode_records(buf: bytes, dim: int) -> list[DeltaRecord]:
    size = record_size(dim)
    if len(buf) % size != 0:
        raise DecodeError(f"delta payload length {len(buf)} not a multiple of {size}")
    records = []
    for off in range(0, len(buf), size):
        action_raw, rid, tid = _HEAD.unpack_from(buf, off)
        try:
            action = Action(action_raw)
        except ValueError:
            raise DecodeError(f"bad action code {action_raw} at offset {off}") from None
        if action is Action.UPSERT:
            vec = np.frombuffer(buf, dtype="<f4", count=dim,
                                offset=off + _HEAD.size).copy()
        else:
            vec = None
        records.append(DeltaRecord(action, rid, tid, vec))
    return records


def fold_records(records: list[DeltaRecord]) -> dict[int, DeltaRecord]:
    """Last-writer-wins fold: id -> newest record, ties by list order."""
    state: dict[int, DeltaRecord] = {}
    for rec in sorted(records, key=lambda r: r.tid):
        state[rec.id] = rec
    return state
