"""Delta record encoding: fixed-size rows, fold semantics."""

import numpy as np
import pytest

from graphvector.errors import DecodeError
from graphvector.records import (Action, DeltaRecord, decode_records,
                                 encode_records, fold_records, record_size)


def test_record_validation():
    with pytest.raises(ValueError):
        DeltaRecord(Action.UPSERT, 1, tid=0, value=np.zeros(2))
    with pytest.raises(ValueError):
        DeltaRecord(Action.UPSERT, 1, tid=3, value=None)
    rec = DeltaRecord(Action.DELETE, 1, tid=3)
    assert rec.value is None


def test_value_coerced_to_float32():
    rec = DeltaRecord(Action.UPSERT, 0, tid=1, value=[1, 2, 3])
    assert rec.value.dtype == np.float32


def test_encode_decode_round_trip(rng):
    dim = 5
    records = []
    for i in range(20):
        if i % 4 == 0:
            records.append(DeltaRecord(Action.DELETE, i, tid=i + 1))
        else:
            records.append(DeltaRecord(Action.UPSERT, i, tid=i + 1,
                                       value=rng.standard_normal(dim)))
    buf = encode_records(records, dim)
    assert len(buf) == len(records) * record_size(dim)
    back = decode_records(buf, dim)
    assert back == records


def test_decode_rejects_ragged_buffer():
    buf = encode_records([DeltaRecord(Action.DELETE, 1, tid=1)], 3)
    with pytest.raises(DecodeError):
        decode_records(buf[:-1], 3)


def test_decode_rejects_bad_action_code():
    buf = bytearray(encode_records([DeltaRecord(Action.DELETE, 1, tid=1)], 2))
    buf[0] = 9
    with pytest.raises(DecodeError):
        decode_records(bytes(buf), 2)


def test_encode_checks_vector_shape():
    rec = DeltaRecord(Action.UPSERT, 1, tid=1, value=np.zeros(4, np.float32))
    with pytest.raises(ValueError):
        encode_records([rec], 3)


def test_fold_keeps_newest_per_id():
    recs = [
        DeltaRecord(Action.UPSERT, 1, tid=1, value=[1.0]),
        DeltaRecord(Action.UPSERT, 2, tid=2, value=[2.0]),
        DeltaRecord(Action.DELETE, 1, tid=3),
        DeltaRecord(Action.UPSERT, 2, tid=4, value=[5.0]),
    ]
    state = fold_records(recs)
    assert state[1].action is Action.DELETE
    assert state[2].value.tolist() == [5.0]


def test_fold_matches_replay_oracle(rng):
    import oracle

    model = oracle.ReplayModel()
    recs = []
    for tid in range(1, 60):
        vid = int(rng.integers(0, 8))
        if rng.random() < 0.25:
            recs.append(DeltaRecord(Action.DELETE, vid, tid=tid))
            model.delete(tid, vid)
        else:
            vec = rng.standard_normal(3)
            recs.append(DeltaRecord(Action.UPSERT, vid, tid=tid, value=vec))
            model.upsert(tid, vid, vec)
    state = fold_records(recs)
    expect = model.state_at(59)
    live = {vid: rec.value for vid, rec in state.items()
            if rec.action is Action.UPSERT}
    assert set(live) == set(expect)
    for vid in live:
        assert np.array_equal(live[vid], expect[vid])
