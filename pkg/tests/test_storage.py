"""Transactions, MVCC visibility, segment reads, and persistence."""

import numpy as np
import pytest

import oracle
from graphvector.errors import ConflictError, ValidationError
from graphvector.metrics import Metric
from graphvector.predicates import Cmp
from graphvector.schema import Catalog, EmbeddingMeta
from graphvector.storage import Database
from graphvector.vacuum import delta_merge, index_merge


def make_db(root=None, dim=4, segment_capacity=8):
    cat = Catalog()
    cat.define_vertex_type("Doc", "id", {"id": "INT", "score": "INT",
                                         "title": "STRING"})
    cat.define_vertex_type("Tag", "name", {"name": "STRING"})
    cat.define_edge_type("tagged", "Doc", "Tag", {})
    cat.define_edge_type("cites", "Doc", "Doc", {})
    cat.add_embedding_attribute(
        "Doc", "emb", meta=EmbeddingMeta(dimension=dim, model="m"))
    return Database(root=root, catalog=cat, segment_capacity=segment_capacity)


def test_insert_and_read_back():
    db = make_db()
    with db.transact() as txn:
        txn.insert_vertex("Doc", 1, {"score": 7, "title": "one"})
        txn.upsert_embedding("Doc", 1, "emb", [1.0, 2.0, 3.0, 4.0])
    gid = db.resolve("Doc", 1)
    assert gid is not None
    assert db.pid_of("Doc", gid) == 1
    attrs = db.vertex_attrs("Doc", gid, db.committed_tid)
    assert attrs["score"] == 7 and attrs["title"] == "one"
    assert db.get_embedding("Doc", 1, "emb").tolist() == [1.0, 2.0, 3.0, 4.0]


def test_commit_is_atomic_and_returns_tid():
    db = make_db()
    txn = db.begin()
    txn.insert_vertex("Doc", 1, {"score": 1})
    txn.upsert_embedding("Doc", 1, "emb", np.ones(4, np.float32))
    assert db.resolve("Doc", 1) is None  # nothing visible pre-commit
    tid = txn.commit()
    assert tid == db.committed_tid
    assert db.resolve("Doc", 1) is not None
    with pytest.raises(ValidationError):
        txn.commit()


def test_transact_discards_on_error():
    db = make_db()
    with pytest.raises(RuntimeError):
        with db.transact() as txn:
            txn.insert_vertex("Doc", 1, {})
            raise RuntimeError("boom")
    assert db.resolve("Doc", 1) is None


def test_visibility_pinned_at_old_tid():
    db = make_db()
    with db.transact() as txn:
        txn.insert_vertex("Doc", 1, {"score": 1})
    t1 = db.committed_tid
    with db.transact() as txn:
        txn.insert_vertex("Doc", 2, {"score": 2})
    with db.pinned(t1) as tid:
        assert db.vertex_exists("Doc", db.resolve("Doc", 1), tid)
        gid2 = db.resolve("Doc", 2)
        assert not db.vertex_exists("Doc", gid2, tid)


def test_embedding_versions_match_replay(rng):
    db = make_db()
    model = oracle.ReplayModel()
    with db.transact() as txn:
        txn.insert_vertex("Doc", 0, {})
    for _ in range(40):
        with db.transact() as txn:
            if rng.random() < 0.3:
                txn.delete_embedding("Doc", 0, "emb")
                model.delete(db.committed_tid + 1, 0)
            else:
                vec = rng.standard_normal(4).astype(np.float32)
                txn.upsert_embedding("Doc", 0, "emb", vec)
                model.upsert(db.committed_tid + 1, 0, vec)
    for tid in range(1, db.committed_tid + 1):
        got = db.get_embedding("Doc", 0, "emb", at_tid=tid)
        want = model.get_at(tid, 0)
        if want is None:
            assert got is None
        else:
            assert np.array_equal(got, want)


def test_delete_vertex_hides_everything():
    db = make_db()
    with db.transact() as txn:
        txn.insert_vertex("Doc", 1, {"score": 1})
        txn.insert_vertex("Doc", 2, {"score": 2})
        txn.upsert_embedding("Doc", 1, "emb", np.ones(4, np.float32))
        txn.add_edge("cites", 1, 2)
    before = db.committed_tid
    gid = db.resolve("Doc", 1)
    with db.transact() as txn:
        txn.delete_vertex("Doc", 1)
    now = db.committed_tid
    assert not db.vertex_exists("Doc", gid, now)
    assert db.get_embedding("Doc", 1, "emb", at_tid=now) is None
    assert db.vertex_attrs("Doc", gid, now) is None
    # the older version is still pinned-readable
    assert db.vertex_exists("Doc", gid, before)
    assert db.get_embedding("Doc", 1, "emb", at_tid=before) is not None


def test_embedding_needs_existing_vertex():
    db = make_db()
    txn = db.begin()
    txn.upsert_embedding("Doc", 9, "emb", np.ones(4, np.float32))
    with pytest.raises(ValidationError):
        txn.commit()
    # created in the same transaction is fine
    with db.transact() as txn:
        txn.insert_vertex("Doc", 9, {})
        txn.upsert_embedding("Doc", 9, "emb", np.ones(4, np.float32))
    assert db.get_embedding("Doc", 9, "emb") is not None


def test_first_committer_wins_on_vertex():
    db = make_db()
    with db.transact() as txn:
        txn.insert_vertex("Doc", 1, {"score": 0})
    a = db.begin()
    b = db.begin()
    a.upsert_embedding("Doc", 1, "emb", np.ones(4, np.float32))
    b.insert_vertex("Doc", 1, {"score": 5})
    a.commit()
    with pytest.raises(ConflictError):
        b.commit()


def test_disjoint_vertices_do_not_conflict():
    db = make_db()
    a = db.begin()
    b = db.begin()
    a.insert_vertex("Doc", 1, {})
    b.insert_vertex("Doc", 2, {})
    a.commit()
    b.commit()
    assert db.resolve("Doc", 1) is not None
    assert db.resolve("Doc", 2) is not None


def test_wrong_dimension_rejected_eagerly():
    db = make_db()
    txn = db.begin()
    with pytest.raises(ValidationError):
        txn.upsert_embedding("Doc", 1, "emb", np.ones(5, np.float32))
    with pytest.raises(ValidationError):
        txn.upsert_embedding("Doc", 1, "emb",
                             np.array([1.0, np.nan, 0.0, 0.0], np.float32))


def test_edges_at_tids_and_type_filter():
    db = make_db()
    with db.transact() as txn:
        txn.insert_vertex("Doc", 1, {})
        txn.insert_vertex("Doc", 2, {})
        txn.insert_vertex("Tag", "a", {})
        txn.add_edge("cites", 1, 2)
    t1 = db.committed_tid
    with db.transact() as txn:
        txn.add_edge("tagged", 1, "a")
    t2 = db.committed_tid
    g1 = db.resolve("Doc", 1)
    assert db.out_neighbors("Doc", g1, None, t1) == [("Doc", db.resolve("Doc", 2))]
    both = db.out_neighbors("Doc", g1, None, t2)
    assert ("Tag", db.resolve("Tag", "a")) in both and len(both) == 2
    assert db.out_neighbors("Doc", g1, "tagged", t2) == \
        [("Tag", db.resolve("Tag", "a"))]
    ga = db.resolve("Tag", "a")
    assert db.in_neighbors("Tag", ga, "tagged", t2) == [("Doc", g1)]
    assert db.in_neighbors("Tag", ga, "tagged", t1) == []


def test_segment_scan_matches_predicate(rng):
    db = make_db(segment_capacity=8)
    rows = {}
    with db.transact() as txn:
        for i in range(30):
            score = int(rng.integers(0, 10))
            txn.insert_vertex("Doc", i, {"score": score})
            rows[i] = score
    pred = Cmp("score", ">=", 5)
    masks = db.segment_scan("Doc", pred, db.committed_tid)
    seen = {}
    for seg, mask in masks.items():
        for off, ok in enumerate(mask):
            gid = seg * db.segment_capacity + off
            pid = db.pid_of("Doc", gid)
            if pid is not None:
                seen[pid] = bool(ok)
    assert seen == {i: rows[i] >= 5 for i in range(30)}


def test_multiple_segments_round_robin():
    db = make_db(segment_capacity=8)
    with db.transact() as txn:
        for i in range(30):
            txn.insert_vertex("Doc", i, {})
    assert db.segments_of("Doc") == [0, 1, 2, 3]
    layout = db.partition_segments(2)
    owners = [layout[("Doc", s)] for s in range(4)]
    assert owners == [0, 1, 0, 1]
    assert db.seg_of(17) == (2, 1)


def test_segment_topk_routes(rng):
    db = make_db(dim=4, segment_capacity=64)
    with db.transact() as txn:
        for i in range(50):
            txn.insert_vertex("Doc", i, {"score": i % 5})
            txn.upsert_embedding("Doc", i, "emb",
                                 rng.standard_normal(4).astype(np.float32))
    tid = db.committed_tid
    q = rng.standard_normal(4).astype(np.float32)

    # nothing merged yet: no snapshot, results come from the delta path
    res, info = db.segment_topk("Doc", "emb", 0, q, 5, 64, None, tid)
    assert info["route"] == "empty" and info["touched"]
    assert len(res) == 5

    delta_merge(db, "Doc", "emb", 0)
    index_merge(db, "Doc", "emb", 0)
    res_idx, info = db.segment_topk("Doc", "emb", 0, q, 5, 64, None, tid)
    assert info["route"] == "index"
    assert res_idx == res  # same data, either path

    # a filter keeping 2 of 50 falls below max(4k, 1%) -> full scan route
    mask = np.zeros(64, dtype=bool)
    mask[3] = mask[7] = True
    res_bf, info = db.segment_topk("Doc", "emb", 0, q, 2, 64, mask, tid)
    assert info["route"] == "bruteforce"
    assert sorted(o for o, _ in res_bf) == [3, 7]

    # all-false filter touches nothing
    res_none, info = db.segment_topk("Doc", "emb", 0, q, 2, 64,
                                     np.zeros(64, bool), tid)
    assert info["route"] == "none" and res_none == []


def test_segment_topk_merges_snapshot_and_fresh(rng):
    db = make_db(dim=4, segment_capacity=64)
    vecs = {}
    with db.transact() as txn:
        for i in range(20):
            v = rng.standard_normal(4).astype(np.float32)
            txn.insert_vertex("Doc", i, {})
            txn.upsert_embedding("Doc", i, "emb", v)
            vecs[i] = v
    delta_merge(db, "Doc", "emb", 0)
    index_merge(db, "Doc", "emb", 0)
    with db.transact() as txn:
        for i in range(20, 28):
            v = rng.standard_normal(4).astype(np.float32)
            txn.insert_vertex("Doc", i, {})
            txn.upsert_embedding("Doc", i, "emb", v)
            vecs[i] = v
        v = np.full(4, 9.0, np.float32)
        txn.upsert_embedding("Doc", 3, "emb", v)  # overwrite an indexed row
        vecs[3] = v
    tid = db.committed_tid
    q = rng.standard_normal(4).astype(np.float32)
    res, _ = db.segment_topk("Doc", "emb", 0, q, 10, 64, None, tid)
    want = oracle.topk(sorted(vecs.items()), q, 10)
    assert [o for o, _ in res] == [o for o, _ in want]
    assert [d for _, d in res] == pytest.approx([d for _, d in want],
                                                rel=1e-5, abs=1e-5)


def test_flush_and_reopen_round_trip(tmp_path, rng):
    root = tmp_path / "db"
    db = make_db(root=root, segment_capacity=8)
    vecs = {}
    with db.transact() as txn:
        for i in range(20):
            v = rng.standard_normal(4).astype(np.float32)
            txn.insert_vertex("Doc", i, {"score": i % 3, "title": f"d{i}"})
            txn.upsert_embedding("Doc", i, "emb", v)
            vecs[i] = v
        txn.insert_vertex("Tag", "x", {})
        txn.add_edge("tagged", 4, "x")
    with db.transact() as txn:
        txn.delete_vertex("Doc", 7)
    del vecs[7]
    db.flush()
    db.close()

    back = Database.open(root)
    assert back.committed_tid == 2
    assert back.resolve("Doc", 7) is None or \
        not back.vertex_exists("Doc", back.resolve("Doc", 7), back.committed_tid)
    assert back.vertex_attrs("Doc", back.resolve("Doc", 4),
                             back.committed_tid)["title"] == "d4"
    for i, v in vecs.items():
        assert np.array_equal(back.get_embedding("Doc", i, "emb"), v)
    g4 = back.resolve("Doc", 4)
    assert back.out_neighbors("Doc", g4, "tagged", back.committed_tid) == \
        [("Tag", back.resolve("Tag", "x"))]
    q = rng.standard_normal(4).astype(np.float32)
    res, _ = back.segment_topk("Doc", "emb", 0, q, 5, 64, None,
                               back.committed_tid)
    want = oracle.topk([(o, v) for o, v in sorted(vecs.items()) if o < 8],
                       q, 5)
    assert [o for o, _ in res] == [o for o, _ in want]
    back.close()


def test_wal_replays_unflushed_commits(tmp_path, rng):
    root = tmp_path / "db"
    db = make_db(root=root)
    with db.transact() as txn:
        txn.insert_vertex("Doc", 1, {"score": 1})
    db.flush()  # checkpoint at tid 1
    with db.transact() as txn:  # after the checkpoint, only in the log
        txn.insert_vertex("Doc", 2, {"score": 2})
        txn.upsert_embedding("Doc", 2, "emb", np.ones(4, np.float32))
    db.close()

    back = Database.open(root)
    assert back.committed_tid == 2
    assert back.resolve("Doc", 2) is not None
    assert np.array_equal(back.get_embedding("Doc", 2, "emb"),
                          np.ones(4, np.float32))
    back.close()


def test_live_mask_tracks_inserts_and_deletes():
    db = make_db(segment_capacity=8)
    with db.transact() as txn:
        for i in range(5):
            txn.insert_vertex("Doc", i, {})
    t1 = db.committed_tid
    with db.transact() as txn:
        txn.delete_vertex("Doc", 2)
    t2 = db.committed_tid
    m1 = db.live_mask("Doc", 0, t1)
    m2 = db.live_mask("Doc", 0, t2)
    assert m1[:5].all()
    assert not m2[2] and m2[[0, 1, 3, 4]].all()
