"""Scatter-gather search: one node, many virtual partitions, real sockets."""

import socket
import threading

import numpy as np
import pytest

from graphvector import dist, query, vacuum
from graphvector.dist import wire
from graphvector.dist.cluster import LocalWorker, make_partitions, split_filter
from graphvector.dist.tcp import request_over_tcp
from graphvector.errors import (UnknownAttribute, ValidationError,
                                WorkerConnectionError, WorkerError,
                                WorkerTimeout)
from graphvector.predicates import Cmp
from graphvector.query import VertexSet
from graphvector.schema import Catalog, EmbeddingMeta
from graphvector.storage import Database

DIM = 16
N = 500
K = 10


@pytest.fixture(scope="module")
def ddb():
    cat = Catalog()
    cat.define_vertex_type("Item", "id", {"bucket": "INT"})
    cat.add_embedding_attribute(
        "Item", "emb", EmbeddingMeta(DIM, "m1", "HNSW", "FLOAT", "L2"))
    db = Database(catalog=cat, segment_capacity=64)
    rng = np.random.default_rng(11)
    with db.transact() as txn:
        for i in range(N):
            txn.insert_vertex("Item", i, {"bucket": i % 7})
            txn.upsert_embedding("Item", i, "emb", rng.normal(size=DIM))
    for seg in db.segments_of("Item"):
        vacuum.delta_merge(db, "Item", "emb", seg)
        vacuum.index_merge(db, "Item", "emb", seg)
    qv = rng.normal(size=DIM).astype(np.float32)
    yield db, qv
    db.close()


def single_node(db, qv, **kw):
    return query.search_ranked(db, [("Item", "emb")], qv, K, ef=96, **kw).ranked


def bucket_filter(db):
    pred = Cmp("bucket", "=", 3)
    with db.pinned() as tid:
        masks = db.segment_scan("Item", pred, tid)
    vs = VertexSet(db.segment_capacity,
                   {("Item", s): m for s, m in masks.items()})
    return pred, vs


def test_make_partitions_covers_all_segments(ddb):
    db, _ = ddb
    segments = {("Item", s) for s in db.segments_of("Item")}
    for n in (1, 2, 3, 4, 16):
        owned = make_partitions(db, n)
        assert len(owned) == n
        flat = [key for part in owned for key in part]
        assert len(flat) == len(set(flat))
        assert set(flat) == segments
        assert owned == make_partitions(db, n)  # deterministic


@pytest.mark.parametrize("parts", [1, 2, 4])
def test_virtual_cluster_equals_single_node(ddb, parts):
    db, qv = ddb
    vc = dist.VirtualCluster(db, parts)
    assert vc.search([("Item", "emb")], qv, K, ef=96) == single_node(db, qv)


@pytest.mark.parametrize("parts", [2, 4])
def test_filter_modes_equal_filtered_single_node(ddb, parts):
    db, qv = ddb
    pred, vs = bucket_filter(db)
    want = query.filtered_topk(db, "Item", pred, "emb", qv, K, ef=96)
    vc = dist.VirtualCluster(db, parts)
    assert vc.search([("Item", "emb")], qv, K, ef=96, filter=vs) == want
    assert vc.search([("Item", "emb")], qv, K, ef=96, predicate=pred) == want
    tid = db.committed_tid
    for (t, gid), _ in want:
        assert db.vertex_attrs(t, gid, tid)["bucket"] == 3


def test_stats_parity_with_single_node(ddb):
    db, qv = ddb
    st_single, st_cluster = {}, {}
    query.vector_search(db, [("Item", "emb")], qv, K, ef=96,
                        stats_out=st_single)
    dist.VirtualCluster(db, 4).search([("Item", "emb")], qv, K, ef=96,
                                      stats_out=st_cluster)
    for key in ("segments_touched", "index_segments", "bruteforce_segments"):
        assert st_single[key] == st_cluster[key]
    assert st_cluster["partitions"] == 4


def test_split_filter_routes_masks_to_owners(ddb):
    db, _ = ddb
    vc = dist.VirtualCluster(db, 3)
    _, vs = bucket_filter(db)
    per_pid = split_filter(vs, vc.partitions)
    assert set(per_pid) == {0, 1, 2}
    for p in vc.partitions:
        for key in per_pid[p.pid]:
            assert key in p.owned
    routed = {key for masks in per_pid.values() for key in masks}
    assert routed == set(vs.masks)
    assert split_filter(None, vc.partitions) == {0: {}, 1: {}, 2: {}}


def test_local_worker_answers_only_owned_segments(ddb):
    db, qv = ddb
    worker = LocalWorker(db, [("Item", 0)])
    req = wire.SearchRequest(query_id=1, at_tid=db.committed_tid, k=K, ef=96,
                             attrs=(("Item", "emb"),), qvec=qv)
    resp = worker.handle(req)
    assert {(t, seg) for t, seg, _ in resp.segments} == {("Item", 0)}
    assert all(gid < db.segment_capacity
               for _, _, items in resp.segments for gid, _ in items)


def test_worker_errors_become_error_replies(ddb):
    db, qv = ddb
    worker = LocalWorker(db, [("Item", 0)])
    bad = wire.SearchRequest(5, db.committed_tid, 3, 64,
                             (("Item", "missing_attr"),), qv)
    reply = wire.decode(worker.handle_bytes(wire.encode(bad)))
    assert isinstance(reply, wire.ErrorReply)
    assert reply.query_id == 5 and "missing_attr" in reply.message
    # a response frame is not a request
    resp_frame = wire.encode(wire.SearchResponse(query_id=1))
    reply = wire.decode(worker.handle_bytes(resp_frame))
    assert isinstance(reply, wire.ErrorReply)


def test_cluster_validation(ddb):
    db, qv = ddb
    vc = dist.VirtualCluster(db, 2)
    with pytest.raises(ValidationError):
        vc.search([("Item", "emb")], qv, 0)
    pred, vs = bucket_filter(db)
    with pytest.raises(ValidationError):
        vc.search([("Item", "emb")], qv, K, filter=vs, predicate=pred)


def test_search_at_old_tid(ddb):
    db, qv = ddb
    before = dist.VirtualCluster(db, 2).search([("Item", "emb")], qv, K, ef=96)
    t_old = db.committed_tid
    target = np.asarray(qv, np.float32)
    with db.transact() as txn:
        txn.insert_vertex("Item", 9000, {"bucket": 0})
        txn.upsert_embedding("Item", 9000, "emb", target)
    vc = dist.VirtualCluster(db, 2)
    assert vc.search([("Item", "emb")], qv, K, ef=96, at_tid=t_old) == before
    now = vc.search([("Item", "emb")], qv, K, ef=96)
    assert now[0][1] == pytest.approx(0.0, abs=1e-6)
    assert now != before


def test_cosine_cluster_normalizes_query():
    cat = Catalog()
    cat.define_vertex_type("D", "id", {"id": "INT"})
    cat.add_embedding_attribute(
        "D", "e", EmbeddingMeta(8, "m", "HNSW", "FLOAT", "COSINE"))
    db = Database(catalog=cat, segment_capacity=16)
    rng = np.random.default_rng(2)
    with db.transact() as txn:
        for i in range(30):
            txn.insert_vertex("D", i, {})
            txn.upsert_embedding("D", i, "e", rng.normal(size=8))
    vc = dist.VirtualCluster(db, 2)
    q = rng.normal(size=8).astype(np.float32)
    assert vc.search([("D", "e")], q, 5) == vc.search([("D", "e")], q * 4.0, 5)


# --- real sockets --------------------------------------------------------------


def test_tcp_cluster_equals_single_node(ddb):
    db, qv = ddb
    tcp, servers = dist.start_local_cluster(db, 2, timeout=10.0)
    try:
        assert tcp.search([("Item", "emb")], qv, K, ef=96) == single_node(db, qv)
        pred, vs = bucket_filter(db)
        want = query.filtered_topk(db, "Item", pred, "emb", qv, K, ef=96)
        assert tcp.search([("Item", "emb")], qv, K, ef=96, filter=vs) == want
    finally:
        for s in servers:
            s.stop()


def test_tcp_and_virtual_replies_are_bit_identical(ddb):
    db, qv = ddb
    tcp, servers = dist.start_local_cluster(db, 2, timeout=10.0)
    try:
        vc = dist.VirtualCluster(db, 2)
        with db.pinned() as tid:
            for p_v, p_t in zip(vc.partitions, tcp.partitions):
                assert p_v.owned == p_t.owned
                frame = wire.encode(wire.SearchRequest(
                    query_id=1, at_tid=tid, k=K, ef=96,
                    attrs=(("Item", "emb"),), qvec=qv))
                local = p_v.endpoint.handle_bytes(frame)
                remote = request_over_tcp(p_t.endpoint, frame)
                assert local == remote
    finally:
        for s in servers:
            s.stop()


def test_tcp_worker_error_propagates(ddb):
    db, qv = ddb
    tcp, servers = dist.start_local_cluster(db, 2, timeout=10.0)
    try:
        # a bad attr fails on the coordinator, before any frame is sent
        with pytest.raises(UnknownAttribute):
            tcp.search([("Item", "nope")], qv, K)
        # a predicate is evaluated on the worker: its failure must come
        # back as a WorkerError naming the partition
        with pytest.raises(WorkerError, match="partition"):
            tcp.search([("Item", "emb")], qv, K,
                       predicate=Cmp("no_such_attr", "=", 1))
    finally:
        for s in servers:
            s.stop()


def test_silent_worker_times_out(ddb):
    db, qv = ddb
    silent = socket.socket()
    silent.bind(("127.0.0.1", 0))
    silent.listen(1)
    addr = f"127.0.0.1:{silent.getsockname()[1]}"
    held = []

    def absorb():
        try:
            conn, _ = silent.accept()
            held.append(conn)  # stay silent, keep the socket open
        except OSError:
            pass

    t = threading.Thread(target=absorb, daemon=True)
    t.start()
    try:
        cluster = dist.TCPCluster(db, [addr], timeout=0.5)
        with pytest.raises(WorkerTimeout):
            cluster.search([("Item", "emb")], qv, K)
    finally:
        silent.close()
        for c in held:
            c.close()
        t.join(timeout=2.0)


def test_refused_connection_raises(ddb):
    db, qv = ddb
    cluster = dist.TCPCluster(db, ["127.0.0.1:1"], timeout=0.5)
    with pytest.raises((WorkerConnectionError, WorkerTimeout)):
        cluster.search([("Item", "emb")], qv, K)