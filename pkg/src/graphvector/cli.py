"""Command-line front door for the engine.

Subcommands:
  gv schema apply FILE --data DIR     run DDL (and loading jobs) from a script
  gv load --data DIR ...              ingest CSV / fvecs / bvecs into a store
  gv dump --data DIR ...              write one embedding attribute to .fvecs
  gv query --data DIR -f FILE         run a query script, print JSON results
  gv explain --data DIR -f FILE       print the plan for each SELECT
  gv synth --out DIR ...              generate a seeded corpus + ground truth
  gv bench --suite NAME --out DIR     recall / update / hybrid benchmarks
  gv vacuum status --data DIR         per-stream maintenance counters
  gv serve --data DIR --listen H:P    host one partition over TCP

Benchmarks write CSV and JSON rows plus a rendered PNG figure into --out.
"""

from __future__ import annotations

import argparse
import json
import sys
import threading
import time
from pathlib import Path

import numpy as np

from . import loader, report, vacuum
from .datasets import SynthSpec, ground_truth, synth_corpus, write_fvecs
from .errors import GraphVectorError
from .index import HnswIndex, IndexParams
from .metrics import Metric
from .predicates import Cmp
from .query import (DistanceMap, PathEdge, PathVertex, pattern_match,
                    search_ranked, vector_search)
from .records import Action, DeltaRecord
from .report import BenchReport
from .schema import Catalog, EmbeddingMeta
from .storage import Database


def _open(args) -> Database:
    root = Path(args.data)
    if (root / "catalog.json").exists():
        return Database.open(root)
    return Database(root=root)


def _read_text(path) -> str:
    return Path(path).read_text(encoding="utf-8")


def _print_json(obj) -> None:
    print(json.dumps(obj, indent=2, default=str))


# --- schema / query / explain -------------------------------------------------


def cmd_schema_apply(args) -> int:
    from .gvql import execute

    db = _open(args)
    try:
        results = execute(db, _read_text(args.file),
                          data_dir=args.src or args.data)
        db.flush()
    finally:
        db.close()
    _print_json(results)
    return 0


def cmd_query(args) -> int:
    from .gvql import execute

    params = json.loads(_read_text(args.params)) if args.params else None
    db = _open(args)
    try:
        results = execute(db, _read_text(args.file), params=params,
                          data_dir=args.data)
    finally:
        db.close()
    _print_json(results)
    return 0


def cmd_explain(args) -> int:
    from .gvql import ast, parse, plan

    db = _open(args)
    try:
        for stmt in parse(_read_text(args.file)):
            if isinstance(stmt, ast.Explain):
                stmt = stmt.query
            if not isinstance(stmt, ast.SelectBlock):
                raise GraphVectorError(
                    f"only SELECT statements have plans, got {type(stmt).__name__}")
            sys.stdout.write(plan(stmt, db.catalog).render())
    finally:
        db.close()
    return 0


# --- load / dump ----------------------------------------------------------------


def cmd_load(args) -> int:
    db = _open(args)
    try:
        if args.job:
            from .gvql import ast, parse

            stmts = [s for s in parse(_read_text(args.job))
                     if isinstance(s, ast.LoadJob)]
            if not stmts:
                raise GraphVectorError(f"{args.job}: no loading job found")
            out = {}
            for job in stmts:
                out.update(loader.run_load_job(db, job,
                                               args.src or args.data)["loaded"])
            result = {"loaded": out}
        elif args.csv:
            if not (args.vertex and args.columns):
                raise GraphVectorError("--csv needs --vertex and --columns")
            n = loader.load_vertex_csv(db, args.csv, args.vertex,
                                       args.columns.split(","))
            result = {"loaded": n}
        elif args.vectors:
            if not (args.vertex and args.attr):
                raise GraphVectorError("--vectors needs --vertex and --attr")
            n = loader.load_vectors(db, args.vectors, args.format, args.vertex,
                                    args.attr, id_base=args.id_base,
                                    separator=args.separator,
                                    create_missing=not args.no_create)
            result = {"loaded": n}
        else:
            raise GraphVectorError("give one of --job, --csv, or --vectors")
        db.flush()
    finally:
        db.close()
    _print_json(result)
    return 0


def cmd_dump(args) -> int:
    db = _open(args)
    try:
        n = loader.dump_embeddings(db, args.vertex, args.attr, args.out)
    finally:
        db.close()
    _print_json({"dumped": n, "path": str(args.out)})
    return 0


# --- synth corpus + ground truth ---------------------------------------------


def cmd_synth(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    spec = SynthSpec(n=args.n, dim=args.dim, n_queries=args.queries,
                     seed=args.seed)
    base, queries = synth_corpus(spec)
    write_fvecs(out / "base.fvecs", base)
    write_fvecs(out / "query.fvecs", queries)
    result = {"base": base.shape[0], "queries": queries.shape[0],
              "dim": args.dim, "dir": str(out)}
    if args.truth_k:
        ids, dists = ground_truth(base, queries, args.truth_k)
        rows = [[qi, rank, int(ids[qi, rank]), float(dists[qi, rank])]
                for qi in range(ids.shape[0]) for rank in range(ids.shape[1])]
        report.write_rows_csv(out / "truth.csv",
                              ["query", "rank", "id", "distance"], rows)
        (out / "truth.json").write_text(json.dumps(
            {"k": args.truth_k, "ids": ids.tolist(), "distances": dists.tolist()}))
        result["truth_k"] = args.truth_k
    _print_json(result)
    return 0


# --- bench: shared helpers ----------------------------------------------------


def _batched_ingest(db: Database, type_name: str, attr: str,
                    vectors: np.ndarray, batch: int = 512) -> float:
    """Insert row i as vertex i with its vector; returns elapsed seconds."""
    t0 = time.perf_counter()
    n = vectors.shape[0]
    for lo in range(0, n, batch):
        with db.transact() as txn:
            for i in range(lo, min(lo + batch, n)):
                txn.insert_vertex(type_name, i, {"bucket": int(i % 10)})
                txn.upsert_embedding(type_name, i, attr, vectors[i])
    return time.perf_counter() - t0


def _build_indexes(db: Database, type_name: str, attr: str,
                   threads: int = 1) -> float:
    """Drain deltas and fold snapshots on every segment; returns seconds."""
    t0 = time.perf_counter()
    for seg in db.segments_of(type_name):
        vacuum.delta_merge(db, type_name, attr, seg)
        vacuum.index_merge(db, type_name, attr, seg, num_threads=threads)
    return time.perf_counter() - t0


def _closed_loop(search_one, nq: int, threads: int):
    """Run nq searches over a sender-thread pool.

    search_one(qi) -> (ids, stats). Returns (ids per query, latency ms per
    query, vector-search ms per query, wall seconds).
    """
    results: list = [None] * nq
    lat_ms = [0.0] * nq
    vec_ms = [0.0] * nq
    pending = iter(range(nq))
    grab = threading.Lock()

    def run():
        while True:
            with grab:
                qi = next(pending, None)
            if qi is None:
                return
            t0 = time.perf_counter()
            ids, stats = search_one(qi)
            lat_ms[qi] = (time.perf_counter() - t0) * 1e3
            results[qi] = ids
            vec_ms[qi] = stats.get("vector_search_ms", 0.0)

    t0 = time.perf_counter()
    pool = [threading.Thread(target=run) for _ in range(max(1, threads))]
    for t in pool:
        t.start()
    for t in pool:
        t.join()
    wall = time.perf_counter() - t0
    return results, lat_ms, vec_ms, wall


def _item_db(dim: int, segment_capacity: int = 1024) -> Database:
    cat = Catalog()
    cat.define_vertex_type("Item", "id", {"id": "INT", "bucket": "INT"})
    cat.add_embedding_attribute(
        "Item", "emb",
        meta=EmbeddingMeta(dimension=dim, model="synth", metric=Metric.L2))
    return Database(catalog=cat, segment_capacity=segment_capacity)


# --- bench: recall / QPS -------------------------------------------------------


def run_recall_bench(out_dir, n: int = 10000, dim: int = 128,
                     queries: int = 100, k: int = 10,
                     efs=(16, 32, 64, 128, 256, 512), threads: int = 16,
                     seed: int = 42, partitions: int = 1,
                     join: list[str] | None = None, data=None, corpus=None,
                     vertex: str = "Item", attr: str = "emb") -> list[BenchReport]:
    """Recall/QPS/latency sweep over ef.

    Default mode builds a seeded corpus in memory; ground truth comes from
    the exact linear-scan oracle. partitions > 1 routes every query through
    an in-process cluster. join routes through already-listening TCP
    workers instead: those must serve the database at `data`, and `corpus`
    must hold the base.fvecs / query.fvecs it was loaded from.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cluster = None
    if join:
        from .datasets import read_fvecs
        from .dist import TCPCluster

        if not (data and corpus):
            raise GraphVectorError("--join needs --data and --corpus")
        base = read_fvecs(Path(corpus) / "base.fvecs")
        qs = read_fvecs(Path(corpus) / "query.fvecs")[:queries]
        n, dim = base.shape
        queries = qs.shape[0]
        db = Database.open(data)
        load_s = build_s = 0.0
        cluster = TCPCluster(db, join)
        partitions = len(join)
    else:
        base, qs = synth_corpus(SynthSpec(n=n, dim=dim, n_queries=queries,
                                          seed=seed))
        db = _item_db(dim)
        load_s = _batched_ingest(db, vertex, attr, base)
        build_s = _build_indexes(db, vertex, attr, threads=min(threads, 4))
        if partitions > 1:
            from .dist import VirtualCluster
            cluster = VirtualCluster(db, partitions)
    truth_ids, _ = ground_truth(base, qs, k)

    def make_search(ef):
        if cluster is not None:
            def go(qi):
                stats: dict = {}
                ranked = cluster.search([(vertex, attr)], qs[qi], k, ef=ef,
                                        stats_out=stats)
                return [db.pid_of(t, g) for (t, g), _ in ranked], stats
        else:
            def go(qi):
                stats: dict = {}
                dm = DistanceMap()
                vector_search(db, [(vertex, attr)], qs[qi], k, ef=ef,
                              distance_map_out=dm, stats_out=stats)
                return [db.pid_of(t, g) for (t, g), _ in dm.ranked()], stats
        return go

    reports = []
    for ef in efs:
        ids, lat_ms, vec_ms, wall = _closed_loop(make_search(ef), queries,
                                                 threads)
        lats = report.latency_summary(lat_ms)
        reports.append(BenchReport(
            suite="recall", k=k, ef=ef, queries=queries,
            recall=report.mean_recall(ids, truth_ids.tolist(), k),
            qps=queries / wall if wall > 0 else 0.0,
            mean_ms=lats["mean_ms"], p50_ms=lats["p50_ms"],
            p99_ms=lats["p99_ms"], build_seconds=build_s,
            load_seconds=load_s,
            vector_search_ms=float(np.mean(vec_ms)),
            extra={"n": int(n), "dim": int(dim), "threads": threads,
                   "partitions": partitions if cluster else 1}))

    report.write_reports_csv(reports, out / "recall.csv")
    report.write_reports_json(reports, out / "recall.json")
    report.recall_qps_figure(reports, out / "recall_qps.png")
    db.close()
    return reports


# --- bench: update crossover ---------------------------------------------------


def run_update_bench(out_dir, n: int = 5000, dim: int = 64,
                     fractions=(0.0, 0.05, 0.1, 0.2, 0.4, 0.7, 1.0),
                     threads: int = 4, seed: int = 42) -> list[dict]:
    """Incremental-update seconds vs full-rebuild seconds per update fraction.

    Measures the index layer directly: apply m upserts to a copy of a built
    graph, against building a fresh graph over the final vectors. Emits the
    curve only; where the lines cross depends on the machine.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    base = rng.standard_normal((n, dim)).astype(np.float32)
    fresh = rng.standard_normal((n, dim)).astype(np.float32)

    def build(vectors: np.ndarray) -> HnswIndex:
        idx = HnswIndex(dim, Metric.L2, IndexParams(), seed=seed,
                        capacity=vectors.shape[0])
        idx.update_items([DeltaRecord(Action.UPSERT, i, tid=i + 1, value=v)
                          for i, v in enumerate(vectors)],
                         num_threads=threads)
        return idx

    built = build(base)
    snapshot = out / "_update_base.hnsw"
    built.save(snapshot)

    points = []
    for frac in fractions:
        m = round(frac * n)
        idx = HnswIndex.load(snapshot)
        deltas = [DeltaRecord(Action.UPSERT, i, tid=n + 1 + i, value=fresh[i])
                  for i in range(m)]
        t0 = time.perf_counter()
        idx.update_items(deltas, num_threads=threads)
        incremental = time.perf_counter() - t0

        final = base.copy()
        final[:m] = fresh[:m]
        t0 = time.perf_counter()
        build(final)
        rebuild = time.perf_counter() - t0
        points.append({"fraction": frac, "updated": m,
                       "incremental_seconds": incremental,
                       "rebuild_seconds": rebuild})

    snapshot.unlink()
    report.write_rows_csv(out / "update.csv",
                          ["fraction", "updated", "incremental_seconds",
                           "rebuild_seconds"],
                          [[p["fraction"], p["updated"],
                            p["incremental_seconds"], p["rebuild_seconds"]]
                           for p in points])
    (out / "update.json").write_text(json.dumps(points, indent=2))
    report.update_crossover_figure(points, out / "update_crossover.png")
    return points


# --- bench: hybrid graph + vector ---------------------------------------------


def hybrid_fixture(people: int = 80, posts: int = 120, comments: int = 400,
                   dim: int = 32, seed: int = 7,
                   segment_capacity: int = 64) -> Database:
    """A small social graph: Person -knows-> Person, Comment -hasCreator->
    Person, Comment -replyOf-> Post, with vectors on Person and Comment."""
    cat = Catalog()
    cat.define_vertex_type("Person", "id", {"id": "INT", "country": "STRING"})
    cat.define_vertex_type("Post", "id", {"id": "INT"})
    cat.define_vertex_type("Comment", "id", {"id": "INT", "score": "INT"})
    cat.define_edge_type("knows", "Person", "Person", {})
    cat.define_edge_type("hasCreator", "Comment", "Person", {})
    cat.define_edge_type("replyOf", "Comment", "Post", {})
    meta = EmbeddingMeta(dimension=dim, model="mini", metric=Metric.L2)
    cat.add_embedding_attribute("Person", "emb", meta=meta)
    cat.add_embedding_attribute("Comment", "emb", meta=meta)

    db = Database(catalog=cat, segment_capacity=segment_capacity)
    rng = np.random.default_rng(seed)
    countries = ("de", "fr", "in", "us")
    with db.transact() as txn:
        for i in range(people):
            txn.insert_vertex("Person", i, {"country": countries[i % 4]})
            txn.upsert_embedding("Person", i, "emb",
                                 rng.standard_normal(dim).astype(np.float32))
        for i in range(posts):
            txn.insert_vertex("Post", i, {})
        for i in range(comments):
            txn.insert_vertex("Comment", i, {"score": int(i % 100)})
            txn.upsert_embedding("Comment", i, "emb",
                                 rng.standard_normal(dim).astype(np.float32))
        for i in range(people):
            txn.add_edge("knows", i, (i * 7 + 1) % people)
            txn.add_edge("knows", i, (i * 3 + 2) % people)
        for c in range(comments):
            txn.add_edge("hasCreator", c, c % people)
            txn.add_edge("replyOf", c, c % posts)
    for tname, attr in (("Person", "emb"), ("Comment", "emb")):
        _build_indexes(db, tname, attr)
    return db


def hybrid_queries(country: str = "de"):
    """The three fixture patterns, smallest hop count first."""
    seed = Cmp("country", "=", country)
    return [
        ("2-hop friends", 2,
         [PathVertex("p", "Person", seed), PathEdge("knows", True),
          PathVertex("f", "Person")],
         "f", "Person"),
        ("3-hop comments", 3,
         [PathVertex("p", "Person", seed), PathEdge("knows", True),
          PathVertex("f", "Person"), PathEdge("hasCreator", False),
          PathVertex("c", "Comment")],
         "c", "Comment"),
        ("4-hop comments", 4,
         [PathVertex("p", "Person", seed), PathEdge("knows", True),
          PathVertex("f", "Person"), PathEdge("knows", True),
          PathVertex("g", "Person"), PathEdge("hasCreator", False),
          PathVertex("c", "Comment")],
         "c", "Comment"),
    ]


def run_hybrid_bench(out_dir, k: int = 10, ef: int = 64, dim: int = 32,
                     seed: int = 7, repeats: int = 5) -> list[dict]:
    """Per-pattern candidate counts, segment counters, and time breakdown."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    db = hybrid_fixture(dim=dim, seed=seed)
    rng = np.random.default_rng(seed + 1)
    qvecs = rng.standard_normal((repeats, dim)).astype(np.float32)

    rows = []
    for name, hops, path, target, target_type in hybrid_queries():
        end_ms = []
        vec_ms = []
        candidates = 0
        stats_last: dict = {}
        for r in range(repeats):
            with db.pinned() as tid:
                t0 = time.perf_counter()
                pr = pattern_match(db, path, at_tid=tid)
                target_set = pr.sets[target]
                candidates = len(target_set)
                stats: dict = {}
                if candidates:
                    attrs = [(t, "emb") for t in sorted(target_set.types())]
                    vector_search(db, attrs, qvecs[r], k, filter=target_set,
                                  ef=ef, at_tid=tid, stats_out=stats)
                end_ms.append((time.perf_counter() - t0) * 1e3)
                vec_ms.append(stats.get("vector_search_ms", 0.0))
                stats_last = stats
        rows.append({
            "name": name, "hops": hops, "target": target_type,
            "candidates": candidates, "k": k, "ef": ef,
            "segments_touched": stats_last.get("segments_touched", 0),
            "index_segments": stats_last.get("index_segments", 0),
            "bruteforce_segments": stats_last.get("bruteforce_segments", 0),
            "vector_search_ms": float(np.mean(vec_ms)),
            "end_to_end_ms": float(np.mean(end_ms)),
        })

    header = ["name", "hops", "target", "candidates", "k", "ef",
              "segments_touched", "index_segments", "bruteforce_segments",
              "vector_search_ms", "end_to_end_ms"]
    report.write_rows_csv(out / "hybrid.csv", header,
                          [[row[h] for h in header] for row in rows])
    (out / "hybrid.json").write_text(json.dumps(rows, indent=2))
    report.hybrid_breakdown_figure(rows, out / "hybrid_breakdown.png")
    db.close()
    return rows


def cmd_bench(args) -> int:
    efs = [int(x) for x in args.ef.split(",")] if args.ef else None
    if args.suite == "recall":
        reports = run_recall_bench(
            args.out, n=args.n, dim=args.dim, queries=args.queries, k=args.k,
            efs=efs or (16, 32, 64, 128, 256, 512), threads=args.threads,
            seed=args.seed, partitions=args.partitions,
            join=args.join.split(",") if args.join else None,
            data=args.data, corpus=args.corpus,
            vertex=args.vertex, attr=args.attr)
        _print_json([r.to_json() for r in reports])
    elif args.suite == "update":
        fractions = ([float(x) for x in args.fractions.split(",")]
                     if args.fractions else (0.0, 0.05, 0.1, 0.2, 0.4, 0.7, 1.0))
        points = run_update_bench(args.out, n=args.n, dim=args.dim,
                                  fractions=fractions, threads=args.threads,
                                  seed=args.seed)
        _print_json(points)
    else:
        rows = run_hybrid_bench(args.out, k=args.k,
                                ef=(efs or [64])[0], seed=args.seed)
        _print_json(rows)
    return 0


# --- vacuum / serve -------------------------------------------------------------


def cmd_vacuum_status(args) -> int:
    db = _open(args)
    try:
        status = vacuum.VacuumController(db).status()
    finally:
        db.close()
    _print_json(status)
    return 0


def cmd_serve(args) -> int:
    from .dist import serve_partition

    host, _, port = args.listen.rpartition(":")
    db = _open(args)
    server = serve_partition(db, args.partitions, args.partition,
                             host or "127.0.0.1", int(port))
    print(f"partition {args.partition}/{args.partitions} listening on "
          f"{server.address}", flush=True)
    try:
        threading.Event().wait()
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
        db.close()
    return 0


# --- argument wiring ------------------------------------------------------------


def _add_data(p) -> None:
    p.add_argument("--data", required=True, help="database directory")


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="gv",
                                  description="embeddable graph + vector store")
    sub = top.add_subparsers(dest="command", required=True)

    schema = sub.add_parser("schema", help="schema management")
    ssub = schema.add_subparsers(dest="schema_command", required=True)
    apply_ = ssub.add_parser("apply", help="run a DDL script")
    apply_.add_argument("file")
    _add_data(apply_)
    apply_.add_argument("--src", help="directory loading jobs resolve against")
    apply_.set_defaults(fn=cmd_schema_apply)

    load = sub.add_parser("load", help="ingest vertices or vectors")
    _add_data(load)
    load.add_argument("--job", help="script with a loading job to run")
    load.add_argument("--src", help="directory job sources resolve against")
    load.add_argument("--csv", help="vertex CSV file")
    load.add_argument("--vectors", help="vector file")
    load.add_argument("--format", choices=("fvecs", "bvecs", "csv"),
                      default="fvecs")
    load.add_argument("--vertex", help="target vertex type")
    load.add_argument("--attr", help="target embedding attribute")
    load.add_argument("--columns", help="comma-separated CSV column names")
    load.add_argument("--id-base", type=int, default=0,
                      help="vertex id of the first vector row")
    load.add_argument("--separator", default=":",
                      help="in-cell vector separator for CSV")
    load.add_argument("--no-create", action="store_true",
                      help="fail on vectors for missing vertices")
    load.set_defaults(fn=cmd_load)

    dump = sub.add_parser("dump", help="write an embedding attribute to .fvecs")
    _add_data(dump)
    dump.add_argument("--vertex", required=True)
    dump.add_argument("--attr", required=True)
    dump.add_argument("--out", required=True)
    dump.set_defaults(fn=cmd_dump)

    query = sub.add_parser("query", help="run a query script")
    _add_data(query)
    query.add_argument("-f", "--file", required=True)
    query.add_argument("-p", "--params", help="JSON file with parameter values")
    query.set_defaults(fn=cmd_query)

    explain = sub.add_parser("explain", help="print plans without running")
    _add_data(explain)
    explain.add_argument("-f", "--file", required=True)
    explain.set_defaults(fn=cmd_explain)

    synth = sub.add_parser("synth", help="generate a corpus + ground truth")
    synth.add_argument("--out", required=True)
    synth.add_argument("--n", type=int, default=10000)
    synth.add_argument("--dim", type=int, default=128)
    synth.add_argument("--queries", type=int, default=100)
    synth.add_argument("--seed", type=int, default=42)
    synth.add_argument("--truth-k", type=int, default=0,
                       help="also write exact top-k ground truth")
    synth.set_defaults(fn=cmd_synth)

    bench = sub.add_parser("bench", help="run a benchmark suite")
    bench.add_argument("--suite", choices=("recall", "update", "hybrid"),
                       required=True)
    bench.add_argument("--out", required=True, help="report directory")
    bench.add_argument("--n", type=int, default=10000)
    bench.add_argument("--dim", type=int, default=128)
    bench.add_argument("--queries", type=int, default=100)
    bench.add_argument("--k", type=int, default=10)
    bench.add_argument("--ef", help="comma-separated ef sweep")
    bench.add_argument("--fractions", help="comma-separated update fractions")
    bench.add_argument("--threads", type=int, default=16,
                       help="sender threads (recall) / build threads (update)")
    bench.add_argument("--seed", type=int, default=42)
    bench.add_argument("--partitions", type=int, default=1,
                       help="search through an in-process cluster")
    bench.add_argument("--join", help="comma-separated worker host:port list")
    bench.add_argument("--data", help="database directory the workers serve")
    bench.add_argument("--corpus",
                       help="directory with base.fvecs / query.fvecs")
    bench.add_argument("--vertex", default="Item",
                       help="vertex type searched in --join mode")
    bench.add_argument("--attr", default="emb",
                       help="embedding attribute searched in --join mode")
    bench.set_defaults(fn=cmd_bench)

    vac = sub.add_parser("vacuum", help="maintenance")
    vsub = vac.add_subparsers(dest="vacuum_command", required=True)
    status = vsub.add_parser("status", help="per-stream counters")
    _add_data(status)
    status.set_defaults(fn=cmd_vacuum_status)

    serve = sub.add_parser("serve", help="host one partition over TCP")
    _add_data(serve)
    serve.add_argument("--listen", required=True, help="HOST:PORT")
    serve.add_argument("--partitions", type=int, required=True)
    serve.add_argument("--partition", type=int, required=True)
    serve.set_defaults(fn=cmd_serve)

    return top


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except GraphVectorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
