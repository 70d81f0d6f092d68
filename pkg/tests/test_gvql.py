"""Query language: parser round trips, plan rendering, execution."""

from pathlib import Path

import numpy as np
import pytest

import oracle
from graphvector import gvql
from graphvector.errors import (GvqlSyntaxError, SemanticError,
                                UnknownVertexType, ValidationError)
from graphvector.gvql import ast
from graphvector.schema import Catalog, EmbeddingMeta
from graphvector.storage import Database

GOLDENS = Path(__file__).parent / "goldens"
DIM = 8

SOURCES = [
    'CREATE VERTEX Post ( id INT PRIMARY KEY, author STRING, content STRING );',
    '''ALTER VERTEX Post ADD EMBEDDING ATTRIBUTE content_emb (
        DIMENSION = 1024, MODEL = GPT4, INDEX = HNSW,
        DATATYPE = FLOAT, METRIC = COSINE );''',
    'CREATE EMBEDDING SPACE GPT4_emb_space ( DIMENSION = 4, MODEL = GPT4, METRIC = L2 );',
    'ALTER VERTEX Post ADD EMBEDDING ATTRIBUTE other_emb IN EMBEDDING SPACE GPT4_emb_space;',
    '''CREATE LOADING JOB j1 FOR GRAPH g1 {
        LOAD f1 TO VERTEX Post VALUES (id, author, content);
        LOAD f2 TO EMBEDDING ATTRIBUTE content_emb ON VERTEX Post
            VALUES (id, split(content_emb, ":"));
    }''',
    '''SELECT s FROM (s:Post)
       ORDER BY VECTOR_DIST(s.content_emb, query_vector) LIMIT k;''',
    '''SELECT s FROM (s:Post)
       WHERE s.language = "English"
       ORDER BY VECTOR_DIST(s.content_emb, query_vector) LIMIT k;''',
    '''SELECT t FROM (s:Person) - [:knows] -> (:Person) <- [:hasCreator] - (t:Post)
       WHERE s.firstName = "Alice" AND t.length > 1000
       ORDER BY VECTOR_DIST(t.content_emb, query_vector) LIMIT k;''',
    '''SELECT s, t FROM (s:Comment) - [:hasCreator] -> (u:Person)
         - [:knows] -> (v:Person) <- [:hasCreator] - (t:Comment)
       WHERE u.firstName = "Alice"
       ORDER BY VECTOR_DIST(s.content_emb, t.content_emb) LIMIT k;''',
    '''SELECT s FROM (s:Post)
       WHERE VECTOR_DIST(s.content_emb, query_vector) < 0.3;''',
    '''CREATE QUERY q1(LIST<FLOAT> topic_emb, INT k) {
        TopKMessages = VectorSearch({Comment.content_emb, Post.content_emb},
                                    topic_emb, k);
        PRINT TopKMessages;
    }''',
    '''CREATE QUERY q3(LIST<FLOAT> query_emb, INT k) {
        Map<VERTEX, FLOAT> @@disMap;
        USComments = SELECT s FROM (s:Comment) WHERE s.country = "US";
        R = VectorSearch({Comment.content_emb}, query_emb, k,
                         {filter: USComments, ef: 200, distanceMap: @@disMap});
        PRINT R;
        PRINT @@disMap;
    }''',
    '''CREATE QUERY q4(LIST<FLOAT> query_emb, INT k) {
        C_num = tg_louvain(["Person"], ["knows"]);
        FOREACH i IN RANGE[0, C_num] DO
            S = SELECT s FROM (s:Person) WHERE s.cid = i
                ORDER BY VECTOR_DIST(s.emb1, query_emb) LIMIT k;
            PRINT S;
        END;
    }''',
    'EXPLAIN SELECT s FROM (s:Post) ORDER BY VECTOR_DIST(s.content_emb, qv) LIMIT 5;',
]


@pytest.mark.parametrize("src_no", range(len(SOURCES)))
def test_parse_pretty_round_trip(src_no):
    stmts = gvql.parse(SOURCES[src_no])
    again = gvql.parse("\n".join(gvql.pretty(s) for s in stmts))
    assert stmts == again


@pytest.mark.parametrize("bad", [
    'SELECT s FROM (s:Post) ORDER BY VECTOR_DIST(s.e, qv);',  # missing LIMIT
    'SELECT s FROM (s:Post',
    'CREATE VERTEX P ( id INT PRIMARY KEY ',
    'SELECT s FROM (s:Post) WHERE s.x = "unclosed;',
])
def test_syntax_errors_carry_position(bad):
    with pytest.raises(GvqlSyntaxError) as err:
        gvql.parse(bad)
    assert "line" in str(err.value)
    assert err.value.line >= 1


def test_parse_one_rejects_multiple_statements():
    with pytest.raises(GvqlSyntaxError):
        gvql.parse_one('SELECT s FROM (s:P) WHERE s.x = 1; SELECT t FROM (t:P) WHERE t.x = 1;')


@pytest.fixture(scope="module")
def plan_catalog():
    cat = Catalog()
    cat.define_vertex_type("Person", "id", {"firstName": "STRING", "cid": "INT"})
    cat.define_vertex_type("Post", "id", {"language": "STRING", "length": "INT"})
    cat.define_vertex_type("Comment", "id", {"country": "STRING", "length": "INT"})
    for t in ("Post", "Comment"):
        cat.add_embedding_attribute(
            t, "content_emb", EmbeddingMeta(DIM, "GPT4", "HNSW", "FLOAT", "L2"))
    cat.add_embedding_attribute(
        "Person", "emb1", EmbeddingMeta(DIM, "GPT4", "HNSW", "FLOAT", "L2"))
    cat.define_edge_type("knows", "Person", "Person")
    cat.define_edge_type("hasCreator", "Comment", "Person")
    cat.define_edge_type("postCreator", "Post", "Person")
    return cat


def plan_text(text, catalog):
    return gvql.plan(gvql.parse_one(text), catalog).render()


def golden(name):
    return (GOLDENS / name).read_text()


def test_plan_golden_topk(plan_catalog):
    got = plan_text('SELECT s FROM (s:Post) ORDER BY '
                    'VECTOR_DIST(s.content_emb, query_vector) LIMIT k;',
                    plan_catalog)
    assert got == golden("plan_topk.txt")


def test_plan_golden_filtered(plan_catalog):
    got = plan_text('SELECT s FROM (s:Post) WHERE s.language = "English" '
                    'ORDER BY VECTOR_DIST(s.content_emb, query_vector) LIMIT k;',
                    plan_catalog)
    assert got == golden("plan_filtered.txt")


def test_plan_golden_pattern():
    cat = Catalog()
    cat.define_vertex_type("Person", "id", {"firstName": "STRING"})
    cat.define_vertex_type("Post", "id", {"length": "INT"})
    cat.add_embedding_attribute(
        "Post", "content_emb", EmbeddingMeta(DIM, "GPT4", "HNSW", "FLOAT", "L2"))
    cat.define_edge_type("knows", "Person", "Person")
    cat.define_edge_type("hasCreator", "Post", "Person")
    got = plan_text(
        'SELECT t FROM (s:Person) - [:knows] -> (:Person) <- [:hasCreator] - (t:Post) '
        'WHERE s.firstName = "Alice" AND t.length > 1000 '
        'ORDER BY VECTOR_DIST(t.content_emb, query_vector) LIMIT k;', cat)
    assert got == golden("plan_pattern.txt")


def test_plan_golden_join():
    cat = Catalog()
    cat.define_vertex_type("Person", "id", {"firstName": "STRING"})
    cat.define_vertex_type("Comment", "id", {})
    cat.add_embedding_attribute(
        "Comment", "content_emb", EmbeddingMeta(DIM, "GPT4", "HNSW", "FLOAT", "L2"))
    cat.define_edge_type("knows", "Person", "Person")
    cat.define_edge_type("hasCreator", "Comment", "Person")
    got = plan_text(
        'SELECT s, t FROM (s:Comment) - [:hasCreator] -> (u:Person) - [:knows] -> '
        '(v:Person) <- [:hasCreator] - (t:Comment) WHERE u.firstName = "Alice" '
        'ORDER BY VECTOR_DIST(s.content_emb, t.content_emb) LIMIT k;', cat)
    assert got == golden("plan_join.txt")


def test_plan_golden_range(plan_catalog):
    got = plan_text('SELECT s FROM (s:Post) '
                    'WHERE VECTOR_DIST(s.content_emb, query_vector) < threshold;',
                    plan_catalog)
    assert got == golden("plan_range.txt")


@pytest.mark.parametrize("text,exc", [
    ('SELECT s FROM (s:Nope) ORDER BY VECTOR_DIST(s.e, qv) LIMIT 1;',
     UnknownVertexType),
    # comparing an INT attribute with a string
    ('SELECT s FROM (s:Post) WHERE s.length = "x" '
     'ORDER BY VECTOR_DIST(s.content_emb, qv) LIMIT 1;', SemanticError),
    ('SELECT s FROM (s:Post) WHERE s.nope = 1 '
     'ORDER BY VECTOR_DIST(s.content_emb, qv) LIMIT 1;', SemanticError),
    # alias t never bound
    ('SELECT t FROM (s:Post) ORDER BY VECTOR_DIST(s.content_emb, qv) LIMIT 1;',
     SemanticError),
    # range truncated by LIMIT is two different answers, refuse it
    ('SELECT s FROM (s:Post) WHERE VECTOR_DIST(s.content_emb, qv) < 0.5 LIMIT 3;',
     SemanticError),
    # knows starts at Person, not Post
    ('SELECT s FROM (s:Post) - [:knows] -> (t:Person) '
     'ORDER BY VECTOR_DIST(s.content_emb, qv) LIMIT 1;', SemanticError),
])
def test_plan_semantic_errors(plan_catalog, text, exc):
    with pytest.raises(exc):
        gvql.plan(gvql.parse_one(text), plan_catalog)


# --- execution ----------------------------------------------------------------


@pytest.fixture(scope="module")
def exec_db(plan_catalog):
    rng = np.random.default_rng(7)
    db = Database(catalog=plan_catalog, segment_capacity=16)
    emb = {}
    with db.transact() as txn:
        for i in range(40):
            lang = "English" if i % 3 == 0 else "French"
            txn.insert_vertex("Post", i, {"language": lang, "length": 100 * i})
            v = rng.normal(size=DIM)
            emb[("Post", i)] = np.asarray(v, np.float32)
            txn.upsert_embedding("Post", i, "content_emb", v)
        for i in range(10):
            txn.insert_vertex("Person", i, {"firstName": "Alice" if i < 3 else "Bob",
                                            "cid": i % 4})
            txn.upsert_embedding("Person", i, "emb1", rng.normal(size=DIM))
        for i in range(20):
            txn.insert_vertex("Comment", i, {"country": "US" if i % 2 == 0 else "FR",
                                             "length": i})
            v = rng.normal(size=DIM)
            emb[("Comment", i)] = np.asarray(v, np.float32)
            txn.upsert_embedding("Comment", i, "content_emb", v)
        for i in range(40):
            txn.add_edge("postCreator", i, i % 10)
        for i in range(20):
            txn.add_edge("hasCreator", i, i % 10)
        for i in range(9):
            txn.add_edge("knows", i, i + 1)
    qv = rng.normal(size=DIM).astype(np.float32)
    yield db, emb, qv
    db.close()


def posts_of(emb):
    return [(pid, v) for (t, pid), v in sorted(emb.items()) if t == "Post"]


def test_execute_topk_matches_oracle(exec_db):
    db, emb, qv = exec_db
    res = gvql.execute(db, 'SELECT s FROM (s:Post) ORDER BY '
                           'VECTOR_DIST(s.content_emb, query_vector) LIMIT 5;',
                       params={"query_vector": qv.tolist()})[0]
    want = oracle.topk(posts_of(emb), qv, 5)
    assert [v["id"] for v in res["vertices"]] == [pid for pid, _ in want]
    np.testing.assert_allclose(res["distances"], [d for _, d in want], rtol=1e-5)
    assert res["stats"]["segments_touched"] >= 1


def test_execute_filtered_matches_oracle(exec_db):
    db, emb, qv = exec_db
    res = gvql.execute(db, 'SELECT s FROM (s:Post) WHERE s.language = "English" '
                           'ORDER BY VECTOR_DIST(s.content_emb, qv) LIMIT 4;',
                       params={"qv": qv.tolist()})[0]
    english = [(pid, v) for pid, v in posts_of(emb) if pid % 3 == 0]
    want = oracle.topk(english, qv, 4)
    assert [v["id"] for v in res["vertices"]] == [pid for pid, _ in want]


def test_execute_range_matches_oracle(exec_db):
    db, emb, qv = exec_db
    dists = sorted(oracle.dist_l2(qv, v) for _, v in posts_of(emb))
    thr = (dists[19] + dists[20]) / 2
    res = gvql.execute(db, 'SELECT s FROM (s:Post) WHERE '
                           'VECTOR_DIST(s.content_emb, qv) < thr;',
                       params={"qv": qv.tolist(), "thr": thr})[0]
    want = oracle.range_search(posts_of(emb), qv, thr)
    assert [v["id"] for v in res["vertices"]] == [pid for pid, _ in want]


def test_execute_pattern_select(exec_db):
    db, _, _ = exec_db
    res = gvql.execute(db, 'SELECT p FROM (c:Comment) - [:hasCreator] -> (p:Person) '
                           'WHERE c.country = "US";')[0]
    assert {v["id"] for v in res["vertices"]} == {i % 10 for i in range(0, 20, 2)}


def test_execute_explain_renders_plan(exec_db):
    db, _, _ = exec_db
    res = gvql.execute(db, 'EXPLAIN SELECT s FROM (s:Post) ORDER BY '
                           'VECTOR_DIST(s.content_emb, qv) LIMIT 3;')[0]
    assert res["plan"] == 'EmbeddingAction[Top 3, {s.content_emb}, qv]\n'


def test_explain_wraps_block():
    stmt = gvql.parse_one('EXPLAIN SELECT s FROM (s:P) WHERE s.x = 1;')
    assert isinstance(stmt, ast.Explain)
    assert isinstance(stmt.query, ast.SelectBlock)


def test_procedure_with_filter_and_distance_map(exec_db):
    db, emb, qv = exec_db
    proc = '''CREATE QUERY q3(LIST<FLOAT> query_emb, INT k) {
        Map<VERTEX, FLOAT> @@disMap;
        USComments = SELECT s FROM (s:Comment) WHERE s.country = "US";
        R = VectorSearch({Comment.content_emb}, query_emb, k,
                         {filter: USComments, ef: 200, distanceMap: @@disMap});
        PRINT R;
        PRINT @@disMap;
    }'''
    outs = gvql.execute(db, proc, params={"query_emb": qv.tolist(), "k": 3})[0]
    assert outs["query"] == "q3"
    r, dmap = outs["outputs"]
    us = [(pid, v) for (t, pid), v in sorted(emb.items())
          if t == "Comment" and pid % 2 == 0]
    want = oracle.topk(us, qv, 3)
    assert [v["id"] for v in r["vertices"]] == [pid for pid, _ in want]
    assert len(dmap["entries"]) == 3


def test_procedure_foreach_over_communities(exec_db):
    db, _, qv = exec_db
    proc = '''CREATE QUERY q4(LIST<FLOAT> query_emb, INT k) {
        C_num = tg_louvain(["Person"], ["knows"]);
        PRINT C_num;
        FOREACH i IN RANGE[0, C_num] DO
            S = SELECT s FROM (s:Person) WHERE s.cid = i
                ORDER BY VECTOR_DIST(s.emb1, query_emb) LIMIT k;
            PRINT S;
        END;
    }'''
    outs = gvql.execute(db, proc, params={"query_emb": qv.tolist(), "k": 2})[0]
    assert outs["outputs"][0] == {"name": "C_num", "value": 4}
    # RANGE[0, 4] is inclusive on both ends
    assert len(outs["outputs"]) == 1 + 5
    assert all(len(o["vertices"]) <= 2 for o in outs["outputs"][1:])
    assert len(outs["outputs"][1]["vertices"]) == 2


def test_procedure_set_variable_feeds_pattern(exec_db):
    db, emb, qv = exec_db
    proc = '''CREATE QUERY q2(LIST<FLOAT> topic_emb, INT k) {
        TopKMessages = VectorSearch({Comment.content_emb}, topic_emb, k);
        Authors = SELECT p FROM (:TopKMessages) - [:hasCreator] -> (p:Person);
        PRINT Authors;
    }'''
    outs = gvql.execute(db, proc, params={"topic_emb": qv.tolist(), "k": 4})[0]
    comments = [(pid, v) for (t, pid), v in sorted(emb.items()) if t == "Comment"]
    want_people = {pid % 10 for pid, _ in oracle.topk(comments, qv, 4)}
    assert {v["id"] for v in outs["outputs"][0]["vertices"]} == want_people


def test_execute_similarity_join_matches_oracle(exec_db):
    db, emb, qv = exec_db
    res = gvql.execute(
        db, 'SELECT s, t FROM (s:Comment) - [:hasCreator] -> (u:Person) '
            '- [:knows] -> (v:Person) <- [:hasCreator] - (t:Comment) '
            'ORDER BY VECTOR_DIST(s.content_emb, t.content_emb) LIMIT 5;')[0]
    pairs = {(s, t) for s in range(20) for t in range(20)
             if s % 10 < 9 and t % 10 == s % 10 + 1}
    want = sorted((oracle.dist_l2(emb[("Comment", s)], emb[("Comment", t)]), s, t)
                  for s, t in pairs)[:5]
    got = [(p["source"]["id"], p["target"]["id"]) for p in res["pairs"]]
    assert got == [(s, t) for _, s, t in want]


@pytest.mark.parametrize("bad", [
    'CREATE QUERY b1() { PRINT nope; }',
    'CREATE QUERY b2() { R = VectorSearch({Comment.content_emb}, qv, 3, '
    '{distanceMap: @@m}); PRINT R; }',       # @@m never declared
    'CREATE QUERY b3() { X = tg_unknown(["Person"]); PRINT X; }',
    'CREATE QUERY b4() { S = SELECT s FROM (s:Missing); PRINT S; }',
])
def test_procedure_validation_failures(exec_db, bad):
    db, _, qv = exec_db
    with pytest.raises((SemanticError, UnknownVertexType)):
        gvql.execute(db, bad, params={"qv": qv.tolist()})


def test_ddl_then_query_on_fresh_database():
    db = Database()
    gvql.execute(db, '''
      CREATE VERTEX Doc ( id INT PRIMARY KEY, title STRING );
      CREATE DIRECTED EDGE cites (FROM Doc, TO Doc);
      CREATE EMBEDDING SPACE S1 ( DIMENSION = 4, MODEL = M1, METRIC = COSINE );
      ALTER VERTEX Doc ADD EMBEDDING ATTRIBUTE e1 IN EMBEDDING SPACE S1;
    ''')
    meta = db.catalog.embedding_meta("Doc", "e1")
    assert meta.dimension == 4 and meta.metric.value == "COSINE"
    with db.transact() as txn:
        txn.insert_vertex("Doc", 1, {"title": "a"})
        txn.upsert_embedding("Doc", 1, "e1", [1, 0, 0, 0])
        txn.insert_vertex("Doc", 2, {"title": "b"})
        txn.upsert_embedding("Doc", 2, "e1", [0.9, 0.1, 0, 0])
    res = gvql.execute(db, 'SELECT d FROM (d:Doc) ORDER BY '
                           'VECTOR_DIST(d.e1, [1.0, 0.0, 0.0, 0.0]) LIMIT 1;')[0]
    assert res["vertices"] == [{"type": "Doc", "id": 1}]


def test_missing_param_is_rejected(exec_db):
    db, _, _ = exec_db
    with pytest.raises(ValidationError):
        gvql.execute(db, 'SELECT s FROM (s:Post) ORDER BY '
                         'VECTOR_DIST(s.content_emb, absent) LIMIT 2;')