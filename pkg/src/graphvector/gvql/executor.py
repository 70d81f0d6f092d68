"""Statement execution: DDL against the catalog, queries against the store.

Procedures are validated symbolically before any data is touched, so a
script that prints an unassigned variable or searches with an undeclared
accumulator fails fast with a SemanticError instead of halfway through.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import query as q
from ..errors import SemanticError, ValidationError
from ..predicates import Cmp, Predicate
from ..schema import EmbeddingMeta
from ..storage import Database
from . import ast
from .planner import QueryPlan, plan

_SETTING_FIELDS = {
    "DIMENSION": "dimension", "MODEL": "model", "INDEX": "index_kind",
    "DATATYPE": "datatype", "METRIC": "metric",
}


def _meta_from_settings(settings: dict[str, object]) -> EmbeddingMeta:
    kwargs = {}
    for key, value in settings.items():
        kwargs[_SETTING_FIELDS[key]] = value
    if "dimension" not in kwargs:
        raise SemanticError("embedding settings need DIMENSION")
    if "model" not in kwargs:
        raise SemanticError("embedding settings need MODEL")
    return EmbeddingMeta(**kwargs)


@dataclass
class Env:
    """Names visible to a running procedure."""

    values: dict[str, object] = field(default_factory=dict)  # parameters
    scalars: dict[str, object] = field(default_factory=dict)  # loop vars, counts
    sets: dict[str, q.VertexSet] = field(default_factory=dict)
    ranked: dict[str, list] = field(default_factory=dict)
    pairs: dict[str, list] = field(default_factory=dict)
    accums: dict[str, q.DistanceMap] = field(default_factory=dict)

    def scalar(self, expr) -> object:
        if isinstance(expr, ast.Lit):
            return expr.value
        if isinstance(expr, ast.Param):
            if expr.name in self.scalars:
                return self.scalars[expr.name]
            if expr.name in self.values:
                v = self.values[expr.name]
                if isinstance(v, (list, tuple, np.ndarray, dict)):
                    raise ValidationError(
                        f"parameter {expr.name!r} is not scalar")
                return v
            raise ValidationError(f"no value for parameter {expr.name!r}")
        raise ValidationError(f"expected a scalar, got {type(expr).__name__}")

    def intval(self, expr, what: str) -> int:
        v = self.scalar(expr)
        if isinstance(v, bool) or not isinstance(v, (int, float)) or v != int(v):
            raise ValidationError(f"{what} must be an integer, got {v!r}")
        return int(v)

    def floatval(self, expr, what: str) -> float:
        v = self.scalar(expr)
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ValidationError(f"{what} must be a number, got {v!r}")
        return float(v)

    def qvec(self, expr) -> np.ndarray:
        if isinstance(expr, ast.VecLit):
            return np.asarray(expr.values, dtype=np.float32)
        if isinstance(expr, ast.Param):
            v = self.values.get(expr.name)
            if v is None:
                raise ValidationError(f"no value for parameter {expr.name!r}")
            arr = np.asarray(v, dtype=np.float32)
            if arr.ndim != 1:
                raise ValidationError(
                    f"parameter {expr.name!r} is not a flat vector")
            return arr
        raise ValidationError("query vector must be a parameter or inline list")


def _ref_json(db: Database, ref) -> dict:
    t, gid = ref
    return {"type": t, "id": db.pid_of(t, gid)}


def _set_json(db: Database, vs: q.VertexSet) -> list[dict]:
    return [_ref_json(db, r) for r in vs.members()]


def _ranked_json(db: Database, ranked) -> dict:
    return {"vertices": [_ref_json(db, r) for r, _ in ranked],
            "distances": [d for _, d in ranked]}


def _pairs_json(db: Database, pairs) -> list[dict]:
    return [{"source": _ref_json(db, s), "target": _ref_json(db, t),
             "distance": d} for s, t, d in pairs]


def _build_path(qp: QueryPlan, env: Env) -> list:
    path: list = []
    for i, pv in enumerate(qp.verts):
        pred: Predicate | None = None
        for cond in pv.conds:
            c = Cmp(cond.left.attr, cond.op, env.scalar(cond.right))
            pred = c if pred is None else (pred & c)
        if pv.is_set_var:
            members = env.sets.get(pv.label)
            if members is None:
                raise SemanticError(f"set variable {pv.label!r} is not defined")
            path.append(q.PathVertex(pv.alias or f"_{i}", None,
                                     predicate=pred, members=members))
        else:
            path.append(q.PathVertex(pv.alias or f"_{i}", pv.label,
                                     predicate=pred))
        if i < len(qp.edges):
            path.append(q.PathEdge(qp.edges[i].etype, qp.edges[i].forward))
    return path


def _empty_result() -> dict:
    return {"vertices": [], "distances": [], "stats": {}}


def run_plan(db: Database, qp: QueryPlan, env: Env) -> dict:
    """Execute one planned SELECT under a single pinned snapshot."""
    with db.pinned() as tid:
        if qp.kind == "pattern":
            pr = q.pattern_match(db, _build_path(qp, env), at_tid=tid)
            vs = pr.sets[qp.target_alias]
            return {"vertices": _set_json(db, vs), "stats": {},
                    "_set": vs, "_ranked": None}

        if qp.kind == "join":
            k = env.intval(qp.limit, "LIMIT")
            if k < 1:
                raise ValidationError(f"LIMIT must be >= 1, got {k}")
            pairs = q.similarity_join(db, _build_path(qp, env), qp.s_alias,
                                      qp.t_alias, qp.s_attr, qp.t_attr, k,
                                      at_tid=tid)
            return {"pairs": _pairs_json(db, pairs), "stats": {},
                    "_pairs": pairs}

        qv = env.qvec(qp.qvec)
        seed = qp.verts[0]
        pure = (len(qp.verts) == 1 and not seed.conds and not seed.is_set_var)
        if pure:
            filt = None
            attrs = [(seed.label, qp.attr)]
        else:
            pr = q.pattern_match(db, _build_path(qp, env), at_tid=tid)
            filt = pr.sets[qp.target_alias]
            if len(filt) == 0:
                out = _empty_result()
                out["_set"] = filt
                out["_ranked"] = []
                return out
            attrs = [(t, qp.attr) for t in sorted(filt.types())]

        if qp.kind == "topk":
            k = env.intval(qp.limit, "LIMIT")
            ef = max(2 * k, 128)
            stats: dict = {}
            dm = q.DistanceMap()
            vs = q.vector_search(db, attrs, qv, k, filter=filt, ef=ef,
                                 distance_map_out=dm, at_tid=tid,
                                 stats_out=stats)
            ranked = dm.ranked()
        else:  # range
            threshold = env.floatval(qp.bound, "range bound")
            ranked = []
            for t, attr in attrs:
                ranked.extend(q.range_query(db, t, attr, qv, threshold,
                                            filter=filt, at_tid=tid))
            ranked.sort(key=lambda item: (item[1], item[0]))
            vs = q.VertexSet.from_members(db, [r for r, _ in ranked])
            stats = {}
        out = _ranked_json(db, ranked)
        out["stats"] = stats
        out["_set"] = vs
        out["_ranked"] = ranked
        return out


def _run_vector_search(db: Database, call: ast.VectorSearchCall,
                       env: Env) -> tuple[q.VertexSet, list, dict]:
    qv = env.qvec(call.qvec)
    k = env.intval(call.k, "k")
    filt = None
    ef = max(2 * k, 128)
    dm_out = None
    if "filter" in call.opts:
        opt = call.opts["filter"]
        if not isinstance(opt, ast.Param) or opt.name not in env.sets:
            name = opt.name if isinstance(opt, ast.Param) else opt
            raise SemanticError(f"filter {name!r} is not a defined vertex set")
        filt = env.sets[opt.name]
    if "ef" in call.opts:
        ef = env.intval(call.opts["ef"], "ef")
    if "distanceMap" in call.opts:
        ref = call.opts["distanceMap"]
        if ref.name not in env.accums:
            raise SemanticError(f"accumulator @@{ref.name} is not declared")
        dm_out = env.accums[ref.name]
    stats: dict = {}
    dm = q.DistanceMap()
    vs = q.vector_search(db, list(call.attrs), qv, k, filter=filt, ef=ef,
                         distance_map_out=dm, stats_out=stats)
    if dm_out is not None:
        dm_out.update(dm)
    return vs, dm.ranked(), stats


def _tg_louvain(db: Database, call: ast.BuiltinCall, env: Env) -> int:
    """Community count read off precomputed "cid" attributes.

    A full modularity pass is out of scope; callers label vertices with a
    "cid" attribute up front and this reports how many distinct labels the
    named types carry.
    """
    if len(call.args) != 2:
        raise SemanticError("tg_louvain takes vertex types and edge types")
    vtypes, etypes = call.args
    for et in etypes:
        db.catalog.get_edge_type(et)
    seen: set = set()
    with db.pinned() as tid:
        for vt in vtypes:
            db.catalog.get_vertex_type(vt)
            for seg in db.segments_of(vt):
                mask = db.live_mask(vt, seg, tid)
                base = seg * db.segment_capacity
                for off in np.nonzero(mask)[0]:
                    attrs = db.vertex_attrs(vt, base + int(off), tid)
                    cid = None if attrs is None else attrs.get("cid")
                    if cid is not None:
                        seen.add(cid)
    return len(seen)


def check_procedure(proc: ast.Procedure, catalog) -> None:
    """Symbolic walk: every name must be defined before use."""
    scalars: set[str] = set()
    vectors: set[str] = set()
    sets: set[str] = set()
    pairs: set[str] = set()
    accums: set[str] = set()
    for p in proc.params:
        tt = p.type_text.upper()
        if tt.startswith("LIST") or tt.startswith("SET"):
            vectors.add(p.name)
        else:
            scalars.add(p.name)

    def walk(body) -> None:
        for stmt in body:
            if isinstance(stmt, ast.AccumDecl):
                if not stmt.type_text.replace(" ", "").upper().startswith(
                        "MAP<VERTEX,"):
                    raise SemanticError(
                        f"unsupported accumulator type {stmt.type_text!r}")
                accums.add(stmt.name)
            elif isinstance(stmt, ast.Assign):
                v = stmt.value
                if isinstance(v, ast.SelectBlock):
                    qp = plan(v, catalog, known_vars=frozenset(sets))
                    (pairs if qp.kind == "join" else sets).add(stmt.var)
                elif isinstance(v, ast.VectorSearchCall):
                    catalog.check_search_targets(list(v.attrs))
                    if "filter" in v.opts:
                        opt = v.opts["filter"]
                        if not isinstance(opt, ast.Param) or opt.name not in sets:
                            raise SemanticError(
                                "filter option must name a defined vertex set")
                    if "distanceMap" in v.opts and \
                            v.opts["distanceMap"].name not in accums:
                        raise SemanticError(
                            f"accumulator @@{v.opts['distanceMap'].name} "
                            "is not declared")
                    sets.add(stmt.var)
                elif isinstance(v, ast.BuiltinCall):
                    if v.name != "tg_louvain":
                        raise SemanticError(f"unknown function {v.name!r}")
                    scalars.add(stmt.var)
            elif isinstance(stmt, ast.PrintStmt):
                t = stmt.target
                if isinstance(t, ast.AccumRef):
                    if t.name not in accums:
                        raise SemanticError(
                            f"PRINT of undeclared accumulator @@{t.name}")
                elif t.name not in (scalars | sets | pairs):
                    raise SemanticError(
                        f"PRINT of unassigned variable {t.name!r}")
            elif isinstance(stmt, ast.Foreach):
                scalars.add(stmt.var)
                walk(stmt.body)

    walk(proc.body)


def execute_procedure(db: Database, proc: ast.Procedure,
                      params: dict | None = None) -> list[dict]:
    """Run a procedure; the result is its PRINT outputs in order."""
    check_procedure(proc, db.catalog)
    params = params or {}
    env = Env()
    for p in proc.params:
        if p.name not in params:
            raise ValidationError(f"missing parameter {p.name!r}")
        env.values[p.name] = params[p.name]
    outputs: list[dict] = []
    _exec_body(db, proc.body, env, outputs)
    return outputs


def _exec_body(db: Database, body: list, env: Env, outputs: list[dict]) -> None:
    for stmt in body:
        if isinstance(stmt, ast.AccumDecl):
            env.accums[stmt.name] = q.DistanceMap()
        elif isinstance(stmt, ast.Assign):
            _exec_assign(db, stmt, env)
        elif isinstance(stmt, ast.PrintStmt):
            outputs.append(_exec_print(db, stmt, env))
        elif isinstance(stmt, ast.Foreach):
            lo = env.intval(stmt.lo, "FOREACH lower bound")
            hi = env.intval(stmt.hi, "FOREACH upper bound")
            for i in range(lo, hi + 1):
                env.scalars[stmt.var] = i
                _exec_body(db, stmt.body, env, outputs)
        else:
            raise SemanticError(
                f"statement {type(stmt).__name__} is not allowed in a procedure")


def _exec_assign(db: Database, stmt: ast.Assign, env: Env) -> None:
    v = stmt.value
    if isinstance(v, ast.SelectBlock):
        qp = plan(v, db.catalog, known_vars=frozenset(env.sets))
        res = run_plan(db, qp, env)
        if qp.kind == "join":
            env.pairs[stmt.var] = res["_pairs"]
            env.sets.pop(stmt.var, None)
        else:
            env.sets[stmt.var] = res["_set"]
            if res.get("_ranked") is not None:
                env.ranked[stmt.var] = res["_ranked"]
            else:
                env.ranked.pop(stmt.var, None)
    elif isinstance(v, ast.VectorSearchCall):
        vs, ranked, _stats = _run_vector_search(db, v, env)
        env.sets[stmt.var] = vs
        env.ranked[stmt.var] = ranked
    elif isinstance(v, ast.BuiltinCall):
        if v.name != "tg_louvain":
            raise SemanticError(f"unknown function {v.name!r}")
        env.scalars[stmt.var] = _tg_louvain(db, v, env)
    else:
        raise SemanticError(f"cannot assign {type(v).__name__}")


def _exec_print(db: Database, stmt: ast.PrintStmt, env: Env) -> dict:
    t = stmt.target
    if isinstance(t, ast.AccumRef):
        if t.name not in env.accums:
            raise SemanticError(f"PRINT of undeclared accumulator @@{t.name}")
        entries = [{"vertex": _ref_json(db, ref), "distance": d}
                   for ref, d in env.accums[t.name].ranked()]
        return {"name": f"@@{t.name}", "entries": entries}
    name = t.name
    if name in env.pairs:
        return {"name": name, "pairs": _pairs_json(db, env.pairs[name])}
    if name in env.sets:
        out = {"name": name, "vertices": _set_json(db, env.sets[name])}
        if name in env.ranked:
            rj = _ranked_json(db, env.ranked[name])
            out["vertices"] = rj["vertices"]
            out["distances"] = rj["distances"]
        return out
    if name in env.scalars:
        return {"name": name, "value": env.scalars[name]}
    raise SemanticError(f"PRINT of unassigned variable {name!r}")


def execute_statement(db: Database, stmt, params: dict | None = None,
                      data_dir=None) -> dict | None:
    """One top-level statement; DDL mutates the catalog, queries run."""
    catalog = db.catalog
    if isinstance(stmt, ast.CreateVertex):
        primary = [a.name for a in stmt.attrs if a.primary]
        if len(primary) != 1:
            raise SemanticError(
                f"vertex {stmt.name} needs exactly one PRIMARY KEY")
        catalog.define_vertex_type(
            stmt.name, primary[0],
            {a.name: a.scalar_type for a in stmt.attrs})
        return {"defined": stmt.name}
    if isinstance(stmt, ast.CreateEdge):
        catalog.define_edge_type(stmt.name, stmt.from_type, stmt.to_type,
                                 {a.name: a.scalar_type for a in stmt.attrs})
        return {"defined": stmt.name}
    if isinstance(stmt, ast.CreateEmbeddingSpace):
        catalog.create_embedding_space(stmt.name,
                                       _meta_from_settings(stmt.settings))
        return {"defined": stmt.name}
    if isinstance(stmt, ast.AddEmbeddingAttr):
        meta = None
        if stmt.settings is not None:
            meta = _meta_from_settings(stmt.settings)
        catalog.add_embedding_attribute(stmt.vertex, stmt.attr, meta=meta,
                                        space=stmt.space)
        return {"defined": f"{stmt.vertex}.{stmt.attr}"}
    if isinstance(stmt, ast.LoadJob):
        if data_dir is None:
            raise ValidationError("loading jobs need a data directory")
        from ..loader import run_load_job
        return run_load_job(db, stmt, data_dir)
    if isinstance(stmt, ast.SelectBlock):
        env = Env(values=dict(params or {}))
        qp = plan(stmt, catalog)
        res = run_plan(db, qp, env)
        return {k: v for k, v in res.items() if not k.startswith("_")}
    if isinstance(stmt, ast.Explain):
        qp = plan(stmt.query, catalog)
        return {"plan": qp.render()}
    if isinstance(stmt, ast.Procedure):
        outputs = execute_procedure(db, stmt, params)
        return {"query": stmt.name, "outputs": outputs}
    raise SemanticError(f"cannot execute {type(stmt).__name__}")


def execute(db: Database, text: str, params: dict | None = None,
            data_dir=None) -> list[dict]:
    """Parse and run a script; one result object per statement."""
    from .parser import parse
    results = []
    for stmt in parse(text):
        out = execute_statement(db, stmt, params=params, data_dir=data_dir)
        if out is not None:
            results.append(out)
    return results
