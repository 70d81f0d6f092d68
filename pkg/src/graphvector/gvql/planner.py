"""Semantic analysis and plan construction for SELECT blocks.

Plans follow the engine's action vocabulary: a VertexAction seeds the
binding set, EdgeActions expand it hop by hop, and a terminal
EmbeddingAction performs the top-k or range search over the surviving
candidates. Execution proceeds bottom-up; rendering prints the steps
top-down. Similarity joins have no EmbeddingAction: the final EdgeAction
feeds a pair heap instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import SemanticError, UnknownVertexType
from ..metrics import Metric
from ..query import PlanStep
from ..schema import Catalog, check_compatibility
from . import ast

SCALAR_KIND = {
    "INT": "number", "UINT": "number", "FLOAT": "number", "DOUBLE": "number",
    "BOOL": "bool", "STRING": "string", "DATETIME": "string",
}


@dataclass
class PlannedVertex:
    alias: str | None
    label: str
    is_set_var: bool
    conds: list[ast.Comparison] = field(default_factory=list)

    def head_text(self) -> str:
        return f"{self.label}:{self.alias}" if self.alias else self.label

    def full_text(self) -> str:
        head = self.head_text()
        if self.conds:
            return head + " {" + " AND ".join(c.text() for c in self.conds) + "}"
        return head


@dataclass
class QueryPlan:
    kind: str  # topk | range | join | pattern
    steps: list[PlanStep]  # execution order; rendered in reverse
    verts: list[PlannedVertex]
    edges: list[ast.PatEdge]
    block: ast.SelectBlock
    target_alias: str | None = None
    attr: str | None = None
    qvec: object | None = None
    limit: object | None = None
    bound: object | None = None
    s_alias: str | None = None
    t_alias: str | None = None
    s_attr: str | None = None
    t_attr: str | None = None

    def render(self) -> str:
        return "".join(step.render() + "\n" for step in reversed(self.steps))


def _alias_positions(verts: list[PlannedVertex]) -> dict[str, int]:
    out = {}
    for i, v in enumerate(verts):
        if v.alias is not None:
            if v.alias in out:
                raise SemanticError(f"duplicate alias {v.alias!r} in pattern")
            out[v.alias] = i
    return out


def _check_literal_type(catalog: Catalog, vtype: str, cond: ast.Comparison) -> None:
    if not isinstance(cond.right, ast.Lit):
        return  # parameter values are checked at execution
    vt = catalog.get_vertex_type(vtype)
    stype = vt.scalar_type_of(cond.left.attr)
    want = SCALAR_KIND[stype]
    v = cond.right.value
    have = ("bool" if isinstance(v, bool)
            else "number" if isinstance(v, (int, float))
            else "string")
    if want != have:
        raise SemanticError(
            f"{vtype}.{cond.left.attr} is {stype}; cannot compare with {have} literal")


def plan(block: ast.SelectBlock, catalog: Catalog,
         known_vars: frozenset[str] | set[str] = frozenset()) -> QueryPlan:
    """Resolve names, type-check, and emit the step sequence."""
    pat_verts = [p for p in block.pattern if isinstance(p, ast.PatVertex)]
    edges = [p for p in block.pattern if isinstance(p, ast.PatEdge)]

    verts: list[PlannedVertex] = []
    for pv in pat_verts:
        if pv.label in catalog.vertex_types:
            verts.append(PlannedVertex(pv.alias, pv.label, is_set_var=False))
        elif pv.label in known_vars:
            verts.append(PlannedVertex(pv.alias, pv.label, is_set_var=True))
        else:
            raise UnknownVertexType(
                f"{pv.label!r} is neither a vertex type nor a set variable")
    positions = _alias_positions(verts)

    for i, edge in enumerate(edges):
        et = catalog.get_edge_type(edge.etype)
        left, right = verts[i], verts[i + 1]
        src, dst = (left, right) if edge.forward else (right, left)
        if not src.is_set_var and src.label != et.from_type:
            raise SemanticError(
                f"edge {edge.etype} starts at {et.from_type}, pattern has {src.label}")
        if not dst.is_set_var and dst.label != et.to_type:
            raise SemanticError(
                f"edge {edge.etype} ends at {et.to_type}, pattern has {dst.label}")

    range_conds = [c for c in block.where if isinstance(c, ast.RangeCond)]
    for cond in block.where:
        if isinstance(cond, ast.RangeCond):
            continue
        alias = cond.left.alias
        if alias not in positions:
            raise SemanticError(f"predicate references unknown alias {alias!r}")
        v = verts[positions[alias]]
        if not v.is_set_var:
            if cond.left.attr not in catalog.get_vertex_type(v.label).attributes:
                raise SemanticError(f"{v.label} has no attribute {cond.left.attr!r}")
            _check_literal_type(catalog, v.label, cond)
        v.conds.append(cond)

    if len(range_conds) > 1:
        raise SemanticError("at most one VECTOR_DIST range predicate per query")
    if range_conds and block.order_vd is not None:
        raise SemanticError(
            "a query uses VECTOR_DIST either in ORDER BY or in WHERE, not both")

    if block.order_vd is not None and isinstance(block.order_vd.b, ast.AttrRef):
        return _plan_join(block, catalog, verts, edges, positions)
    if block.order_vd is not None:
        return _plan_topk(block, catalog, verts, edges, positions)
    if range_conds:
        return _plan_range(block, catalog, verts, edges, positions, range_conds[0])
    return _plan_pattern(block, verts, edges, positions)


def _require_embedding(catalog: Catalog, v: PlannedVertex, attr: str):
    """Returns the meta for a typed vertex; set variables resolve at run time."""
    if v.is_set_var:
        return None
    return catalog.embedding_meta(v.label, attr)


def _target_of(block: ast.SelectBlock, positions: dict[str, int],
               verts: list[PlannedVertex], ref: ast.AttrRef) -> PlannedVertex:
    if ref.alias not in positions:
        raise SemanticError(f"VECTOR_DIST references unknown alias {ref.alias!r}")
    if block.projection != [ref.alias]:
        raise SemanticError(
            f"projection must be the search alias {ref.alias!r}, "
            f"got {', '.join(block.projection)}")
    return verts[positions[ref.alias]]


def _pattern_steps(verts: list[PlannedVertex], edges: list[ast.PatEdge],
                   skip_bare_seed: bool) -> list[PlanStep]:
    steps: list[PlanStep] = []
    seed = verts[0]
    bare = not seed.conds and not seed.is_set_var and not edges
    if not (skip_bare_seed and bare):
        steps.append(PlanStep("VertexAction", (seed.full_text(),)))
    for i, edge in enumerate(edges):
        left, right = verts[i], verts[i + 1]
        edge_text = f"{edge.etype}>" if edge.forward else f"<{edge.etype}"
        steps.append(PlanStep(
            "EdgeAction", (left.head_text(), edge_text, right.full_text())))
    return steps


def _plan_topk(block, catalog, verts, edges, positions) -> QueryPlan:
    vd = block.order_vd
    target = _target_of(block, positions, verts, vd.a)
    _require_embedding(catalog, target, vd.a.attr)
    steps = _pattern_steps(verts, edges, skip_bare_seed=True)
    steps.append(PlanStep("EmbeddingAction", (
        f"Top {block.limit.text()}", "{" + vd.a.text() + "}", vd.b.text())))
    return QueryPlan("topk", steps, verts, edges, block,
                     target_alias=vd.a.alias, attr=vd.a.attr,
                     qvec=vd.b, limit=block.limit)


def _plan_range(block, catalog, verts, edges, positions,
                cond: ast.RangeCond) -> QueryPlan:
    vd = cond.vd
    if isinstance(vd.b, ast.AttrRef):
        raise SemanticError("range predicates compare against a query vector")
    target = _target_of(block, positions, verts, vd.a)
    meta = _require_embedding(catalog, target, vd.a.attr)
    if meta is not None and meta.metric is Metric.INNER_PRODUCT:
        raise SemanticError(
            "range search is not defined for INNER_PRODUCT (unbounded below)")
    if block.limit is not None:
        raise SemanticError("range queries return all matches; LIMIT is not allowed")
    steps = _pattern_steps(verts, edges, skip_bare_seed=True)
    steps.append(PlanStep("EmbeddingAction", (
        f"Range {cond.bound.text()}", "{" + vd.a.text() + "}", vd.b.text())))
    return QueryPlan("range", steps, verts, edges, block,
                     target_alias=vd.a.alias, attr=vd.a.attr,
                     qvec=vd.b, bound=cond.bound)


def _plan_join(block, catalog, verts, edges, positions) -> QueryPlan:
    vd = block.order_vd
    s_ref, t_ref = vd.a, vd.b
    for ref in (s_ref, t_ref):
        if ref.alias not in positions:
            raise SemanticError(f"VECTOR_DIST references unknown alias {ref.alias!r}")
    if not edges:
        raise SemanticError("similarity join needs a pattern with at least one edge")
    if block.projection != [s_ref.alias, t_ref.alias]:
        raise SemanticError(
            f"projection must be {s_ref.alias}, {t_ref.alias} for a similarity join")
    s_meta = _require_embedding(catalog, verts[positions[s_ref.alias]], s_ref.attr)
    t_meta = _require_embedding(catalog, verts[positions[t_ref.alias]], t_ref.attr)
    if s_meta is not None and t_meta is not None:
        check_compatibility(s_meta, t_meta)
    steps = _pattern_steps(verts, edges, skip_bare_seed=False)
    accum = (f"@@heapAcc += ({s_ref.alias}, {t_ref.alias}, "
             f"dist({s_ref.text()},{t_ref.text()}))")
    last = steps[-1]
    steps[-1] = PlanStep(last.kind, last.args + (accum,))
    return QueryPlan("join", steps, verts, edges, block,
                     s_alias=s_ref.alias, t_alias=t_ref.alias,
                     s_attr=s_ref.attr, t_attr=t_ref.attr, limit=block.limit)


def _plan_pattern(block, verts, edges, positions) -> QueryPlan:
    if len(block.projection) != 1:
        raise SemanticError("pattern queries project exactly one alias")
    alias = block.projection[0]
    if alias not in positions:
        raise SemanticError(f"projection alias {alias!r} not bound in pattern")
    steps = _pattern_steps(verts, edges, skip_bare_seed=False)
    return QueryPlan("pattern", steps, verts, edges, block, target_alias=alias)
