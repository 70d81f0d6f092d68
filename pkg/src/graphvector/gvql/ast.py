"""Statement and expression nodes, plus the canonical pretty-printer.

Nodes record their source position for error reporting but exclude it from
equality, so parse(pretty(parse(x))) == parse(x) is a meaningful test.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..predicates import format_number

MAX_INLINE_VECTOR = 4096


@dataclass(frozen=True)
class Pos:
    line: int
    col: int


def _pos_field():
    return field(default=Pos(0, 0), compare=False, repr=False)


# --- expressions ---

@dataclass(frozen=True)
class Lit:
    value: object  # int | float | str | bool

    def text(self) -> str:
        if isinstance(self.value, bool):
            return "TRUE" if self.value else "FALSE"
        if isinstance(self.value, str):
            escaped = self.value.replace("\\", "\\\\").replace('"', '\\"')
            return f'"{escaped}"'
        return format_number(self.value)


@dataclass(frozen=True)
class Param:
    """A bare identifier: procedure parameter, loop variable, or set variable."""

    name: str

    def text(self) -> str:
        return self.name


@dataclass(frozen=True)
class AccumRef:
    name: str  # without the @@ prefix

    def text(self) -> str:
        return f"@@{self.name}"


@dataclass(frozen=True)
class AttrRef:
    alias: str
    attr: str

    def text(self) -> str:
        return f"{self.alias}.{self.attr}"


@dataclass(frozen=True)
class VecLit:
    values: tuple[float, ...]

    def text(self) -> str:
        return "[" + ", ".join(format_number(v) for v in self.values) + "]"


@dataclass(frozen=True)
class Comparison:
    left: AttrRef
    op: str  # = != < <= > >=
    right: object  # Lit | Param

    def text(self) -> str:
        return f"{self.left.text()} {self.op} {self.right.text()}"


@dataclass(frozen=True)
class VectorDist:
    a: AttrRef
    b: object  # AttrRef | Param | VecLit

    def text(self) -> str:
        return f"VECTOR_DIST({self.a.text()}, {self.b.text()})"


@dataclass(frozen=True)
class RangeCond:
    vd: VectorDist
    bound: object  # Lit | Param

    def text(self) -> str:
        return f"{self.vd.text()} < {self.bound.text()}"


# --- patterns ---

@dataclass(frozen=True)
class PatVertex:
    alias: str | None
    label: str | None  # vertex type or set variable; None never occurs in source

    def text(self) -> str:
        return f"({self.alias or ''}:{self.label})"


@dataclass(frozen=True)
class PatEdge:
    etype: str
    forward: bool
    alias: str | None = None

    def text(self) -> str:
        inner = f"[{self.alias or ''}:{self.etype}]"
        return f"-{inner}->" if self.forward else f"<-{inner}-"


# --- DDL ---

@dataclass(frozen=True)
class AttrDef:
    name: str
    scalar_type: str
    primary: bool = False


@dataclass
class CreateVertex:
    name: str
    attrs: list[AttrDef]
    pos: Pos = _pos_field()


@dataclass
class CreateEdge:
    name: str
    from_type: str
    to_type: str
    attrs: list[AttrDef] = field(default_factory=list)
    pos: Pos = _pos_field()


@dataclass
class CreateEmbeddingSpace:
    name: str
    settings: dict[str, object]
    pos: Pos = _pos_field()


@dataclass
class AddEmbeddingAttr:
    vertex: str
    attr: str
    settings: dict[str, object] | None  # inline form
    space: str | None  # IN EMBEDDING SPACE form
    pos: Pos = _pos_field()


@dataclass
class LoadTarget:
    source: str
    vertex: str
    columns: list[str]
    attr: str | None = None  # embedding form when set
    split_column: str | None = None
    separator: str = ":"


@dataclass
class LoadJob:
    name: str
    graph: str
    loads: list[LoadTarget]
    pos: Pos = _pos_field()


# --- queries ---

@dataclass
class SelectBlock:
    projection: list[str]
    pattern: list  # PatVertex | PatEdge alternating
    where: list = field(default_factory=list)  # Comparison | RangeCond conjuncts
    order_vd: VectorDist | None = None
    limit: object | None = None  # Lit | Param
    pos: Pos = _pos_field()


@dataclass
class ParamDecl:
    type_text: str
    name: str


@dataclass
class AccumDecl:
    type_text: str  # e.g. "Map<VERTEX, FLOAT>"
    name: str
    pos: Pos = _pos_field()


@dataclass
class VectorSearchCall:
    attrs: list[tuple[str, str]]  # (vertex type, embedding attr)
    qvec: object  # Param | VecLit
    k: object  # Lit | Param
    opts: dict[str, object] = field(default_factory=dict)  # filter/ef/distanceMap
    pos: Pos = _pos_field()


@dataclass
class BuiltinCall:
    name: str
    args: list
    pos: Pos = _pos_field()


@dataclass
class Assign:
    var: str
    value: object  # SelectBlock | VectorSearchCall | BuiltinCall
    pos: Pos = _pos_field()


@dataclass
class PrintStmt:
    target: object  # Param | AccumRef
    pos: Pos = _pos_field()


@dataclass
class Foreach:
    var: str
    lo: object  # Lit | Param
    hi: object
    body: list = field(default_factory=list)
    pos: Pos = _pos_field()


@dataclass
class Procedure:
    name: str
    params: list[ParamDecl]
    body: list = field(default_factory=list)
    pos: Pos = _pos_field()


@dataclass
class Explain:
    query: SelectBlock
    pos: Pos = _pos_field()


# --- pretty-printer ---

def _settings_text(settings: dict[str, object]) -> str:
    inner = ",\n".join(f"    {k} = {v}" for k, v in settings.items())
    return "(\n" + inner + "\n)"


def pretty(node) -> str:
    """Canonical source text; parsing it yields an equal AST."""
    if isinstance(node, CreateVertex):
        cols = ",\n".join(
            f"    {a.name} {a.scalar_type}" + (" PRIMARY KEY" if a.primary else "")
            for a in node.attrs)
        return f"CREATE VERTEX {node.name} (\n{cols}\n);"
    if isinstance(node, CreateEdge):
        cols = "".join(f", {a.name} {a.scalar_type}" for a in node.attrs)
        return (f"CREATE DIRECTED EDGE {node.name} "
                f"(FROM {node.from_type}, TO {node.to_type}{cols});")
    if isinstance(node, CreateEmbeddingSpace):
        return f"CREATE EMBEDDING SPACE {node.name} {_settings_text(node.settings)};"
    if isinstance(node, AddEmbeddingAttr):
        head = f"ALTER VERTEX {node.vertex} ADD EMBEDDING ATTRIBUTE {node.attr}"
        if node.space is not None:
            return f"{head} IN EMBEDDING SPACE {node.space};"
        return f"{head} {_settings_text(node.settings)};"
    if isinstance(node, LoadJob):
        lines = []
        for ld in node.loads:
            if ld.attr is None:
                cols = ", ".join(ld.columns)
                lines.append(f"  LOAD {ld.source} TO VERTEX {ld.vertex} VALUES ({cols});")
            else:
                lines.append(
                    f"  LOAD {ld.source} TO EMBEDDING ATTRIBUTE {ld.attr} "
                    f"ON VERTEX {ld.vertex} VALUES ({ld.columns[0]}, "
                    f'split({ld.split_column}, "{ld.separator}"));')
        body = "\n".join(lines)
        return f"CREATE LOADING JOB {node.name} FOR GRAPH {node.graph} {{\n{body}\n}}"
    if isinstance(node, SelectBlock):
        return _pretty_select(node) + ";"
    if isinstance(node, Procedure):
        params = ", ".join(f"{p.type_text} {p.name}" for p in node.params)
        body = "\n".join("  " + line for stmt in node.body
                         for line in _pretty_stmt(stmt).splitlines())
        return f"CREATE QUERY {node.name}({params}) {{\n{body}\n}}"
    if isinstance(node, Explain):
        return "EXPLAIN " + _pretty_select(node.query) + ";"
    raise TypeError(f"cannot pretty-print {type(node).__name__}")


def _pretty_select(node: SelectBlock) -> str:
    parts = ["SELECT " + ", ".join(node.projection),
             "FROM " + " ".join(p.text() for p in node.pattern)]
    if node.where:
        parts.append("WHERE " + " AND ".join(c.text() for c in node.where))
    if node.order_vd is not None:
        parts.append("ORDER BY " + node.order_vd.text())
    if node.limit is not None:
        parts.append("LIMIT " + node.limit.text())
    return "\n".join(parts)


def _pretty_stmt(stmt) -> str:
    if isinstance(stmt, AccumDecl):
        return f"{stmt.type_text} @@{stmt.name};"
    if isinstance(stmt, Assign):
        if isinstance(stmt.value, SelectBlock):
            return f"{stmt.var} =\n" + "\n".join(
                "  " + line for line in _pretty_select(stmt.value).splitlines()) + ";"
        if isinstance(stmt.value, VectorSearchCall):
            return f"{stmt.var} = {_pretty_vs(stmt.value)};"
        if isinstance(stmt.value, BuiltinCall):
            args = ", ".join(
                "[" + ", ".join(f'"{s}"' for s in a) + "]" if isinstance(a, list)
                else a.text() for a in stmt.value.args)
            return f"{stmt.var} = {stmt.value.name}({args});"
    if isinstance(stmt, PrintStmt):
        return f"PRINT {stmt.target.text()};"
    if isinstance(stmt, Foreach):
        body = "\n".join("  " + line for s in stmt.body
                         for line in _pretty_stmt(s).splitlines())
        return (f"FOREACH {stmt.var} IN RANGE[{stmt.lo.text()}, {stmt.hi.text()}] DO\n"
                f"{body}\nEND;")
    raise TypeError(f"cannot pretty-print statement {type(stmt).__name__}")


def _pretty_vs(call: VectorSearchCall) -> str:
    attrs = "{" + ", ".join(f"{t}.{a}" for t, a in call.attrs) + "}"
    args = [attrs, call.qvec.text(), call.k.text()]
    if call.opts:
        opts = ", ".join(f"{k}: {v.text()}" for k, v in call.opts.items())
        args.append("{" + opts + "}")
    return "VectorSearch(" + ", ".join(args) + ")"
