"""Recursive-descent parser producing position-annotated statements.

Keywords are case-insensitive, identifiers case-sensitive. Multi-character
operators (arrows, <=, @@) are assembled here from single-character tokens.
"""

from __future__ import annotations

from ..errors import GvqlSyntaxError
from . import ast
from .tokens import Token, tokenize

_SETTING_KEYS = ("DIMENSION", "MODEL", "INDEX", "DATATYPE", "METRIC")


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    # --- token plumbing ---

    def peek(self, ahead: int = 0) -> Token:
        return self.toks[min(self.i + ahead, len(self.toks) - 1)]

    def next(self) -> Token:
        tok = self.toks[self.i]
        if tok.kind != "EOF":
            self.i += 1
        return tok

    def error(self, msg: str, tok: Token | None = None):
        tok = tok or self.peek()
        raise GvqlSyntaxError(msg, tok.line, tok.col)

    def at_punct(self, ch: str, ahead: int = 0) -> bool:
        t = self.peek(ahead)
        return t.kind == "PUNCT" and t.text == ch

    def expect_punct(self, ch: str) -> Token:
        if not self.at_punct(ch):
            self.error(f"expected {ch!r}, found {self.peek().text!r}")
        return self.next()

    def at_kw(self, word: str, ahead: int = 0) -> bool:
        t = self.peek(ahead)
        return t.kind == "IDENT" and t.text.upper() == word

    def expect_kw(self, word: str) -> Token:
        if not self.at_kw(word):
            self.error(f"expected {word}, found {self.peek().text!r}")
        return self.next()

    def expect_ident(self, what: str = "identifier") -> Token:
        t = self.peek()
        if t.kind != "IDENT":
            self.error(f"expected {what}, found {t.text!r}")
        return self.next()

    def pos(self) -> ast.Pos:
        t = self.peek()
        return ast.Pos(t.line, t.col)

    # --- entry ---

    def script(self) -> list:
        out = []
        while self.peek().kind != "EOF":
            out.append(self.statement())
        return out

    def statement(self):
        if self.at_kw("CREATE"):
            return self.create()
        if self.at_kw("ALTER"):
            return self.alter()
        if self.at_kw("SELECT"):
            block = self.select_block()
            self.expect_punct(";")
            return block
        if self.at_kw("EXPLAIN"):
            pos = self.pos()
            self.next()
            self.expect_kw("SELECT")
            self.i -= 1  # select_block expects to consume SELECT
            block = self.select_block()
            self.expect_punct(";")
            return ast.Explain(block, pos=pos)
        self.error(f"unexpected statement start {self.peek().text!r}")

    # --- DDL ---

    def create(self):
        pos = self.pos()
        self.expect_kw("CREATE")
        if self.at_kw("VERTEX"):
            return self.create_vertex(pos)
        if self.at_kw("DIRECTED") or self.at_kw("EDGE") or self.at_kw("UNDIRECTED"):
            return self.create_edge(pos)
        if self.at_kw("EMBEDDING"):
            return self.create_space(pos)
        if self.at_kw("QUERY"):
            return self.procedure(pos)
        if self.at_kw("LOADING"):
            return self.loading_job(pos)
        self.error(f"cannot CREATE {self.peek().text!r}")

    def create_vertex(self, pos) -> ast.CreateVertex:
        self.expect_kw("VERTEX")
        name = self.expect_ident("vertex type name").text
        self.expect_punct("(")
        attrs = []
        while True:
            attrs.append(self.attr_def())
            if self.at_punct(","):
                self.next()
                continue
            break
        self.expect_punct(")")
        self.expect_punct(";")
        return ast.CreateVertex(name, attrs, pos=pos)

    def attr_def(self) -> ast.AttrDef:
        name = self.expect_ident("attribute name").text
        stype = self.expect_ident("scalar type").text.upper()
        primary = False
        if self.at_kw("PRIMARY"):
            self.next()
            self.expect_kw("KEY")
            primary = True
        return ast.AttrDef(name, stype, primary)

    def create_edge(self, pos) -> ast.CreateEdge:
        if self.at_kw("DIRECTED") or self.at_kw("UNDIRECTED"):
            self.next()
        self.expect_kw("EDGE")
        name = self.expect_ident("edge type name").text
        self.expect_punct("(")
        self.expect_kw("FROM")
        from_type = self.expect_ident("vertex type").text
        self.expect_punct(",")
        self.expect_kw("TO")
        to_type = self.expect_ident("vertex type").text
        attrs = []
        while self.at_punct(","):
            self.next()
            attrs.append(self.attr_def())
        self.expect_punct(")")
        self.expect_punct(";")
        return ast.CreateEdge(name, from_type, to_type, attrs, pos=pos)

    def create_space(self, pos) -> ast.CreateEmbeddingSpace:
        self.expect_kw("EMBEDDING")
        self.expect_kw("SPACE")
        name = self.expect_ident("space name").text
        settings = self.settings_block()
        self.expect_punct(";")
        return ast.CreateEmbeddingSpace(name, settings, pos=pos)

    def settings_block(self) -> dict:
        self.expect_punct("(")
        settings: dict[str, object] = {}
        while True:
            key_tok = self.expect_ident("setting name")
            key = key_tok.text.upper()
            if key not in _SETTING_KEYS:
                self.error(f"unknown embedding setting {key_tok.text!r}", key_tok)
            self.expect_punct("=")
            t = self.next()
            if t.kind == "NUMBER":
                settings[key] = int(t.text)
            elif t.kind in ("IDENT", "STRING"):
                settings[key] = t.text
            else:
                self.error(f"bad setting value {t.text!r}", t)
            if self.at_punct(","):
                self.next()
                continue
            break
        self.expect_punct(")")
        return settings

    def alter(self) -> ast.AddEmbeddingAttr:
        pos = self.pos()
        self.expect_kw("ALTER")
        self.expect_kw("VERTEX")
        vertex = self.expect_ident("vertex type").text
        self.expect_kw("ADD")
        self.expect_kw("EMBEDDING")
        self.expect_kw("ATTRIBUTE")
        attr = self.expect_ident("attribute name").text
        if self.at_kw("IN"):
            self.next()
            self.expect_kw("EMBEDDING")
            self.expect_kw("SPACE")
            space = self.expect_ident("space name").text
            self.expect_punct(";")
            return ast.AddEmbeddingAttr(vertex, attr, None, space, pos=pos)
        settings = self.settings_block()
        self.expect_punct(";")
        return ast.AddEmbeddingAttr(vertex, attr, settings, None, pos=pos)

    def loading_job(self, pos) -> ast.LoadJob:
        self.expect_kw("LOADING")
        self.expect_kw("JOB")
        name = self.expect_ident("job name").text
        self.expect_kw("FOR")
        self.expect_kw("GRAPH")
        graph = self.expect_ident("graph name").text
        self.expect_punct("{")
        loads = []
        while self.at_kw("LOAD"):
            loads.append(self.load_target())
        self.expect_punct("}")
        if self.at_punct(";"):
            self.next()
        return ast.LoadJob(name, graph, loads, pos=pos)

    def load_target(self) -> ast.LoadTarget:
        self.expect_kw("LOAD")
        src_tok = self.next()
        if src_tok.kind not in ("IDENT", "STRING"):
            self.error("expected source name or path", src_tok)
        self.expect_kw("TO")
        if self.at_kw("VERTEX"):
            self.next()
            vertex = self.expect_ident("vertex type").text
            self.expect_kw("VALUES")
            self.expect_punct("(")
            cols = [self.expect_ident("column").text]
            while self.at_punct(","):
                self.next()
                cols.append(self.expect_ident("column").text)
            self.expect_punct(")")
            self.expect_punct(";")
            return ast.LoadTarget(src_tok.text, vertex, cols)
        self.expect_kw("EMBEDDING")
        self.expect_kw("ATTRIBUTE")
        attr = self.expect_ident("embedding attribute").text
        self.expect_kw("ON")
        self.expect_kw("VERTEX")
        vertex = self.expect_ident("vertex type").text
        self.expect_kw("VALUES")
        self.expect_punct("(")
        id_col = self.expect_ident("id column").text
        self.expect_punct(",")
        self.expect_kw("SPLIT")
        self.expect_punct("(")
        split_col = self.expect_ident("vector column").text
        self.expect_punct(",")
        sep_tok = self.next()
        if sep_tok.kind != "STRING":
            self.error("expected separator string", sep_tok)
        self.expect_punct(")")
        self.expect_punct(")")
        self.expect_punct(";")
        return ast.LoadTarget(src_tok.text, vertex, [id_col], attr=attr,
                              split_column=split_col, separator=sep_tok.text)

    # --- SELECT blocks ---

    def select_block(self) -> ast.SelectBlock:
        pos = self.pos()
        self.expect_kw("SELECT")
        projection = [self.expect_ident("alias").text]
        while self.at_punct(","):
            self.next()
            projection.append(self.expect_ident("alias").text)
        self.expect_kw("FROM")
        pattern = self.pattern()
        where: list = []
        if self.at_kw("WHERE"):
            self.next()
            where.append(self.condition())
            while self.at_kw("AND"):
                self.next()
                where.append(self.condition())
        order_vd = None
        limit = None
        order_tok = self.peek()
        if self.at_kw("ORDER"):
            self.next()
            self.expect_kw("BY")
            order_vd = self.vector_dist()
        if self.at_kw("LIMIT"):
            self.next()
            limit = self.scalar_expr()
        if order_vd is not None and limit is None:
            raise GvqlSyntaxError("ORDER BY VECTOR_DIST requires LIMIT",
                                  order_tok.line, order_tok.col)
        return ast.SelectBlock(projection, pattern, where, order_vd, limit, pos=pos)

    def pattern(self) -> list:
        out = [self.pat_vertex()]
        while self.at_punct("-") or self.at_punct("<"):
            out.append(self.pat_edge())
            out.append(self.pat_vertex())
        return out

    def pat_vertex(self) -> ast.PatVertex:
        self.expect_punct("(")
        alias = None
        if self.peek().kind == "IDENT":
            alias = self.next().text
        self.expect_punct(":")
        label = self.expect_ident("vertex type or set variable").text
        self.expect_punct(")")
        return ast.PatVertex(alias, label)

    def pat_edge(self) -> ast.PatEdge:
        if self.at_punct("<"):  # <-[:etype]-
            self.next()
            self.expect_punct("-")
            alias, etype = self.edge_body()
            self.expect_punct("-")
            return ast.PatEdge(etype, forward=False, alias=alias)
        self.expect_punct("-")  # -[:etype]->
        alias, etype = self.edge_body()
        self.expect_punct("-")
        self.expect_punct(">")
        return ast.PatEdge(etype, forward=True, alias=alias)

    def edge_body(self) -> tuple[str | None, str]:
        self.expect_punct("[")
        alias = None
        if self.peek().kind == "IDENT":
            alias = self.next().text
        self.expect_punct(":")
        etype = self.expect_ident("edge type").text
        self.expect_punct("]")
        return alias, etype

    def condition(self):
        if self.at_kw("VECTOR_DIST"):
            vd = self.vector_dist()
            tok = self.peek()
            op = self.cmp_op()
            if op != "<":
                self.error("range predicates use '<'", tok)
            bound = self.scalar_expr()
            return ast.RangeCond(vd, bound)
        left = self.attr_ref()
        op = self.cmp_op()
        right = self.scalar_expr()
        return ast.Comparison(left, op, right)

    def vector_dist(self) -> ast.VectorDist:
        self.expect_kw("VECTOR_DIST")
        self.expect_punct("(")
        a = self.attr_ref()
        self.expect_punct(",")
        b = self.vector_expr()
        self.expect_punct(")")
        return ast.VectorDist(a, b)

    def attr_ref(self) -> ast.AttrRef:
        alias = self.expect_ident("alias").text
        self.expect_punct(".")
        attr = self.expect_ident("attribute").text
        return ast.AttrRef(alias, attr)

    def cmp_op(self) -> str:
        t = self.next()
        if t.kind != "PUNCT" or t.text not in "=!<>":
            self.error(f"expected comparison operator, found {t.text!r}", t)
        op = t.text
        if op == "=" and self.at_punct("="):
            self.next()  # accept == as =
            return "="
        if op == "!":
            self.expect_punct("=")
            return "!="
        if op in "<>" and self.at_punct("="):
            self.next()
            return op + "="
        return op

    def scalar_expr(self):
        t = self.peek()
        if t.kind == "NUMBER":
            self.next()
            return ast.Lit(self.number_value(t))
        if t.kind == "PUNCT" and t.text == "-" and self.peek(1).kind == "NUMBER":
            self.next()
            num = self.next()
            value = self.number_value(num)
            return ast.Lit(-value)
        if t.kind == "STRING":
            self.next()
            return ast.Lit(t.text)
        if t.kind == "IDENT":
            if t.text.upper() in ("TRUE", "FALSE"):
                self.next()
                return ast.Lit(t.text.upper() == "TRUE")
            self.next()
            return ast.Param(t.text)
        self.error(f"expected value, found {t.text!r}", t)

    @staticmethod
    def number_value(tok: Token):
        text = tok.text
        if "." in text or "e" in text or "E" in text:
            return float(text)
        return int(text)

    def vector_expr(self):
        t = self.peek()
        if t.kind == "IDENT" and self.at_punct(".", 1):
            return self.attr_ref()
        if t.kind == "IDENT":
            self.next()
            return ast.Param(t.text)
        if self.at_punct("["):
            return self.vec_lit()
        self.error(f"expected query vector, found {t.text!r}", t)

    def vec_lit(self) -> ast.VecLit:
        open_tok = self.expect_punct("[")
        values = []
        while not self.at_punct("]"):
            expr = self.scalar_expr()
            if not isinstance(expr, ast.Lit) or isinstance(expr.value, (str, bool)):
                self.error("vector literals hold numbers only")
            values.append(float(expr.value))
            if self.at_punct(","):
                self.next()
        self.expect_punct("]")
        if len(values) > ast.MAX_INLINE_VECTOR:
            raise GvqlSyntaxError(
                f"inline vector exceeds {ast.MAX_INLINE_VECTOR} elements",
                open_tok.line, open_tok.col)
        return ast.VecLit(tuple(values))

    # --- procedures ---

    def procedure(self, pos) -> ast.Procedure:
        self.expect_kw("QUERY")
        name = self.expect_ident("procedure name").text
        self.expect_punct("(")
        params = []
        if not self.at_punct(")"):
            while True:
                params.append(self.param_decl())
                if self.at_punct(","):
                    self.next()
                    continue
                break
        self.expect_punct(")")
        self.expect_punct("{")
        body = self.stmt_list("}")
        self.expect_punct("}")
        return ast.Procedure(name, params, body, pos=pos)

    def param_decl(self) -> ast.ParamDecl:
        type_text = self.type_text()
        name = self.expect_ident("parameter name").text
        return ast.ParamDecl(type_text, name)

    def type_text(self) -> str:
        base = self.expect_ident("type").text
        if not self.at_punct("<"):
            return base
        self.next()
        inner = [self.type_text()]
        while self.at_punct(","):
            self.next()
            inner.append(self.type_text())
        self.expect_punct(">")
        return f"{base}<{', '.join(inner)}>"

    def stmt_list(self, *closers: str) -> list:
        body = []
        while not (self.peek().kind == "PUNCT" and self.peek().text in closers) \
                and not self.at_kw("END") and self.peek().kind != "EOF":
            body.append(self.proc_stmt())
        return body

    def proc_stmt(self):
        pos = self.pos()
        if self.at_kw("PRINT"):
            self.next()
            if self.at_punct("@"):
                target = self.accum_ref()
            else:
                target = ast.Param(self.expect_ident("variable").text)
            self.expect_punct(";")
            return ast.PrintStmt(target, pos=pos)
        if self.at_kw("FOREACH"):
            return self.foreach(pos)
        # IDENT '=' starts an assignment; anything else is an accumulator decl
        if self.peek().kind == "IDENT" and self.at_punct("=", 1):
            var = self.next().text
            self.next()  # =
            value = self.assign_value()
            self.expect_punct(";")
            return ast.Assign(var, value, pos=pos)
        type_text = self.type_text()
        accum = self.accum_ref()
        self.expect_punct(";")
        return ast.AccumDecl(type_text, accum.name, pos=pos)

    def accum_ref(self) -> ast.AccumRef:
        self.expect_punct("@")
        self.expect_punct("@")
        return ast.AccumRef(self.expect_ident("accumulator name").text)

    def assign_value(self):
        if self.at_kw("SELECT"):
            return self.select_block()
        if self.at_kw("VECTORSEARCH"):
            return self.vector_search_call()
        name_tok = self.expect_ident("function or block")
        self.expect_punct("(")
        args = []
        while not self.at_punct(")"):
            if self.at_punct("["):
                args.append(self.string_list())
            else:
                args.append(self.scalar_expr())
            if self.at_punct(","):
                self.next()
        self.expect_punct(")")
        return ast.BuiltinCall(name_tok.text, args, pos=ast.Pos(name_tok.line,
                                                                name_tok.col))

    def string_list(self) -> list[str]:
        self.expect_punct("[")
        out = []
        while not self.at_punct("]"):
            t = self.next()
            if t.kind != "STRING":
                self.error("expected string in list", t)
            out.append(t.text)
            if self.at_punct(","):
                self.next()
        self.expect_punct("]")
        return out

    def vector_search_call(self) -> ast.VectorSearchCall:
        pos = self.pos()
        self.expect_kw("VECTORSEARCH")
        self.expect_punct("(")
        self.expect_punct("{")
        attrs = [self.type_attr()]
        while self.at_punct(","):
            self.next()
            attrs.append(self.type_attr())
        self.expect_punct("}")
        self.expect_punct(",")
        qvec = self.vector_expr()
        if isinstance(qvec, ast.AttrRef):
            self.error("query vector must be a parameter or inline list")
        self.expect_punct(",")
        k = self.scalar_expr()
        opts: dict[str, object] = {}
        if self.at_punct(","):
            self.next()
            opts = self.vs_opts()
        self.expect_punct(")")
        return ast.VectorSearchCall(attrs, qvec, k, opts, pos=pos)

    def type_attr(self) -> tuple[str, str]:
        t = self.expect_ident("vertex type").text
        self.expect_punct(".")
        a = self.expect_ident("embedding attribute").text
        return (t, a)

    def vs_opts(self) -> dict:
        self.expect_punct("{")
        opts: dict[str, object] = {}
        while True:
            key_tok = self.expect_ident("option name")
            key = key_tok.text
            if key not in ("filter", "ef", "distanceMap"):
                self.error(f"unknown VectorSearch option {key!r}", key_tok)
            self.expect_punct(":")
            if key == "distanceMap":
                opts[key] = self.accum_ref()
            else:
                opts[key] = self.scalar_expr()
            if self.at_punct(","):
                self.next()
                continue
            break
        self.expect_punct("}")
        return opts

    def foreach(self, pos) -> ast.Foreach:
        self.expect_kw("FOREACH")
        var = self.expect_ident("loop variable").text
        self.expect_kw("IN")
        self.expect_kw("RANGE")
        self.expect_punct("[")
        lo = self.scalar_expr()
        self.expect_punct(",")
        hi = self.scalar_expr()
        self.expect_punct("]")
        self.expect_kw("DO")
        body = self.stmt_list()
        self.expect_kw("END")
        self.expect_punct(";")
        return ast.Foreach(var, lo, hi, body, pos=pos)


def parse(text: str) -> list:
    """Parse a script into a list of statements."""
    return _Parser(text).script()


def parse_one(text: str):
    """Parse exactly one statement."""
    stmts = parse(text)
    if len(stmts) != 1:
        raise GvqlSyntaxError(f"expected one statement, found {len(stmts)}", 1, 1)
    return stmts[0]
