"""Scalar predicates over vertex attributes.

A small expression tree (comparisons joined by AND/OR/NOT) evaluated
row-by-row during segment scans. Predicates are pure data: they serialize
to JSON so a coordinator can ship them to the worker that owns a segment.
Comparing across value kinds (string vs number) raises PredicateTypeError
rather than guessing an order.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import PredicateTypeError

_OPS = ("=", "!=", "<", "<=", ">", ">=")


class Predicate:
    def evaluate(self, attrs: dict) -> bool:
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError

    def render(self) -> str:
        raise NotImplementedError

    def __and__(self, other: "Predicate") -> "Predicate":
        return And(self, other)

    def __or__(self, other: "Predicate") -> "Predicate":
        return Or(self, other)

    def __invert__(self) -> "Predicate":
        return Not(self)


@dataclass(frozen=True)
class TruePred(Predicate):
    def evaluate(self, attrs: dict) -> bool:
        return True

    def to_json(self) -> dict:
        return {"kind": "true"}

    def render(self) -> str:
        return "true"


@dataclass(frozen=True)
class Cmp(Predicate):
    attr: str
    op: str
    value: object

    def __post_init__(self):
        if self.op not in _OPS:
            raise ValueError(f"unknown comparison operator {self.op!r}")

    def evaluate(self, attrs: dict) -> bool:
        if self.attr not in attrs:
            raise PredicateTypeError(f"row has no attribute {self.attr!r}")
        left = attrs[self.attr]
        right = self.value
        if left is None:
            return False
        l_num = isinstance(left, (int, float)) and not isinstance(left, bool)
        r_num = isinstance(right, (int, float)) and not isinstance(right, bool)
        if l_num != r_num or (isinstance(left, str) != isinstance(right, str)):
            raise PredicateTypeError(
                f"cannot compare {self.attr}={left!r} with {right!r}")
        if self.op == "=":
            return left == right
        if self.op == "!=":
            return left != right
        if self.op == "<":
            return left < right
        if self.op == "<=":
            return left <= right
        if self.op == ">":
            return left > right
        return left >= right

    def to_json(self) -> dict:
        return {"kind": "cmp", "attr": self.attr, "op": self.op, "value": self.value}

    def render(self) -> str:
        if isinstance(self.value, str):
            lit = '"' + self.value.replace("\\", "\\\\").replace('"', '\\"') + '"'
        elif isinstance(self.value, bool):
            lit = "true" if self.value else "false"
        else:
            lit = format_number(self.value)
        return f"{self.attr} {self.op} {lit}"


@dataclass(frozen=True)
class And(Predicate):
    left: Predicate
    right: Predicate

    def evaluate(self, attrs: dict) -> bool:
        return self.left.evaluate(attrs) and self.right.evaluate(attrs)

    def to_json(self) -> dict:
        return {"kind": "and", "left": self.left.to_json(), "right": self.right.to_json()}

    def render(self) -> str:
        return f"{self.left.render()} AND {self.right.render()}"


@dataclass(frozen=True)
class Or(Predicate):
    left: Predicate
    right: Predicate

    def evaluate(self, attrs: dict) -> bool:
        return self.left.evaluate(attrs) or self.right.evaluate(attrs)

    def to_json(self) -> dict:
        return {"kind": "or", "left": self.left.to_json(), "right": self.right.to_json()}

    def render(self) -> str:
        return f"({self.left.render()} OR {self.right.render()})"


@dataclass(frozen=True)
class Not(Predicate):
    inner: Predicate

    def evaluate(self, attrs: dict) -> bool:
        return not self.inner.evaluate(attrs)

    def to_json(self) -> dict:
        return {"kind": "not", "inner": self.inner.to_json()}

    def render(self) -> str:
        return f"NOT ({self.inner.render()})"


def format_number(x) -> str:
    if isinstance(x, int):
        return str(x)
    return repr(float(x))


def predicate_from_json(obj: dict) -> Predicate:
    kind = obj.get("kind")
    if kind == "true":
        return TruePred()
    if kind == "cmp":
        return Cmp(obj["attr"], obj["op"], obj["value"])
    if kind == "and":
        return And(predicate_from_json(obj["left"]), predicate_from_json(obj["right"]))
    if kind == "or":
        return Or(predicate_from_json(obj["left"]), predicate_from_json(obj["right"]))
    if kind == "not":
        return Not(predicate_from_json(obj["inner"]))
    raise ValueError(f"unknown predicate kind {kind!r}")
