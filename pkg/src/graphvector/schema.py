"""Catalog of vertex types, edge types, and embedding attributes.

Embedding attributes are declared separately from scalar attributes and can
be grouped into named embedding spaces so that several attributes across
types share one (dimension, model, datatype, metric) contract. Queries that
mix attributes must only mix compatible ones; `check_compatibility` raises
the first mismatching field, checked in a fixed order, and deliberately
ignores the index kind (HNSW vs FLAT is an execution detail, not a meaning).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    BadAttribute,
    DatatypeMismatch,
    DimensionMismatch,
    DuplicateAttribute,
    DuplicateType,
    MetricMismatch,
    ModelMismatch,
    UnknownAttribute,
    UnknownSpace,
    UnknownType,
)
from .metrics import Metric

SCALAR_TYPES = ("INT", "UINT", "FLOAT", "DOUBLE", "BOOL", "STRING", "DATETIME")
INDEX_KINDS = ("HNSW", "FLAT")
EMBEDDING_DATATYPES = ("FLOAT",)


@dataclass(frozen=True)
class EmbeddingMeta:
    """Contract of one embedding attribute."""

    dimension: int
    model: str
    index_kind: str = "HNSW"
    datatype: str = "FLOAT"
    metric: Metric = Metric.L2

    def __post_init__(self):
        if self.dimension <= 0:
            raise BadAttribute(f"dimension must be positive, got {self.dimension}")
        if self.index_kind not in INDEX_KINDS:
            raise BadAttribute(f"unknown index kind {self.index_kind!r}")
        if self.datatype not in EMBEDDING_DATATYPES:
            raise BadAttribute(f"unsupported embedding datatype {self.datatype!r}")
        if not isinstance(self.metric, Metric):
            object.__setattr__(self, "metric", Metric.parse(self.metric))

    def to_json(self) -> dict:
        return {
            "dimension": self.dimension,
            "model": self.model,
            "index_kind": self.index_kind,
            "datatype": self.datatype,
            "metric": self.metric.value,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "EmbeddingMeta":
        return cls(
            dimension=int(obj["dimension"]),
            model=str(obj["model"]),
            index_kind=str(obj["index_kind"]),
            datatype=str(obj["datatype"]),
            metric=Metric.parse(obj["metric"]),
        )


def check_compatibility(a: EmbeddingMeta, b: EmbeddingMeta) -> None:
    """Raise on the first field where the two contracts disagree.

    Check order is fixed: dimension, model, datatype, metric. index_kind is
    never compared; a FLAT attribute may be searched together with an HNSW
    one as long as the vectors mean the same thing.
    """
    if a.dimension != b.dimension:
        raise DimensionMismatch(f"dimension {a.dimension} vs {b.dimension}")
    if a.model != b.model:
        raise ModelMismatch(f"model {a.model!r} vs {b.model!r}")
    if a.datatype != b.datatype:
        raise DatatypeMismatch(f"datatype {a.datatype!r} vs {b.datatype!r}")
    if a.metric is not b.metric:
        raise MetricMismatch(f"metric {a.metric.value} vs {b.metric.value}")


def compatible(a: EmbeddingMeta, b: EmbeddingMeta) -> bool:
    try:
        check_compatibility(a, b)
    except (DimensionMismatch, ModelMismatch, DatatypeMismatch, MetricMismatch):
        return False
    return True


@dataclass
class VertexType:
    name: str
    primary_id: str
    attributes: dict[str, str] = field(default_factory=dict)  # name -> scalar type
    embeddings: dict[str, EmbeddingMeta] = field(default_factory=dict)

    def scalar_type_of(self, attr: str) -> str:
        if attr == self.primary_id:
            return self.attributes.get(attr, "STRING")
        try:
            return self.attributes[attr]
        except KeyError:
            raise UnknownAttribute(f"{self.name} has no attribute {attr!r}") from None

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "primary_id": self.primary_id,
            "attributes": dict(self.attributes),
            "embeddings": {k: v.to_json() for k, v in self.embeddings.items()},
        }

    @classmethod
    def from_json(cls, obj: dict) -> "VertexType":
        return cls(
            name=obj["name"],
            primary_id=obj["primary_id"],
            attributes=dict(obj["attributes"]),
            embeddings={k: EmbeddingMeta.from_json(v) for k, v in obj["embeddings"].items()},
        )


@dataclass
class EdgeType:
    name: str
    from_type: str
    to_type: str
    attributes: dict[str, str] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "from_type": self.from_type,
            "to_type": self.to_type,
            "attributes": dict(self.attributes),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "EdgeType":
        return cls(
            name=obj["name"],
            from_type=obj["from_type"],
            to_type=obj["to_type"],
            attributes=dict(obj["attributes"]),
        )


class Catalog:
    """All type definitions plus named embedding spaces.

    Every successful DDL call bumps `epoch`, so storage can notice that its
    cached layout decisions are stale.
    """

    def __init__(self):
        self.vertex_types: dict[str, VertexType] = {}
        self.edge_types: dict[str, EdgeType] = {}
        self.spaces: dict[str, EmbeddingMeta] = {}
        self.epoch = 0

    # --- DDL ---

    def define_vertex_type(self, name: str, primary_id: str,
                           attributes: dict[str, str] | None = None) -> VertexType:
        if name in self.vertex_types or name in self.edge_types:
            raise DuplicateType(f"type {name!r} already defined")
        attrs = dict(attributes or {})
        for attr, stype in attrs.items():
            if stype not in SCALAR_TYPES:
                raise BadAttribute(f"unknown scalar type {stype!r} for {name}.{attr}")
        attrs.setdefault(primary_id, "STRING")
        vt = VertexType(name=name, primary_id=primary_id, attributes=attrs)
        self.vertex_types[name] = vt
        self.epoch += 1
        return vt

    def define_edge_type(self, name: str, from_type: str, to_type: str,
                         attributes: dict[str, str] | None = None) -> EdgeType:
        if name in self.edge_types or name in self.vertex_types:
            raise DuplicateType(f"type {name!r} already defined")
        for t in (from_type, to_type):
            if t not in self.vertex_types:
                raise UnknownType(f"edge {name!r} references undefined vertex type {t!r}")
        attrs = dict(attributes or {})
        for attr, stype in attrs.items():
            if stype not in SCALAR_TYPES:
                raise BadAttribute(f"unknown scalar type {stype!r} for {name}.{attr}")
        et = EdgeType(name=name, from_type=from_type, to_type=to_type, attributes=attrs)
        self.edge_types[name] = et
        self.epoch += 1
        return et

    def create_embedding_space(self, name: str, meta: EmbeddingMeta) -> EmbeddingMeta:
        if name in self.spaces:
            raise DuplicateType(f"embedding space {name!r} already defined")
        self.spaces[name] = meta
        self.epoch += 1
        return meta

    def add_embedding_attribute(self, vertex_type: str, attr: str,
                                meta: EmbeddingMeta | None = None,
                                space: str | None = None) -> EmbeddingMeta:
        vt = self.get_vertex_type(vertex_type)
        if attr in vt.embeddings or attr in vt.attributes:
            raise DuplicateAttribute(f"{vertex_type}.{attr} already defined")
        if space is not None:
            if space not in self.spaces:
                raise UnknownSpace(f"embedding space {space!r} not defined")
            base = self.spaces[space]
            if meta is not None:
                check_compatibility(meta, base)
                # space pins semantics; per-attribute index kind may differ
                base = EmbeddingMeta(base.dimension, base.model, meta.index_kind,
                                     base.datatype, base.metric)
            meta = base
        if meta is None:
            raise BadAttribute("embedding attribute needs metadata or a space name")
        vt.embeddings[attr] = meta
        self.epoch += 1
        return meta

    # --- lookup ---

    def get_vertex_type(self, name: str) -> VertexType:
        try:
            return self.vertex_types[name]
        except KeyError:
            raise UnknownType(f"vertex type {name!r} not defined") from None

    def get_edge_type(self, name: str) -> EdgeType:
        try:
            return self.edge_types[name]
        except KeyError:
            raise UnknownType(f"edge type {name!r} not defined") from None

    def embedding_meta(self, vertex_type: str, attr: str) -> EmbeddingMeta:
        vt = self.get_vertex_type(vertex_type)
        try:
            return vt.embeddings[attr]
        except KeyError:
            raise UnknownAttribute(f"{vertex_type} has no embedding attribute {attr!r}") from None

    def check_search_targets(self, targets: list[tuple[str, str]]) -> EmbeddingMeta:
        """Validate a multi-attribute search target list; return the shared contract."""
        if not targets:
            raise BadAttribute("empty search target list")
        first = self.embedding_meta(*targets[0])
        for vt, attr in targets[1:]:
            check_compatibility(first, self.embedding_meta(vt, attr))
        return first

    # --- persistence ---

    def to_json(self) -> dict:
        return {
            "epoch": self.epoch,
            "vertex_types": {k: v.to_json() for k, v in self.vertex_types.items()},
            "edge_types": {k: v.to_json() for k, v in self.edge_types.items()},
            "spaces": {k: v.to_json() for k, v in self.spaces.items()},
        }

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True))

    @classmethod
    def from_json(cls, obj: dict) -> "Catalog":
        cat = cls()
        cat.epoch = int(obj.get("epoch", 0))
        cat.vertex_types = {k: VertexType.from_json(v) for k, v in obj["vertex_types"].items()}
        cat.edge_types = {k: EdgeType.from_json(v) for k, v in obj["edge_types"].items()}
        cat.spaces = {k: EmbeddingMeta.from_json(v) for k, v in obj["spaces"].items()}
        return cat

    @classmethod
    def load(cls, path: str | Path) -> "Catalog":
        return cls.from_json(json.loads(Path(path).read_text()))
