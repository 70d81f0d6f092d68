"""Exception hierarchy for the engine.

Everything raised on purpose derives from GraphVectorError so callers can
catch engine failures without swallowing programming errors.
"""

from __future__ import annotations


class GraphVectorError(Exception):
    """Base class for all engine errors."""


# --- catalog / schema ---

class DuplicateType(GraphVectorError):
    pass


class BadAttribute(GraphVectorError):
    pass


class UnknownType(GraphVectorError):
    pass


class UnknownEdgeType(GraphVectorError):
    pass


class UnknownVertexType(GraphVectorError):
    pass


class DuplicateAttribute(GraphVectorError):
    pass


class UnknownSpace(GraphVectorError):
    pass


class UnknownAttribute(GraphVectorError):
    pass


class SemanticError(GraphVectorError):
    """Static analysis rejected the query or schema operation."""


class DimensionMismatch(SemanticError):
    pass


class ModelMismatch(SemanticError):
    pass


class DatatypeMismatch(SemanticError):
    pass


class MetricMismatch(SemanticError):
    pass


# --- storage / transactions ---

class ValidationError(GraphVectorError):
    pass


class ConflictError(GraphVectorError):
    """Write-write conflict under the single-writer-per-vertex rule."""


class PredicateTypeError(GraphVectorError, TypeError):
    """Predicate references a missing attribute or compares across types."""


class GapError(GraphVectorError):
    """Delta files are not contiguous with the current index snapshot."""


# --- query language ---

class GvqlSyntaxError(GraphVectorError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{message} (line {line}, col {col})")
        self.line = line
        self.col = col


# --- distributed execution / wire protocol ---

class DecodeError(GraphVectorError):
    pass


class WorkerTimeout(GraphVectorError):
    """A worker failed to answer in time; the query fails without a partial result."""


class WorkerError(GraphVectorError):
    """A worker answered, but with a failure instead of results."""


class WorkerConnectionError(GraphVectorError, ConnectionError):
    pass


# --- loaders ---

class FormatError(GraphVectorError):
    def __init__(self, message: str, record_index: int | None = None):
        if record_index is not None:
            message = f"{message} (record {record_index})"
        super().__init__(message)
        self.record_index = record_index
