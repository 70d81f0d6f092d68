"""An embeddable property-graph store with first-class vector search.

Vectors live beside graph data as embedding attributes on vertex types;
each storage segment carries its own delta stream and index snapshot, so
updates land as MVCC records and background merges fold them in. Queries
combine graph pattern matching with filtered top-k and range search over
any mix of compatible embedding attributes, locally or across partitions.
"""

from .errors import GraphVectorError
from .metrics import Metric
from .predicates import Cmp, Predicate, TruePred
from .query import (DistanceMap, PathEdge, PathVertex, SearchResult,
                    VertexSet, filtered_topk, pattern_filtered_topk,
                    pattern_match, range_query, search_ranked,
                    similarity_join, vector_search)
from .schema import Catalog, EmbeddingMeta, check_compatibility
from .storage import Database, Transaction

__version__ = "0.1.0"

__all__ = [
    "Catalog", "Cmp", "Database", "DistanceMap", "EmbeddingMeta",
    "GraphVectorError", "Metric", "PathEdge", "PathVertex", "Predicate",
    "SearchResult", "Transaction", "TruePred", "VertexSet",
    "check_compatibility", "filtered_topk", "pattern_filtered_topk",
    "pattern_match", "range_query", "search_ranked", "similarity_join",
    "vector_search", "__version__",
]
