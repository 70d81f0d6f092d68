import numpy as np
import pytest

import oracle
from graphvector.cli import _batched_ingest, _build_indexes, _item_db
from graphvector.datasets import SynthSpec, synth_corpus


@pytest.fixture(scope="session")
def sift10k():
    """10,000 x 128 clustered float32 corpus plus 100 queries (seed 42)."""
    return synth_corpus(SynthSpec())


@pytest.fixture(scope="session")
def sift10k_truth(sift10k):
    """Exact top-10 ids and distances per query, from the test-side oracle."""
    base, queries = sift10k
    return oracle.topk_batch(base, queries, 10)


@pytest.fixture(scope="session")
def sift10k_db(sift10k):
    """The corpus loaded as Item vertices with merged navigable-graph
    indexes; vertex i carries bucket = i % 10 for selectivity predicates."""
    base, _ = sift10k
    db = _item_db(128)
    _batched_ingest(db, "Item", "emb", base)
    _build_indexes(db, "Item", "emb", threads=4)
    yield db
    db.close()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
