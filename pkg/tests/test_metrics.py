"""Distance kernels against the scalar reference implementations."""

import numpy as np
import pytest

import oracle
from graphvector.metrics import Metric, distance, distance_many, normalize, pairwise


def test_l2_is_true_euclidean():
    a = np.array([0.0, 3.0], dtype=np.float32)
    b = np.array([4.0, 0.0], dtype=np.float32)
    assert distance(Metric.L2, a, b) == pytest.approx(5.0)


def test_l2_identity_is_zero():
    v = np.array([1.5, -2.5, 0.25], dtype=np.float32)
    assert distance(Metric.L2, v, v) == 0.0


def test_cosine_of_unit_vectors():
    a = normalize(np.array([1.0, 0.0], dtype=np.float32))
    b = normalize(np.array([0.0, 1.0], dtype=np.float32))
    assert distance(Metric.COSINE, a, b) == pytest.approx(1.0)
    assert distance(Metric.COSINE, a, a) == pytest.approx(0.0, abs=1e-7)


def test_inner_product_negated():
    a = np.array([2.0, 1.0], dtype=np.float32)
    b = np.array([3.0, -1.0], dtype=np.float32)
    assert distance(Metric.INNER_PRODUCT, a, b) == pytest.approx(-5.0)


def test_normalize_rejects_zero_vector():
    with pytest.raises(ValueError):
        normalize(np.zeros(4, dtype=np.float32))


def test_normalize_batch_rows_are_unit():
    rng = np.random.default_rng(3)
    rows = normalize(rng.standard_normal((8, 6)).astype(np.float32))
    assert np.allclose(np.linalg.norm(rows, axis=1), 1.0, atol=1e-6)


def test_parse_metric_names():
    assert Metric.parse(" l2 ") is Metric.L2
    assert Metric.parse("cosine") is Metric.COSINE
    with pytest.raises(ValueError):
        Metric.parse("manhattan")


@pytest.mark.parametrize("metric,fn", [
    (Metric.L2, oracle.dist_l2),
    (Metric.COSINE, oracle.dist_cosine),
    (Metric.INNER_PRODUCT, oracle.dist_ip),
])
def test_distance_matches_scalar_reference(metric, fn, rng):
    for _ in range(50):
        dim = int(rng.integers(1, 24))
        a = rng.standard_normal(dim).astype(np.float32)
        b = rng.standard_normal(dim).astype(np.float32)
        if metric is Metric.COSINE:
            a, b = normalize(a), normalize(b)
        assert distance(metric, a, b) == pytest.approx(fn(a, b), rel=1e-6, abs=1e-6)


def test_distance_many_matches_singles(rng):
    base = rng.standard_normal((40, 9)).astype(np.float32)
    q = rng.standard_normal(9).astype(np.float32)
    for metric in Metric:
        many = distance_many(metric, q, base)
        singles = [distance(metric, q, row) for row in base]
        assert np.allclose(many, singles, rtol=1e-9, atol=1e-9)


def test_pairwise_matches_distance_many(rng):
    base = rng.standard_normal((25, 7)).astype(np.float32)
    qs = rng.standard_normal((6, 7)).astype(np.float32)
    for metric in Metric:
        mat = pairwise(metric, qs, base)
        assert mat.shape == (6, 25)
        for i in range(6):
            assert np.allclose(mat[i], distance_many(metric, qs[i], base),
                               rtol=1e-9, atol=1e-9)


def test_pairwise_empty_base(rng):
    qs = rng.standard_normal((3, 5)).astype(np.float32)
    assert pairwise(Metric.L2, qs, np.zeros((0, 5), np.float32)).shape == (3, 0)
