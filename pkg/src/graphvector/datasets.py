"""Dataset utilities: fvecs/bvecs files, synthetic corpora, ground truth.

The synthetic corpus is a seeded mixture of Gaussian clusters, shaped so
that approximate search is neither trivial nor hopeless at desk scale.
Ground truth always comes from an exact numpy scan, independent of any
index implementation.
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError
from .metrics import Metric, pairwise

__all__ = ["read_fvecs", "write_fvecs", "read_bvecs", "write_bvecs",
           "synth_corpus", "ground_truth", "SynthSpec"]


def read_fvecs(path: str | Path, max_rows: int | None = None) -> np.ndarray:
    """Read float vectors stored as repeated (i32 dim, f32[dim]) rows."""
    raw = np.fromfile(path, dtype="<i4")
    if raw.size == 0:
        return np.zeros((0, 0), dtype=np.float32)
    dim = int(raw[0])
    if dim <= 0:
        raise FormatError(f"{path}: bad leading dimension {dim}")
    row = dim + 1
    if raw.size % row != 0:
        raise FormatError(f"{path}: size {raw.size} not a multiple of row width {row}")
    mat = raw.reshape(-1, row)
    if not np.all(mat[:, 0] == dim):
        bad = int(np.nonzero(mat[:, 0] != dim)[0][0])
        raise FormatError(f"{path}: inconsistent dimension", record_index=bad)
    out = mat[:, 1:].view("<f4")
    if max_rows is not None:
        out = out[:max_rows]
    return np.ascontiguousarray(out, dtype=np.float32)


def write_fvecs(path: str | Path, vectors: np.ndarray) -> None:
    vectors = np.ascontiguousarray(vectors, dtype="<f4")
    n, dim = vectors.shape
    out = np.empty((n, dim + 1), dtype="<i4")
    out[:, 0] = dim
    out[:, 1:] = vectors.view("<i4")
    out.tofile(path)


def read_bvecs(path: str | Path, max_rows: int | None = None) -> np.ndarray:
    """Read byte vectors stored as repeated (i32 dim, u8[dim]) rows."""
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size == 0:
        return np.zeros((0, 0), dtype=np.float32)
    dim = int(np.frombuffer(raw[:4].tobytes(), dtype="<i4")[0])
    if dim <= 0:
        raise FormatError(f"{path}: bad leading dimension {dim}")
    row = dim + 4
    if raw.size % row != 0:
        raise FormatError(f"{path}: size {raw.size} not a multiple of row width {row}")
    mat = raw.reshape(-1, row)
    dims = mat[:, :4].copy().view("<i4").ravel()
    if not np.all(dims == dim):
        bad = int(np.nonzero(dims != dim)[0][0])
        raise FormatError(f"{path}: inconsistent dimension", record_index=bad)
    out = mat[:, 4:].astype(np.float32)
    if max_rows is not None:
        out = out[:max_rows]
    return np.ascontiguousarray(out)


def write_bvecs(path: str | Path, vectors: np.ndarray) -> None:
    vectors = np.asarray(vectors)
    if vectors.min() < 0 or vectors.max() > 255:
        raise FormatError("bvecs values must fit in a byte")
    n, dim = vectors.shape
    out = np.empty((n, dim + 4), dtype=np.uint8)
    out[:, :4] = np.frombuffer(np.int32(dim).tobytes(), dtype=np.uint8)
    out[:, 4:] = vectors.astype(np.uint8)
    out.tofile(path)


@dataclass(frozen=True)
class SynthSpec:
    n: int = 10000
    dim: int = 128
    n_queries: int = 100
    centers: int = 32
    spread: float = 4.5
    noise: float = 10.0
    seed: int = 42


def synth_corpus(spec: SynthSpec = SynthSpec()) -> tuple[np.ndarray, np.ndarray]:
    """Seeded clustered corpus; returns (base, queries) float32 arrays."""
    rng = np.random.default_rng(spec.seed)
    centers = rng.standard_normal((spec.centers, spec.dim)) * spec.spread
    assign = rng.integers(0, spec.centers, size=spec.n)
    base = (centers[assign] + rng.standard_normal((spec.n, spec.dim)) * spec.noise)
    qa = rng.integers(0, spec.centers, size=spec.n_queries)
    queries = (centers[qa] + rng.standard_normal((spec.n_queries, spec.dim)) * spec.noise)
    return base.astype(np.float32), queries.astype(np.float32)


def ground_truth(base: np.ndarray, queries: np.ndarray, k: int,
                 metric: Metric = Metric.L2,
                 chunk: int = 512) -> tuple[np.ndarray, np.ndarray]:
    """Exact top-k per query by full scan; returns (ids, distances) arrays.

    Ties on distance resolve to the lower id, matching the engine's rule.
    """
    nq = queries.shape[0]
    ids = np.zeros((nq, k), dtype=np.int64)
    dists = np.zeros((nq, k), dtype=np.float64)
    for lo in range(0, nq, chunk):
        qs = queries[lo:lo + chunk]
        d = pairwise(metric, qs, base)
        for i in range(d.shape[0]):
            order = np.lexsort((np.arange(base.shape[0]), d[i]))[:k]
            ids[lo + i] = order
            dists[lo + i] = d[i][order]
    return ids, dists


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(
        prog="python -m graphvector.datasets",
        description="Generate a synthetic clustered corpus as fvecs files.")
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--n", type=int, default=10000)
    ap.add_argument("--dim", type=int, default=128)
    ap.add_argument("--queries", type=int, default=100)
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    base, queries = synth_corpus(SynthSpec(n=args.n, dim=args.dim,
                                           n_queries=args.queries, seed=args.seed))
    write_fvecs(out / "base.fvecs", base)
    write_fvecs(out / "query.fvecs", queries)
    print(f"wrote {base.shape[0]} base and {queries.shape[0]} query vectors "
          f"(dim {args.dim}) to {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
