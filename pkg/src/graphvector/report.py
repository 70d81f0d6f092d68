"""Benchmark reports: recall/QPS/latency tables, CSV/JSON output, figures.

Figures render through the Agg backend straight to PNG files next to the
delimited output, so a bench run leaves both machine-readable rows and
something a human can look at.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np


def recall_at_k(returned_ids, truth_ids, k: int) -> float:
    """|returned ∩ truth| / k for one query."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return len(set(returned_ids[:k]) & set(truth_ids[:k])) / k


def mean_recall(all_returned, all_truth, k: int) -> float:
    if len(all_returned) != len(all_truth):
        raise ValueError("returned and truth lists differ in length")
    if not all_returned:
        return 0.0
    return float(np.mean([recall_at_k(r, t, k)
                          for r, t in zip(all_returned, all_truth)]))


def latency_summary(latencies_ms) -> dict:
    arr = np.asarray(sorted(latencies_ms), dtype=np.float64)
    if arr.size == 0:
        return {"mean_ms": 0.0, "p50_ms": 0.0, "p99_ms": 0.0}
    return {
        "mean_ms": float(arr.mean()),
        "p50_ms": float(np.percentile(arr, 50)),
        "p99_ms": float(np.percentile(arr, 99)),
    }


@dataclass
class BenchReport:
    """One measured configuration of one suite."""

    suite: str
    k: int
    ef: int
    queries: int
    recall: float
    qps: float
    mean_ms: float
    p50_ms: float
    p99_ms: float
    build_seconds: float = 0.0
    load_seconds: float = 0.0
    vector_search_ms: float = 0.0  # mean per query
    extra: dict = field(default_factory=dict)

    FIELDS = ("suite", "k", "ef", "queries", "recall", "qps", "mean_ms",
              "p50_ms", "p99_ms", "build_seconds", "load_seconds",
              "vector_search_ms")

    def row(self) -> list:
        return [getattr(self, f) for f in self.FIELDS]

    def to_json(self) -> dict:
        return asdict(self)


def write_reports_csv(reports: list[BenchReport], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(BenchReport.FIELDS)
        for r in reports:
            w.writerow(r.row())


def write_reports_json(reports: list[BenchReport], path) -> None:
    Path(path).write_text(
        json.dumps([r.to_json() for r in reports], indent=2) + "\n")


def write_rows_csv(path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


# --- figures --------------------------------------------------------------

def _plt():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def recall_qps_figure(reports: list[BenchReport], path) -> None:
    """Recall-vs-QPS tradeoff curve, one point per ef."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 4))
    pts = sorted(reports, key=lambda r: r.ef)
    ax.plot([r.recall for r in pts], [r.qps for r in pts], "o-")
    for r in pts:
        ax.annotate(f"ef={r.ef}", (r.recall, r.qps), fontsize=8,
                    xytext=(4, 4), textcoords="offset points")
    ax.set_xlabel(f"recall@{pts[0].k if pts else 10}")
    ax.set_ylabel("queries per second")
    ax.set_title("recall / throughput tradeoff")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def update_crossover_figure(points: list[dict], path) -> None:
    """Incremental-update seconds vs fraction, with the rebuild line."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 4))
    xs = [p["fraction"] for p in points]
    ax.plot(xs, [p["incremental_seconds"] for p in points], "o-",
            label="incremental update")
    ax.plot(xs, [p["rebuild_seconds"] for p in points], "s--",
            label="full rebuild")
    ax.set_xlabel("fraction of vectors updated")
    ax.set_ylabel("seconds")
    ax.set_title("index maintenance cost")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def hybrid_breakdown_figure(rows: list[dict], path) -> None:
    """Stacked per-query time: vector search vs the rest."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 4))
    labels = [r["name"] for r in rows]
    vec = np.array([r["vector_search_ms"] for r in rows])
    total = np.array([r["end_to_end_ms"] for r in rows])
    other = np.clip(total - vec, 0, None)
    x = np.arange(len(rows))
    ax.bar(x, vec, label="vector search")
    ax.bar(x, other, bottom=vec, label="graph traversal + filter")
    ax.set_xticks(x, labels, rotation=20, ha="right")
    ax.set_ylabel("milliseconds per query")
    ax.set_title("hybrid query time breakdown")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
