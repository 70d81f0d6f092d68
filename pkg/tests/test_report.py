"""Report math and output files, starting from a hand-checked example."""

import csv
import json

import numpy as np
import pytest

import oracle
from graphvector.report import (BenchReport, hybrid_breakdown_figure,
                                latency_summary, mean_recall, recall_at_k,
                                recall_qps_figure, update_crossover_figure,
                                write_reports_csv, write_reports_json,
                                write_rows_csv)

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def test_recall_on_hand_computed_five_vectors():
    # five points on a line: x = 0, 1, 2, 3, 4; query at x = 0.9
    # distances: id0 -> 0.9, id1 -> 0.1, id2 -> 1.1, id3 -> 2.1, id4 -> 3.1
    # true top-3 is therefore [1, 0, 2]
    base = [(i, np.array([i, 0.0], dtype=np.float32)) for i in range(5)]
    q = np.array([0.9, 0.0], dtype=np.float32)
    truth = [vid for vid, _ in oracle.topk(base, q, 3)]
    assert truth == [1, 0, 2]

    assert recall_at_k([1, 0, 2], truth, 3) == 1.0
    assert recall_at_k([2, 0, 1], truth, 3) == 1.0  # order must not matter
    assert recall_at_k([1, 2, 3], truth, 3) == pytest.approx(2 / 3)
    assert recall_at_k([3, 4], truth, 3) == 0.0
    # only the first k of each side count
    assert recall_at_k([1, 0, 2, 4, 3], truth, 3) == 1.0


def test_recall_validation():
    with pytest.raises(ValueError):
        recall_at_k([1], [1], 0)
    with pytest.raises(ValueError):
        mean_recall([[1]], [[1], [2]], 1)
    assert mean_recall([], [], 5) == 0.0


def test_mean_recall_averages():
    truth = [[1, 0, 2], [5, 6, 7]]
    got = [[1, 0, 2], [5, 9, 9]]
    assert mean_recall(got, truth, 3) == pytest.approx((1.0 + 1 / 3) / 2)


def test_latency_summary_hand_values():
    out = latency_summary([3.0, 1.0, 100.0, 2.0, 4.0])
    assert out["mean_ms"] == pytest.approx(22.0)
    assert out["p50_ms"] == pytest.approx(3.0)
    # linear interpolation between the 4th and 5th sorted values
    assert out["p99_ms"] == pytest.approx(4 + 0.96 * 96)
    assert latency_summary([]) == {"mean_ms": 0.0, "p50_ms": 0.0, "p99_ms": 0.0}


def sample_reports():
    return [BenchReport(suite="recall", k=10, ef=ef, queries=100,
                        recall=r, qps=qps, mean_ms=1.0, p50_ms=0.9,
                        p99_ms=2.0, build_seconds=3.5,
                        vector_search_ms=0.8, extra={"note": "x"})
            for ef, r, qps in ((16, 0.71, 9000.0), (64, 0.93, 4000.0),
                               (256, 0.995, 1200.0))]


def test_report_row_matches_fields():
    rep = sample_reports()[0]
    row = rep.row()
    assert len(row) == len(BenchReport.FIELDS)
    assert row[BenchReport.FIELDS.index("recall")] == 0.71
    js = rep.to_json()
    assert js["extra"] == {"note": "x"}
    assert "extra" not in BenchReport.FIELDS


def test_csv_and_json_writers(tmp_path):
    reports = sample_reports()
    write_reports_csv(reports, tmp_path / "r.csv")
    with open(tmp_path / "r.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == list(BenchReport.FIELDS)
    assert len(rows) == 4
    assert float(rows[2][rows[0].index("qps")]) == 4000.0

    write_reports_json(reports, tmp_path / "r.json")
    back = json.loads((tmp_path / "r.json").read_text())
    assert [b["ef"] for b in back] == [16, 64, 256]
    assert back[1]["recall"] == 0.93

    write_rows_csv(tmp_path / "rows.csv", ["a", "b"], [[1, 2], [3, 4]])
    with open(tmp_path / "rows.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows == [["a", "b"], ["1", "2"], ["3", "4"]]


def _assert_png(path):
    assert path.exists()
    data = path.read_bytes()
    assert data[:8] == PNG_MAGIC
    assert len(data) > 1000


def test_recall_qps_figure(tmp_path):
    out = tmp_path / "recall_qps.png"
    recall_qps_figure(sample_reports(), out)
    _assert_png(out)


def test_update_crossover_figure(tmp_path):
    points = [{"fraction": f, "incremental_seconds": f * 2.0,
               "rebuild_seconds": 0.9} for f in (0.0, 0.1, 0.4, 1.0)]
    out = tmp_path / "crossover.png"
    update_crossover_figure(points, out)
    _assert_png(out)


def test_hybrid_breakdown_figure(tmp_path):
    rows = [{"name": "2-hop", "vector_search_ms": 0.4, "end_to_end_ms": 3.0},
            {"name": "3-hop", "vector_search_ms": 0.5, "end_to_end_ms": 7.0}]
    out = tmp_path / "hybrid.png"
    hybrid_breakdown_figure(rows, out)
    _assert_png(out)