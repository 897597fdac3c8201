import json

import numpy as np
import pytest

from gbgnn.bench import (
    BenchSpec,
    knn_graph,
    knn_logical_bytes,
    memory_ratio,
    report_csv,
    run_bench,
    slopes_json,
)
from gbgnn.errors import SpecError


def naive_knn(X, k):
    """Loop-based reference with the same (distance, index) tie rule."""
    X = np.asarray(X, dtype=np.float64)
    n = len(X)
    out = []
    for i in range(n):
        cand = []
        for j in range(n):
            if j != i:
                cand.append((float(np.sum((X[i] - X[j]) ** 2)), j))
        cand.sort()
        out.extend((i, j) for _, j in cand[:k])
    return np.array(out, dtype=np.int64)


def test_collinear_points():
    X = np.array([[0.0], [1.0], [3.0]])
    edges = knn_graph(X, 1)
    assert edges.tolist() == [[0, 1], [1, 0], [2, 1]]


def test_matches_naive_reference():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((200, 5))
    got = knn_graph(X, 7)
    want = naive_knn(X, 7)
    assert np.array_equal(got, want)


def test_complete_graph():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((12, 3))
    edges = knn_graph(X, 11)
    assert len(edges) == 12 * 11
    for i in range(12):
        neigh = set(edges[edges[:, 0] == i][:, 1].tolist())
        assert neigh == set(range(12)) - {i}


def test_duplicate_points_tie_break_by_index():
    X = np.zeros((6, 2))
    edges = knn_graph(X, 2)
    for i in range(6):
        neigh = edges[edges[:, 0] == i][:, 1].tolist()
        want = [j for j in range(6) if j != i][:2]
        assert neigh == want


def test_mass_ties_hit_fallback_path():
    # 300 identical points force the tie region past the partition margin
    X = np.ones((300, 3))
    edges = knn_graph(X, 3)
    for i in (0, 150, 299):
        neigh = edges[edges[:, 0] == i][:, 1].tolist()
        assert neigh == [j for j in range(300) if j != i][:3]


def test_k_bounds():
    X = np.zeros((5, 2))
    with pytest.raises(SpecError):
        knn_graph(X, 0)
    with pytest.raises(SpecError):
        knn_graph(X, 5)


def test_logical_bytes_definition():
    assert knn_logical_bytes(32000) == 32000 * 32000 * 4
    assert knn_logical_bytes(200) == 160000


def test_spec_validation():
    with pytest.raises(SpecError):
        BenchSpec(sizes=(100, 50), repeats=3)
    with pytest.raises(SpecError):
        BenchSpec(sizes=(50, 100), repeats=2)
    with pytest.raises(SpecError):
        BenchSpec(sizes=(50, 100), repeats=3, c=1)


def test_run_bench_small():
    spec = BenchSpec(sizes=(80, 120, 180), d=6, c=3, k_for_knn=3, repeats=3,
                     seed=1)
    report = run_bench(spec)
    assert len(report.rows) == 2 * 3 * 3
    assert set(report.slopes) == {"gbc", "knn"}
    for method in ("gbc", "knn"):
        assert report.slopes[method] is not None
        for n in spec.sizes:
            assert (method, n) in report.medians
            assert report.medians[(method, n)] > 0
    knn_rows = [r for r in report.rows if r["method"] == "knn"]
    for r in knn_rows:
        assert r["logical_bytes"] == knn_logical_bytes(r["n"])
    assert memory_ratio(report, "gbc", 180, 80) < 50
    csv_text = report_csv(report)
    assert csv_text.splitlines()[0] == \
        "method,n,d,run,seconds,resident_bytes,logical_bytes"
    assert len(csv_text.strip().splitlines()) == 1 + len(report.rows)
    payload = json.loads(slopes_json(report))
    assert payload["slopes"]["knn"] == report.slopes["knn"]
    assert payload["timeouts"] == []


def test_run_bench_timeout_budget():
    spec = BenchSpec(sizes=(80, 120, 180), d=4, c=2, k_for_knn=2, repeats=3,
                     seed=0, timeout_seconds=0.0)
    report = run_bench(spec)
    assert report.slopes["gbc"] is None and report.slopes["knn"] is None
    assert ["gbc", 80] in report.timeouts
    assert ["gbc", 180] in report.timeouts   # dead methods skip larger sizes
    assert report.medians == {}
