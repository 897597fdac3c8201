"""Desk-scale scaling comparison: granular-ball preprocessing vs brute kNN.

The kNN baseline is exact brute-force Euclidean, computed in row tiles so
the resident working set stays bounded while the logical cost is still the
full n x n similarity matrix.  Memory is accounted analytically (working-set
bytes of each method), not sampled from the OS, so reports are deterministic.
"""

from __future__ import annotations

import json
import math
import statistics
import time
from dataclasses import dataclass, field

import numpy as np

from .augment import build_anchors, build_augment
from .bundle import SyntheticSpec, generate_synthetic
from .errors import SpecError
from .gbc import GBCConfig, build

KNN_TILE_ROWS = 512
# argpartition margin for boundary ties; rows with more ties fall back to a
# full stable sort
_TIE_MARGIN = 64


@dataclass(frozen=True)
class BenchSpec:
    sizes: tuple
    d: int = 32
    c: int = 3
    k_for_knn: int = 5
    repeats: int = 3
    seed: int = 0
    timeout_seconds: float = 600.0

    def __post_init__(self):
        sizes = tuple(self.sizes)
        object.__setattr__(self, "sizes", sizes)
        if len(sizes) < 1 or list(sizes) != sorted(set(sizes)):
            raise SpecError("sizes must be strictly ascending")
        if self.repeats < 3:
            raise SpecError("need at least 3 repeats")
        if self.k_for_knn < 1 or self.d < 1 or self.c < 2:
            raise SpecError("bad bench dimensions")


@dataclass
class BenchReport:
    spec: dict
    rows: list = field(default_factory=list)      # per-run measurements
    medians: dict = field(default_factory=dict)   # (method, n) -> seconds
    slopes: dict = field(default_factory=dict)    # method -> log-log slope
    resident: dict = field(default_factory=dict)  # (method, n) -> bytes
    timeouts: list = field(default_factory=list)  # (method, n) pairs


def _pairwise_sq_to_all(tile, X, x_norms):
    t_norms = np.einsum("ij,ij->i", tile, tile)
    d2 = t_norms[:, None] + x_norms[None, :] - 2.0 * (tile @ X.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def _topk_tile(d2, k, row_offset):
    """Per-row k smallest by (distance, index), excluding self."""
    rows, n = d2.shape
    d2[np.arange(rows), row_offset + np.arange(rows)] = np.inf
    kk = min(n, k + 1 + _TIE_MARGIN)
    if kk >= n:
        order = np.lexsort((np.broadcast_to(np.arange(n), d2.shape), d2),
                           axis=-1)
        return order[:, :k]
    part = np.argpartition(d2, kth=kk - 1, axis=1)[:, :kk]
    pd = np.take_along_axis(d2, part, axis=1)
    order = np.lexsort((part, pd), axis=-1)
    cand = np.take_along_axis(part, order, axis=1)
    cd = np.take_along_axis(pd, order, axis=1)
    out = cand[:, :k].copy()
    # a tie that straddles the margin needs the full row ordering
    risky = np.nonzero(cd[:, k - 1] >= cd[:, kk - 1])[0]
    for r in risky:
        full = np.lexsort((np.arange(n), d2[r]))
        out[r] = full[:k]
    return out


def knn_graph(features, k):
    """Exact brute-force Euclidean kNN as directed (source, neighbor) pairs,
    neighbors ordered by (distance, index)."""
    X = np.asarray(features, dtype=np.float64)
    n = len(X)
    if not 1 <= k < n:
        raise SpecError("need 1 <= k < n")
    x_norms = np.einsum("ij,ij->i", X, X)
    neigh = np.empty((n, k), dtype=np.int64)
    for start in range(0, n, KNN_TILE_ROWS):
        stop = min(start + KNN_TILE_ROWS, n)
        d2 = _pairwise_sq_to_all(X[start:stop], X, x_norms)
        neigh[start:stop] = _topk_tile(d2, k, start)
    src = np.repeat(np.arange(n, dtype=np.int64), k)
    return np.column_stack([src, neigh.ravel()])


def knn_working_set_bytes(n, d, k):
    """Analytic resident bytes: one distance tile + candidate buffers +
    the output edge array."""
    rows = min(KNN_TILE_ROWS, n)
    kk = min(n, k + 1 + _TIE_MARGIN)
    return rows * n * 8 + 2 * rows * kk * 8 + n * k * 16


def knn_logical_bytes(n):
    """Full n x n float32 similarity matrix the brute-force method stands
    for."""
    return n * n * 4


def gbc_working_set_bytes(model, aug):
    peak = int(model.build_stats["peak_workset_bytes"])
    extra = sum(a.feature.nbytes for a in aug.anchors)
    extra += aug.projection_edges.nbytes + aug.bridging_edges.nbytes
    return peak + extra


def _time_gbc(bundle):
    t0 = time.perf_counter()
    model = build(bundle, GBCConfig())
    anchors = build_anchors(model, bundle)
    aug = build_augment(model, bundle, anchors)
    return time.perf_counter() - t0, gbc_working_set_bytes(model, aug)


def _time_knn(bundle, k):
    t0 = time.perf_counter()
    knn_graph(bundle.features, k)
    elapsed = time.perf_counter() - t0
    return elapsed, knn_working_set_bytes(bundle.num_nodes,
                                          bundle.feature_dim, k)


def _fit_slope(points):
    if len(points) < 3:
        return None
    xs = np.log([p[0] for p in points])
    ys = np.log([max(p[1], 1e-9) for p in points])
    return float(np.polyfit(xs, ys, 1)[0])


def run_bench(spec: BenchSpec) -> BenchReport:
    report = BenchReport(spec={
        "sizes": list(spec.sizes), "d": spec.d, "c": spec.c,
        "k_for_knn": spec.k_for_knn, "repeats": spec.repeats,
        "seed": spec.seed, "metric": "euclidean",
        "timeout_seconds": spec.timeout_seconds,
    })
    methods = {"gbc": _time_gbc, "knn": lambda b: _time_knn(b, spec.k_for_knn)}
    dead = set()
    for n in spec.sizes:
        bundle = generate_synthetic(SyntheticSpec(
            n=n, d=spec.d, c=spec.c, seed=spec.seed))
        for method, kernel in methods.items():
            if method in dead:
                report.timeouts.append([method, n])
                continue
            kernel(bundle)   # warm-up, discarded
            times = []
            resident = 0
            timed_out = False
            for run in range(spec.repeats):
                seconds, resident = kernel(bundle)
                times.append(seconds)
                report.rows.append({
                    "method": method, "n": n, "d": spec.d, "run": run,
                    "seconds": seconds, "resident_bytes": resident,
                    "logical_bytes": knn_logical_bytes(n)
                    if method == "knn" else resident,
                })
                if seconds > spec.timeout_seconds:
                    timed_out = True
                    break
            if timed_out:
                report.timeouts.append([method, n])
                dead.add(method)    # larger sizes would only be slower
                continue
            report.medians[(method, n)] = statistics.median(times)
            report.resident[(method, n)] = resident
    for method in methods:
        pts = [(n, report.medians[(method, n)]) for n in spec.sizes
               if (method, n) in report.medians]
        report.slopes[method] = _fit_slope(pts)
    return report


def report_csv(report: BenchReport) -> str:
    lines = ["method,n,d,run,seconds,resident_bytes,logical_bytes"]
    for r in report.rows:
        lines.append(f"{r['method']},{r['n']},{r['d']},{r['run']},"
                     f"{r['seconds']!r},{r['resident_bytes']},"
                     f"{r['logical_bytes']}")
    return "\n".join(lines) + "\n"


def slopes_json(report: BenchReport) -> str:
    payload = {
        "spec": report.spec,
        "slopes": report.slopes,
        "medians": {f"{m}@{n}": s for (m, n), s in report.medians.items()},
        "resident": {f"{m}@{n}": b for (m, n), b in report.resident.items()},
        "timeouts": report.timeouts,
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"


def memory_ratio(report: BenchReport, method, n_large, n_small):
    big = report.resident.get((method, n_large))
    small = report.resident.get((method, n_small))
    if big is None or small is None or small == 0:
        return math.inf
    return big / small
