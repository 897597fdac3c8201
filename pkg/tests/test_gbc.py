import math

import numpy as np
import pytest

from gbgnn.bundle import SyntheticSpec, generate_synthetic, make_bundle
from gbgnn.errors import EngineError, SpecError
from gbgnn.gbc import (
    CHAOS,
    DEFINITE,
    GBCConfig,
    build,
    build_from_arrays,
    majority_label,
    model_from_json,
    model_to_json,
    predict,
    purity,
)


def blob_features(rng, centers, per_blob, spread=0.3):
    parts = [c + spread * rng.standard_normal((per_blob, len(c)))
             for c in centers]
    return np.vstack(parts).astype(np.float64)


# --- purity / majority label -------------------------------------------------

def test_purity_three_quarters():
    labels = np.array([0, 0, 0, 1])
    assert purity([0, 1, 2, 3], labels) == 0.75


def test_purity_without_labels_is_one():
    labels = np.array([-1, -1, -1])
    assert purity([0, 1, 2], labels) == 1.0


def test_purity_all_members_denominator():
    # 2 labeled A among 10 members -> 2/10
    labels = np.array([0, 0] + [-1] * 8)
    assert purity(np.arange(10), labels, "all_members") == pytest.approx(0.2)


def test_purity_empty_set_rejected():
    with pytest.raises(EngineError):
        purity([], np.array([0]))


def test_majority_label_simple_and_absent():
    assert majority_label([0, 1, 2], np.array([0, 0, 1])) == 0
    assert majority_label([0, 1], np.array([-1, -1])) is None


def test_majority_label_tie_breaks_to_smaller_class():
    # exhaustive over every 2-node labeling
    for a in range(3):
        for b in range(3):
            got = majority_label([0, 1], np.array([a, b]))
            expected = min(a, b) if a != b else a
            assert got == expected, (a, b)


# --- reference k-means oracle (independent, loop-based) ----------------------

def reference_kmeans(X, k, max_iters=50, tol=1e-4):
    """Plain-python Lloyd iteration following the same stated rules:
    farthest-point seeding from the first (smallest-id) row, nearest-center
    ties to the smaller index, empty clusters steal the farthest point of
    the largest cluster.
    """
    m = len(X)
    centers = [X[0].copy()]
    for _ in range(1, k):
        best_i, best_d = 0, -1.0
        for i in range(m):
            d = min(float(np.sum((X[i] - c) ** 2)) for c in centers)
            if d > best_d:
                best_i, best_d = i, d
        centers.append(X[best_i].copy())

    assign = [0] * m
    for _ in range(max_iters):
        dist = [[float(np.sum((X[i] - centers[j]) ** 2)) for j in range(k)]
                for i in range(m)]
        assign = [min(range(k), key=lambda j: (dist[i][j], j))
                  for i in range(m)]
        counts = [assign.count(j) for j in range(k)]
        for j in range(k):
            if counts[j] == 0:
                donor = max(range(k), key=lambda q: (counts[q], -q))
                donors = [i for i in range(m) if assign[i] == donor]
                far = max(donors, key=lambda i: (dist[i][donor], -i))
                assign[far] = j
                counts[donor] -= 1
                counts[j] += 1
        new_centers = [np.mean([X[i] for i in range(m) if assign[i] == j],
                               axis=0) for j in range(k)]
        shift = max(float(np.linalg.norm(new_centers[j] - centers[j]))
                    for j in range(k))
        centers = new_centers
        if shift < tol:
            break
    return assign


def test_phase1_split_matches_reference_kmeans():
    rng = np.random.default_rng(5)
    for trial in range(6):
        n_half = int(rng.integers(6, 32))
        X = blob_features(rng, [np.array([0.0, 0.0]), np.array([5.0, 5.0])],
                          n_half, spread=0.8)
        labels = np.full(2 * n_half, -1, dtype=np.int64)
        labels[0] = 0
        labels[n_half] = 1
        # large fixed limit isolates the purity phase
        cfg = GBCConfig(size_limit_mode=10_000)
        model = build_from_arrays(X, labels, cfg)
        ref = reference_kmeans(X, 2, cfg.kmeans_max_iters, cfg.kmeans_tol)
        ref_parts = {frozenset(np.nonzero(np.array(ref) == j)[0].tolist())
                     for j in range(2)}
        got_parts = {frozenset(b.members.tolist()) for b in model.balls}
        assert got_parts == ref_parts, f"trial {trial}"


# --- build -------------------------------------------------------------------

def test_two_blob_build_all_balls_pure():
    rng = np.random.default_rng(0)
    X = blob_features(rng, [np.array([0.0, 0.0]), np.array([8.0, 8.0])], 40)
    labels = np.full(80, -1, dtype=np.int64)
    labels[:5] = 0
    labels[40:45] = 1
    model = build_from_arrays(X, labels, GBCConfig())
    assert len(model.balls) >= 2
    assert all(b.purity == 1.0 for b in model.balls)


def test_single_class_is_one_ball_under_purity_phase():
    X = np.array([[0.0, 0.0], [0.1, 0.0], [0.0, 0.1]])
    labels = np.array([0, 0, 0])
    model = build_from_arrays(X, labels, GBCConfig(size_limit_mode=100))
    assert len(model.balls) == 1
    assert model.balls[0].purity == 1.0
    assert model.build_stats["splits"] == 0


def test_sqrt_limit_on_tiny_graph_degenerates_to_singletons():
    # ceil(sqrt(3)) = 2, so every multi-node ball keeps splitting
    X = np.array([[0.0, 0.0], [0.1, 0.0], [0.0, 0.1]])
    labels = np.array([0, 0, 0])
    model = build_from_arrays(X, labels, GBCConfig())
    assert len(model.balls) == 3
    assert all(len(b) == 1 for b in model.balls)


def test_no_labeled_node_rejected():
    with pytest.raises(EngineError):
        build_from_arrays(np.zeros((4, 2)), np.full(4, -1), GBCConfig())


def test_large_uniform_graph_respects_size_limit():
    rng = np.random.default_rng(9)
    n = 10_100
    X = rng.uniform(size=(n, 8))
    labels = np.full(n, -1, dtype=np.int64)
    picked = rng.choice(n, size=100, replace=False)
    labels[picked] = rng.integers(0, 5, size=100)
    model = build_from_arrays(X, labels, GBCConfig())
    limit = math.ceil(math.sqrt(n))
    for b in model.balls:
        assert len(b) < limit or b.unsplittable
    # assignment and domains are total maps
    assert np.all(model.assignment >= 0)
    assert sum(len(b) for b in model.balls) == n
    counts = model.domain_counts()
    assert counts["definite"] + counts["uncertain"] + counts["chaos"] == n


def test_ball_center_is_member_mean():
    rng = np.random.default_rng(2)
    X = blob_features(rng, [np.zeros(3), 6 * np.ones(3)], 25)
    labels = np.full(50, -1, dtype=np.int64)
    labels[0], labels[25] = 0, 1
    model = build_from_arrays(X, labels, GBCConfig())
    for b in model.balls:
        np.testing.assert_allclose(b.center, X[b.members].mean(axis=0),
                                   rtol=1e-5)
        assert (b.majority_label is not None) == (b.labeled_count > 0)


def test_domains_match_radius_and_label():
    rng = np.random.default_rng(3)
    X = blob_features(rng, [np.zeros(2), 9 * np.ones(2)], 30)
    labels = np.full(60, -1, dtype=np.int64)
    labels[:3] = 0
    labels[30:33] = 1
    model = build_from_arrays(X, labels, GBCConfig())
    for node in range(60):
        ball = model.balls[model.assignment[node]]
        dist = float(np.linalg.norm(X[node] - ball.center))
        dom = model.domains[node]
        if dom == DEFINITE:
            assert ball.majority_label is not None and dist <= ball.radius
        elif dom == CHAOS:
            assert dist > ball.radius
        else:
            assert ball.majority_label is None and dist <= ball.radius


def test_max_distance_radius_leaves_no_chaos():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((40, 3))
    labels = np.full(40, -1, dtype=np.int64)
    labels[:4] = [0, 0, 1, 1]
    model = build_from_arrays(X, labels,
                              GBCConfig(radius_mode="max_distance"))
    assert model.domain_counts()["chaos"] == 0


# --- predict -----------------------------------------------------------------

def test_predict_covers_definite_only_and_is_accurate():
    rng = np.random.default_rng(6)
    X = blob_features(rng, [np.zeros(4), 7 * np.ones(4)], 50)
    truth = np.array([0] * 50 + [1] * 50)
    labels = np.full(100, -1, dtype=np.int64)
    labels[:5] = 0
    labels[50:55] = 1
    model = build_from_arrays(X, labels, GBCConfig())
    pred = predict(model)
    definite = set(np.nonzero(model.domains == DEFINITE)[0].tolist())
    assert set(pred.entries) == definite
    assert len(pred) <= 100
    for node, cls in pred.entries.items():
        assert cls == truth[node]
    for node in np.nonzero(model.domains == CHAOS)[0]:
        assert int(node) not in pred.entries


# --- determinism & serialization ---------------------------------------------

def test_build_is_deterministic():
    spec = SyntheticSpec(n=300, d=6, c=3, cluster_spread=1.0, homophily=0.8,
                         avg_degree=6, label_rate=0.1, seed=21)
    bundle = generate_synthetic(spec)
    m1 = build(bundle, GBCConfig(seed=1))
    m2 = build(bundle, GBCConfig(seed=1))
    assert model_to_json(m1) == model_to_json(m2)


def test_model_json_roundtrip_bit_exact():
    rng = np.random.default_rng(8)
    X = rng.standard_normal((60, 5))
    labels = np.full(60, -1, dtype=np.int64)
    labels[:6] = [0, 0, 1, 1, 2, 2]
    model = build_from_arrays(X, labels, GBCConfig())
    text = model_to_json(model)
    back = model_from_json(text)
    assert model_to_json(back) == text
    for a, b in zip(model.balls, back.balls):
        assert np.array_equal(a.members, b.members)
        assert a.center.tobytes() == b.center.tobytes()
        assert a.radius == b.radius and a.purity == b.purity


def test_bad_config_rejected():
    with pytest.raises(SpecError):
        GBCConfig(purity_threshold=1.5)
    with pytest.raises(SpecError):
        GBCConfig(size_limit_mode=0)
    with pytest.raises(SpecError):
        GBCConfig(radius_mode="median")
