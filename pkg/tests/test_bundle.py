import json
import os

import numpy as np
import pytest

from gbgnn.bundle import (
    GraphBundle,
    SyntheticSpec,
    generate_synthetic,
    load_bundle,
    make_bundle,
    measured_homophily,
    save_bundle,
)
from gbgnn.errors import DataError, IngestError, SchemaError, SpecError


def tiny_bundle():
    feats = np.arange(8, dtype=np.float32).reshape(4, 2)
    return make_bundle(feats, [(0, 1), (1, 2)], [0, 1, -1, -1], 2,
                       train_mask=[0, 1], val_mask=[2], test_mask=[3])


def test_meta_dimension_mismatch_is_schema_error(tmp_path):
    save_bundle(tiny_bundle(), tmp_path)
    meta = json.loads((tmp_path / "meta.json").read_text())
    meta["n"] = 5  # declares 5 rows, file holds 4
    (tmp_path / "meta.json").write_text(json.dumps(meta))
    (tmp_path / "labels.csv").write_text("0\n1\n-1\n-1\n-1\n")
    (tmp_path / "masks.csv").write_text("train\ntrain\nval\ntest\nnone\n")
    with pytest.raises(SchemaError):
        load_bundle(tmp_path)


def test_symmetric_duplicate_edges_merge(tmp_path):
    save_bundle(tiny_bundle(), tmp_path)
    (tmp_path / "edges.tsv").write_text("0\t1\n1\t0\n1\t2\n")
    b = load_bundle(tmp_path)
    assert b.edges.tolist() == [[0, 1], [1, 2]]


def test_self_loops_dropped(tmp_path):
    save_bundle(tiny_bundle(), tmp_path)
    (tmp_path / "edges.tsv").write_text("2\t2\n0\t1\n")
    b = load_bundle(tmp_path)
    assert b.edges.tolist() == [[0, 1]]


def test_missing_file_is_ingest_error(tmp_path):
    save_bundle(tiny_bundle(), tmp_path)
    os.remove(tmp_path / "edges.tsv")
    with pytest.raises(IngestError):
        load_bundle(tmp_path)


def test_nan_feature_is_data_error(tmp_path):
    save_bundle(tiny_bundle(), tmp_path)
    bad = np.array([[0, 1], [2, np.nan], [4, 5], [6, 7]], dtype="<f4")
    bad.tofile(tmp_path / "features.f32")
    with pytest.raises(DataError):
        load_bundle(tmp_path)


def test_train_node_without_label_rejected():
    feats = np.zeros((3, 2), dtype=np.float32)
    with pytest.raises(DataError):
        make_bundle(feats, [], [-1, 0, 1], 2, [0], [1], [2])


def test_overlapping_masks_rejected():
    feats = np.zeros((3, 2), dtype=np.float32)
    with pytest.raises(DataError):
        make_bundle(feats, [], [0, 0, 1], 2, [0, 1], [1], [2])


def test_roundtrip_identity(tmp_path):
    spec = SyntheticSpec(n=60, d=4, c=3, cluster_spread=0.7, homophily=0.9,
                         avg_degree=4, label_rate=0.2, seed=7)
    b = generate_synthetic(spec)
    save_bundle(b, tmp_path)
    b2 = load_bundle(tmp_path)
    assert b2.features.tobytes() == b.features.tobytes()
    assert np.array_equal(b2.edges, b.edges)
    assert np.array_equal(b2.labels, b.labels)
    assert np.array_equal(b2.train_mask, b.train_mask)
    assert np.array_equal(b2.val_mask, b.val_mask)
    assert np.array_equal(b2.test_mask, b.test_mask)
    assert b2.num_classes == b.num_classes
    # masks stay pairwise disjoint after the round trip
    assert np.intersect1d(b2.train_mask, b2.val_mask).size == 0
    assert np.intersect1d(b2.train_mask, b2.test_mask).size == 0
    assert np.intersect1d(b2.val_mask, b2.test_mask).size == 0


def test_roundtrip_zero_edge_graph(tmp_path):
    feats = np.ones((3, 2), dtype=np.float32)
    b = make_bundle(feats, np.zeros((0, 2)), [0, 1, -1], 2, [0, 1], [], [2])
    save_bundle(b, tmp_path)
    b2 = load_bundle(tmp_path)
    assert b2.edges.shape == (0, 2)


def test_full_homophily_means_all_intra_class():
    spec = SyntheticSpec(n=150, d=4, c=3, homophily=1.0, avg_degree=6,
                         label_rate=0.1, seed=3)
    b = generate_synthetic(spec)
    assert measured_homophily(b) == 1.0


def test_synthetic_determinism(tmp_path):
    spec = SyntheticSpec(n=200, d=8, c=4, cluster_spread=0.5, homophily=0.7,
                         avg_degree=6, label_rate=0.1, seed=11)
    a, b = generate_synthetic(spec), generate_synthetic(spec)
    pa, pb = tmp_path / "a", tmp_path / "b"
    save_bundle(a, pa)
    save_bundle(b, pb)
    for name in sorted(os.listdir(pa)):
        assert (pa / name).read_bytes() == (pb / name).read_bytes(), name


def test_synthetic_homophily_within_band():
    # target 0.8; the measured same-class fraction must land in [0.75, 0.85]
    spec = SyntheticSpec(n=1500, d=16, c=3, cluster_spread=0.5, homophily=0.8,
                         avg_degree=8, label_rate=0.05, seed=1)
    b = generate_synthetic(spec)
    assert 0.75 <= measured_homophily(b) <= 0.85


def test_infeasible_degree_rejected():
    with pytest.raises(SpecError):
        generate_synthetic(SyntheticSpec(n=10, d=4, c=2, avg_degree=10,
                                         label_rate=0.5, seed=0))


def test_label_rate_below_class_count_rejected():
    with pytest.raises(SpecError):
        generate_synthetic(SyntheticSpec(n=100, d=8, c=5, label_rate=0.01,
                                         seed=0))


def test_bundle_arrays_immutable():
    b = tiny_bundle()
    with pytest.raises(ValueError):
        b.features[0, 0] = 9.0
