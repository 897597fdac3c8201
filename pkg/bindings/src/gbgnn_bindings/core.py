"""Array-in/array-out boundary over the granular-ball engine.

External GNN training stacks consume three things from the engine: the
ball model itself (domains + ball-label predictions), the anchor
augmentation (virtual nodes + extra edges), and the consistency-filtered
pseudo-label set. Each is exposed here as one call taking plain numpy
arrays and returning plain numpy arrays; the model lives behind an
opaque integer handle so augment can follow build without reserializing.

Boundary rules: shapes and dtypes are validated before the engine is
entered (violations raise BoundaryError), every input buffer is copied
on the way in, and no returned array aliases engine-internal state.
"""

import itertools
import threading

import numpy as np

from gbgnn.augment import build_anchors, build_augment
from gbgnn.bundle import LabelSet, make_bundle
from gbgnn.gbc import GBCConfig, build_from_arrays, predict
from gbgnn.lcc import lcc


class BoundaryError(ValueError):
    """Bad array shape/dtype or handle at the boundary; the engine was
    never entered."""


_CONFIG_KEYS = frozenset((
    "purity_threshold", "size_limit_mode", "kmeans_max_iters",
    "kmeans_tol", "radius_mode", "purity_denominator", "seed",
))

# handle -> GBModel; handles are never reused within a process
_registry = {}
_next_handle = itertools.count(1)
_lock = threading.Lock()


def _check_features(features):
    if not isinstance(features, np.ndarray):
        raise BoundaryError("features must be a numpy array")
    if features.dtype != np.float32:
        raise BoundaryError(
            f"features dtype must be float32, got {features.dtype}")
    if features.ndim != 2:
        raise BoundaryError(f"features must be 2-d, got {features.ndim}-d")
    return np.array(features, dtype=np.float32, order="C", copy=True)


def _check_int_vector(vec, n, name):
    if not isinstance(vec, np.ndarray):
        raise BoundaryError(f"{name} must be a numpy array")
    if vec.dtype.kind != "i":
        raise BoundaryError(
            f"{name} dtype must be a signed integer, got {vec.dtype}")
    if vec.ndim != 1:
        raise BoundaryError(f"{name} must be 1-d, got {vec.ndim}-d")
    if n is not None and vec.shape[0] != n:
        raise BoundaryError(f"{name} length {vec.shape[0]} != {n}")
    return np.array(vec, dtype=np.int64, copy=True)


def _check_mask(mask, n):
    if not isinstance(mask, np.ndarray):
        raise BoundaryError("train_mask must be a numpy array")
    if mask.dtype != np.bool_:
        raise BoundaryError(f"train_mask dtype must be bool, got {mask.dtype}")
    if mask.shape != (n,):
        raise BoundaryError(f"train_mask shape {mask.shape} != ({n},)")
    return mask.copy()


def _config_from_map(config):
    if config is None:
        return GBCConfig()
    if not isinstance(config, dict):
        raise BoundaryError("config must be a dict of GBCConfig fields")
    unknown = sorted(set(config) - _CONFIG_KEYS)
    if unknown:
        raise BoundaryError(f"unknown config keys: {unknown}")
    return GBCConfig(**config)


def _resolve(handle):
    with _lock:
        model = _registry.get(handle)
    if model is None:
        raise BoundaryError(f"unknown model handle {handle!r}")
    return model


def _label_set(vec):
    # -1 encodes "no prediction" on both the model and the ball side
    entries = {i: int(v) for i, v in enumerate(vec.tolist()) if v >= 0}
    return LabelSet(entries=entries, universe=vec.shape[0])


def _edgeless_bundle(features, labels):
    # anchors and bridging never look at the base edge list, so a bare
    # bundle around the caller's arrays is enough engine context
    num_classes = max(int(labels.max()) + 1, 2)
    train = np.nonzero(labels >= 0)[0]
    empty = np.empty(0, dtype=np.int64)
    return make_bundle(features, np.empty((0, 2), dtype=np.int64), labels,
                       num_classes, train, empty, empty)


def py_gbc_build(features, train_labels, config=None):
    """Build a ball model; returns (handle, domains, gbc_pred).

    features: (n, d) float32. train_labels: (n,) ints, -1 = unlabeled.
    config: optional dict of GBCConfig fields (purity_threshold, seed, ...).

    domains is (n,) int8 with 0=definite / 1=uncertain / 2=chaos;
    gbc_pred is (n,) int64 holding the ball label for definite nodes and
    -1 everywhere the model declines to predict.
    """
    X = _check_features(features)
    y = _check_int_vector(train_labels, X.shape[0], "train_labels")
    cfg = _config_from_map(config)
    model = build_from_arrays(X, y, cfg)
    with _lock:
        handle = next(_next_handle)
        _registry[handle] = model
    pred = predict(model)
    gbc_pred = np.full(model.num_nodes, -1, dtype=np.int64)
    nodes = pred.nodes()
    if nodes.size:
        gbc_pred[nodes] = pred.labels_for(nodes)
    return handle, np.array(model.domains, copy=True), gbc_pred


def py_augment(handle, features, train_labels, bridge_mode="full",
               bridge_k=None):
    """Materialize the anchor augmentation for a built model.

    Returns (anchor_features, anchor_labels, new_edges): (a, d) float32,
    (a,) int64, and (m, 2) int64 with anchor ids >= n — projection rows
    first, then bridging rows. Zero anchors yield three empty arrays.
    """
    model = _resolve(handle)
    X = _check_features(features)
    y = _check_int_vector(train_labels, X.shape[0], "train_labels")
    if X.shape[0] != model.num_nodes:
        raise BoundaryError(
            f"features rows {X.shape[0]} != model nodes {model.num_nodes}")
    bundle = _edgeless_bundle(X, y)
    anchors = build_anchors(model, bundle)
    aug = build_augment(model, bundle, anchors, bridge_mode=bridge_mode,
                        bridge_k=bridge_k)
    if not anchors:
        return (np.empty((0, X.shape[1]), dtype=np.float32),
                np.empty(0, dtype=np.int64),
                np.empty((0, 2), dtype=np.int64))
    anchor_features = np.stack([a.feature for a in anchors])
    anchor_labels = np.array([a.label for a in anchors], dtype=np.int64)
    new_edges = np.vstack([aug.projection_edges, aug.bridging_edges])
    return anchor_features, anchor_labels, new_edges


def py_lcc(model_pred, gbc_pred, train_mask):
    """Consistency-filtered pseudo-labels as (ids, labels), ids sorted.

    Keeps nodes where both prediction vectors agree on a label, then
    drops the train set so the result is purely additional supervision.
    -1 entries mean "no prediction" and never match. An empty
    intersection yields two empty arrays.
    """
    mp = _check_int_vector(model_pred, None, "model_pred")
    gp = _check_int_vector(gbc_pred, mp.shape[0], "gbc_pred")
    mask = _check_mask(train_mask, mp.shape[0])
    report = lcc(_label_set(mp), _label_set(gp),
                 exclude=np.nonzero(mask)[0])
    ids = report.retained.nodes()
    return ids, report.retained.labels_for(ids)
