"""Attributed-graph bundles: in-memory model, directory format, synthetic data.

A bundle directory holds five files:

    meta.json       {"n": ..., "d": ..., "c": ..., "feature_file": ...,
                     "endianness": "little"}
    features.f32    raw n*d little-endian float32, row-major
    edges.tsv       one "u<TAB>v" per line
    labels.csv      one integer per line, -1 = unlabeled
    masks.csv       one of {train, val, test, none} per line

Graphs are undirected and simple: directed inputs are symmetrized, duplicate
unordered pairs merged, self-loops dropped. Validation happens here, once;
downstream modules assume a valid bundle.
"""

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, IngestError, IoError, SchemaError, SpecError

META_FILE = "meta.json"
EDGES_FILE = "edges.tsv"
LABELS_FILE = "labels.csv"
MASKS_FILE = "masks.csv"
DEFAULT_FEATURE_FILE = "features.f32"

MASK_NAMES = ("train", "val", "test", "none")

# Class centers sit at BLOB_SCALE * e_k; separation relative to
# cluster_spread controls task difficulty.
BLOB_SCALE = 4.0


def _freeze(arr):
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class GraphBundle:
    """Immutable attributed graph with labels and train/val/test masks."""

    num_nodes: int
    feature_dim: int
    features: np.ndarray          # (n, d) float32
    edges: np.ndarray             # (m, 2) int64, u < v, deduplicated
    labels: np.ndarray            # (n,) int64, -1 = unlabeled
    num_classes: int
    train_mask: np.ndarray        # sorted node ids
    val_mask: np.ndarray
    test_mask: np.ndarray

    def mask(self, name):
        return {"train": self.train_mask, "val": self.val_mask,
                "test": self.test_mask}[name]

    def train_labels(self):
        """Per-node label vector with everything outside the train mask hidden."""
        out = np.full(self.num_nodes, -1, dtype=np.int64)
        out[self.train_mask] = self.labels[self.train_mask]
        return out


@dataclass
class LabelSet:
    """Sparse node -> class map over a fixed universe of node ids."""

    entries: dict
    universe: int

    def __post_init__(self):
        for node in self.entries:
            if not (0 <= node < self.universe):
                raise DataError(f"label set key {node} outside universe "
                                f"{self.universe}")

    def __len__(self):
        return len(self.entries)

    def nodes(self):
        return np.fromiter(sorted(self.entries), dtype=np.int64,
                           count=len(self.entries))

    def labels_for(self, nodes):
        return np.array([self.entries[int(i)] for i in nodes], dtype=np.int64)


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a deterministic Gaussian-blob benchmark graph."""

    n: int
    d: int
    c: int
    cluster_spread: float = 1.0
    homophily: float = 0.8
    avg_degree: float = 8.0
    label_rate: float = 0.05
    seed: int = 0
    val_fraction: float = 0.5   # share of non-train nodes used for validation


def normalize_edges(edges, num_nodes):
    """Canonical undirected simple edge array: u < v, sorted, deduplicated."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if edges.size and (edges.min() < 0 or edges.max() >= num_nodes):
        raise SchemaError("edge endpoint outside [0, num_nodes)")
    edges = edges[edges[:, 0] != edges[:, 1]]
    if edges.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    lo = np.minimum(edges[:, 0], edges[:, 1])
    hi = np.maximum(edges[:, 0], edges[:, 1])
    return np.unique(np.stack([lo, hi], axis=1), axis=0)


def make_bundle(features, edges, labels, num_classes, train_mask, val_mask,
                test_mask):
    """Assemble and validate a GraphBundle from raw arrays."""
    features = np.ascontiguousarray(features, dtype=np.float32)
    if features.ndim != 2:
        raise SchemaError("features must be a 2-d matrix")
    n, d = features.shape
    if not np.isfinite(features).all():
        raise DataError("features contain NaN or Inf")
    if num_classes < 2:
        raise SchemaError("num_classes must be >= 2")

    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (n,):
        raise SchemaError(f"labels length {labels.shape} != n={n}")
    bad = (labels < -1) | (labels >= num_classes)
    if bad.any():
        raise DataError(f"label out of range at node {int(np.argmax(bad))}")

    masks = []
    for name, m in (("train", train_mask), ("val", val_mask),
                    ("test", test_mask)):
        m = np.unique(np.asarray(m, dtype=np.int64))
        if m.size and (m.min() < 0 or m.max() >= n):
            raise SchemaError(f"{name} mask id outside [0, n)")
        masks.append(m)
    train, val, test = masks
    if (np.intersect1d(train, val).size or np.intersect1d(train, test).size
            or np.intersect1d(val, test).size):
        raise DataError("train/val/test masks overlap")
    if train.size and (labels[train] < 0).any():
        raise DataError("train node without a label")

    edges = normalize_edges(edges, n)
    return GraphBundle(
        num_nodes=n, feature_dim=d,
        features=_freeze(features), edges=_freeze(edges),
        labels=_freeze(labels), num_classes=num_classes,
        train_mask=_freeze(train), val_mask=_freeze(val),
        test_mask=_freeze(test))


def load_bundle(path):
    """Read a bundle directory. IngestError / SchemaError / DataError."""
    def _require(name):
        p = os.path.join(path, name)
        if not os.path.isfile(p):
            raise IngestError(f"missing {name} in {path}")
        return p

    meta_path = _require(META_FILE)
    with open(meta_path) as f:
        try:
            meta = json.load(f)
        except json.JSONDecodeError as e:
            raise SchemaError(f"unparseable meta.json: {e}") from e
    for key in ("n", "d", "c"):
        if key not in meta:
            raise SchemaError(f"meta.json missing '{key}'")
    n, d, c = int(meta["n"]), int(meta["d"]), int(meta["c"])
    if meta.get("endianness", "little") != "little":
        raise SchemaError("only little-endian feature files are supported")

    feat_path = _require(meta.get("feature_file", DEFAULT_FEATURE_FILE))
    raw = np.fromfile(feat_path, dtype="<f4")
    if raw.size != n * d:
        raise SchemaError(f"feature file holds {raw.size} values, "
                          f"meta declares n*d={n * d}")
    features = raw.reshape(n, d)

    edges_path = _require(EDGES_FILE)
    rows = []
    with open(edges_path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise SchemaError(f"edges.tsv line {lineno}: expected 'u<TAB>v'")
            rows.append((int(parts[0]), int(parts[1])))
    edges = np.array(rows, dtype=np.int64).reshape(-1, 2)

    labels_path = _require(LABELS_FILE)
    labels = np.loadtxt(labels_path, dtype=np.int64, ndmin=1)
    if labels.shape != (n,):
        raise SchemaError(f"labels.csv has {labels.size} rows, expected {n}")

    masks_path = _require(MASKS_FILE)
    with open(masks_path) as f:
        names = [line.strip() for line in f if line.strip()]
    if len(names) != n:
        raise SchemaError(f"masks.csv has {len(names)} rows, expected {n}")
    for i, name in enumerate(names):
        if name not in MASK_NAMES:
            raise SchemaError(f"masks.csv line {i + 1}: unknown mask '{name}'")
    names = np.array(names)
    return make_bundle(
        features, edges, labels, c,
        np.nonzero(names == "train")[0],
        np.nonzero(names == "val")[0],
        np.nonzero(names == "test")[0])


def save_bundle(bundle, path):
    """Write a bundle directory; load_bundle(save_bundle(b)) == b."""
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as e:
        raise IoError(f"cannot create {path}: {e}") from e
    try:
        meta = {"n": bundle.num_nodes, "d": bundle.feature_dim,
                "c": bundle.num_classes,
                "feature_file": DEFAULT_FEATURE_FILE, "endianness": "little"}
        with open(os.path.join(path, META_FILE), "w") as f:
            json.dump(meta, f, indent=2, sort_keys=True)
            f.write("\n")
        bundle.features.astype("<f4", copy=False).tofile(
            os.path.join(path, DEFAULT_FEATURE_FILE))
        with open(os.path.join(path, EDGES_FILE), "w") as f:
            for u, v in bundle.edges:
                f.write(f"{u}\t{v}\n")
        np.savetxt(os.path.join(path, LABELS_FILE), bundle.labels, fmt="%d")
        names = np.full(bundle.num_nodes, "none", dtype=object)
        names[bundle.train_mask] = "train"
        names[bundle.val_mask] = "val"
        names[bundle.test_mask] = "test"
        with open(os.path.join(path, MASKS_FILE), "w") as f:
            f.writelines(f"{name}\n" for name in names)
    except OSError as e:
        raise IoError(f"cannot write bundle to {path}: {e}") from e


def generate_synthetic(spec):
    """Deterministic Gaussian-blob graph with controlled edge homophily.

    Class k is centered on BLOB_SCALE * e_k with isotropic standard deviation
    spec.cluster_spread. Edges are sampled so the same-class fraction lands
    on spec.homophily (exact up to rounding). Labels are kept for every node
    (ground truth for evaluation); the train mask is a stratified
    label_rate sample, the rest is split val/test.
    """
    n, d, c = spec.n, spec.d, spec.c
    if c < 2:
        raise SpecError("need at least 2 classes")
    if d < c:
        raise SpecError(f"need d >= c to place {c} blob centers, got d={d}")
    if not (0.0 <= spec.homophily <= 1.0):
        raise SpecError("homophily must be in [0, 1]")
    if spec.avg_degree >= n:
        raise SpecError(f"avg_degree {spec.avg_degree} infeasible for n={n}")
    if not (0.0 < spec.label_rate <= 1.0):
        raise SpecError("label_rate must be in (0, 1]")
    if spec.label_rate * n < c:
        raise SpecError("label_rate too small: fewer labeled nodes than classes")

    rng = np.random.default_rng(spec.seed)
    classes = rng.permutation(np.arange(n) % c).astype(np.int64)
    centers = np.zeros((c, d), dtype=np.float64)
    centers[np.arange(c), np.arange(c)] = BLOB_SCALE
    features = (centers[classes]
                + spec.cluster_spread * rng.standard_normal((n, d)))
    features = features.astype(np.float32)

    m_total = int(round(n * spec.avg_degree / 2.0))
    m_intra = int(round(spec.homophily * m_total))
    by_class = [np.nonzero(classes == k)[0] for k in range(c)]
    for k, members in enumerate(by_class):
        if m_intra > 0 and members.size < 2:
            raise SpecError(f"class {k} too small to carry intra-class edges")

    chosen = set()
    class_sizes = np.array([m.size for m in by_class])
    order = np.argsort(classes, kind="stable")      # nodes grouped by class
    class_start = np.concatenate([[0], np.cumsum(class_sizes)[:-1]])

    def _fill(target, intra):
        got = 0
        attempts = 0
        while got < target:
            attempts += 1
            if attempts > 500:
                raise SpecError("edge sampling stalled; degree too close to "
                                "the feasible maximum")
            batch = max(1024, 2 * (target - got))
            u = rng.integers(0, n, size=batch)
            if intra:
                offs = rng.integers(0, class_sizes[classes[u]])
                v = order[class_start[classes[u]] + offs]
            else:
                v = rng.integers(0, n, size=batch)
            ok = u != v
            if not intra:
                ok &= classes[u] != classes[v]
            for a, b in zip(u[ok], v[ok]):
                pair = (int(min(a, b)), int(max(a, b)))
                if pair not in chosen:
                    chosen.add(pair)
                    got += 1
                    if got == target:
                        break

    _fill(m_intra, intra=True)
    _fill(m_total - m_intra, intra=False)
    edges = np.array(sorted(chosen), dtype=np.int64).reshape(-1, 2)

    n_train = int(round(spec.label_rate * n))
    train = []
    # stratified: at least one train node per class, proportional otherwise
    quotas = np.full(c, n_train // c)
    quotas[: n_train % c] += 1
    for k in range(c):
        perm = rng.permutation(by_class[k])
        train.extend(perm[: quotas[k]])
    train = np.sort(np.array(train, dtype=np.int64))
    rest = np.setdiff1d(np.arange(n), train)
    rest = rng.permutation(rest)
    n_val = int(round(spec.val_fraction * rest.size))
    val, test = np.sort(rest[:n_val]), np.sort(rest[n_val:])

    return make_bundle(features, edges, classes, c, train, val, test)


def measured_homophily(bundle):
    """Fraction of edges joining same-label endpoints (labels as ground truth)."""
    if bundle.edges.shape[0] == 0:
        return float("nan")
    lab = bundle.labels
    same = lab[bundle.edges[:, 0]] == lab[bundle.edges[:, 1]]
    return float(np.mean(same))
