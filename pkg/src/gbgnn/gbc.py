"""Transductive semi-supervised granular-ball computing.

All nodes (labeled and unlabeled features alike) are partitioned into balls
by two splitting phases: a purity-driven phase that k-means-splits any ball
whose labeled members are too mixed, and a size-driven phase that 2-means-
splits any ball holding at least ``limit`` members. A final purity pass
restores the purity guarantee for balls the size phase may have re-mixed.

Every step is deterministic: k-means is seeded by farthest-point selection
starting from the smallest member id, nearest-center ties go to the smaller
cluster index, and empty clusters steal the farthest point of the largest
cluster.
"""

import base64
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .bundle import LabelSet
from .errors import EngineError, SchemaError, SpecError

DEFINITE = 0
UNCERTAIN = 1
CHAOS = 2
DOMAIN_NAMES = ("definite", "uncertain", "chaos")

_FLOAT_BYTES = 8


@dataclass(frozen=True)
class GBCConfig:
    purity_threshold: float = 0.8
    size_limit_mode: object = "sqrt_n"      # "sqrt_n" or an int cap
    kmeans_max_iters: int = 50
    kmeans_tol: float = 1e-4
    radius_mode: str = "mean_distance"      # or "max_distance"
    purity_denominator: str = "labeled_only"  # or "all_members"
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.purity_threshold <= 1.0):
            raise SpecError("purity_threshold must be in (0, 1]")
        if self.kmeans_max_iters < 1:
            raise SpecError("kmeans_max_iters must be >= 1")
        if self.radius_mode not in ("mean_distance", "max_distance"):
            raise SpecError(f"unknown radius_mode {self.radius_mode!r}")
        if self.purity_denominator not in ("labeled_only", "all_members"):
            raise SpecError(
                f"unknown purity_denominator {self.purity_denominator!r}")
        if self.size_limit_mode != "sqrt_n" and (
                not isinstance(self.size_limit_mode, int)
                or self.size_limit_mode < 1):
            raise SpecError("size_limit_mode must be 'sqrt_n' or a "
                            "positive int")

    def size_limit(self, n):
        if self.size_limit_mode == "sqrt_n":
            return math.ceil(math.sqrt(n))
        return int(self.size_limit_mode)


@dataclass
class GranularBall:
    members: np.ndarray           # sorted node ids
    center: np.ndarray            # float64 mean of member features
    radius: float
    purity: float
    majority_label: object        # int or None
    labeled_count: int
    unsplittable: bool = False

    def __len__(self):
        return self.members.size


@dataclass
class GBModel:
    balls: list
    assignment: np.ndarray        # node -> ball index
    domains: np.ndarray           # node -> DEFINITE/UNCERTAIN/CHAOS
    config: GBCConfig
    num_nodes: int
    build_stats: dict = field(default_factory=dict)

    def domain_counts(self):
        counts = np.bincount(self.domains, minlength=3)
        return {name: int(counts[code])
                for code, name in enumerate(DOMAIN_NAMES)}


def purity(members, labels, denominator="labeled_only"):
    """Dominant-class share of a ball; 1.0 when no member is labeled."""
    members = np.asarray(members, dtype=np.int64)
    if members.size == 0:
        raise EngineError("purity of an empty member set is undefined")
    labs = np.asarray(labels)[members]
    labeled = labs[labs >= 0]
    if labeled.size == 0:
        return 1.0
    top = int(np.bincount(labeled).max())
    if denominator == "labeled_only":
        return top / labeled.size
    return top / members.size


def majority_label(members, labels):
    """Most frequent class among labeled members; ties -> smallest class id."""
    members = np.asarray(members, dtype=np.int64)
    labs = np.asarray(labels)[members]
    labeled = labs[labs >= 0]
    if labeled.size == 0:
        return None
    return int(np.argmax(np.bincount(labeled)))


def _pairwise_sq(X, centers):
    # ||x - c||^2 via expansion; clipped to avoid tiny negatives
    sq = (np.einsum("ij,ij->i", X, X)[:, None]
          + np.einsum("ij,ij->i", centers, centers)[None, :]
          - 2.0 * X @ centers.T)
    return np.maximum(sq, 0.0)


def _kmeans_partition(X, ids, k, max_iters, tol):
    """Deterministic Lloyd iteration over one ball's members.

    X is the (m, d) float64 feature block for the sorted member ids. Returns
    the per-member cluster assignment (every cluster non-empty).
    """
    m = X.shape[0]
    centers = np.empty((k, X.shape[1]), dtype=np.float64)
    centers[0] = X[0]                       # smallest node id seeds first
    dmin = _pairwise_sq(X, centers[:1])[:, 0]
    for j in range(1, k):
        nxt = int(np.argmax(dmin))          # ties -> smallest id (sorted ids)
        centers[j] = X[nxt]
        dmin = np.minimum(dmin, _pairwise_sq(X, centers[j:j + 1])[:, 0])

    assign = np.zeros(m, dtype=np.int64)
    for _ in range(max_iters):
        dist = _pairwise_sq(X, centers)
        assign = np.argmin(dist, axis=1)    # ties -> smaller cluster index
        counts = np.bincount(assign, minlength=k)
        for j in range(k):
            if counts[j] == 0:
                donor = int(np.argmax(counts))
                donors = np.nonzero(assign == donor)[0]
                far = donors[int(np.argmax(dist[donors, donor]))]
                assign[far] = j
                counts[donor] -= 1
                counts[j] += 1
        new_centers = np.empty_like(centers)
        for j in range(k):
            new_centers[j] = X[assign == j].mean(axis=0)
        shift = float(np.sqrt(((new_centers - centers) ** 2).sum(axis=1)).max())
        centers = new_centers
        if shift < tol:
            break
    return assign


class _BuildState:
    """Mutable ball list plus working-set byte accounting."""

    def __init__(self, features, labels, config):
        self.X = features
        self.labels = labels
        self.cfg = config
        self.balls = [np.arange(features.shape[0], dtype=np.int64)]
        self.flags = [False]
        self.splits = 0
        self.peak_split_bytes = 0

    def split(self, idx, k):
        """Replace ball idx with its k-means parts; False if it cannot shrink."""
        ids = self.balls[idx]
        m = ids.size
        if m < k or k < 2:
            return False
        block = self.X[ids]
        workset = (block.nbytes + m * k * _FLOAT_BYTES + m * 8
                   + k * self.X.shape[1] * _FLOAT_BYTES)
        self.peak_split_bytes = max(self.peak_split_bytes, workset)
        assign = _kmeans_partition(block, ids, k, self.cfg.kmeans_max_iters,
                                   self.cfg.kmeans_tol)
        parts = [ids[assign == j] for j in range(k)]
        if any(p.size == 0 for p in parts) or any(p.size >= m for p in parts):
            return False
        self.balls[idx:idx + 1] = parts
        self.flags[idx:idx + 1] = [False] * k
        self.splits += 1
        return True


def _purity_phase(state, threshold, denominator):
    """Split while any ball's purity <= threshold (needs >= 2 labeled classes)."""
    n = state.X.shape[0]
    passes = 0
    while True:
        changed = False
        passes += 1
        if passes > n + 1:
            raise EngineError("purity phase failed to terminate")
        i = 0
        while i < len(state.balls):
            ids = state.balls[i]
            if not state.flags[i]:
                labs = state.labels[ids]
                labeled = labs[labs >= 0]
                distinct = np.unique(labeled)
                if (distinct.size >= 2
                        and purity(ids, state.labels, denominator)
                        <= threshold):
                    if state.split(i, int(distinct.size)):
                        i += int(distinct.size)
                        changed = True
                        continue
                    state.flags[i] = True
            i += 1
        if not changed:
            return passes


def _size_phase(state, limit):
    """2-means-split while any ball holds at least ``limit`` members."""
    n = state.X.shape[0]
    passes = 0
    while True:
        changed = False
        passes += 1
        if passes > n + 1:
            raise EngineError("size phase failed to terminate")
        i = 0
        while i < len(state.balls):
            if not state.flags[i] and state.balls[i].size >= limit:
                if state.split(i, 2):
                    i += 2
                    changed = True
                    continue
                state.flags[i] = True
            i += 1
        if not changed:
            return passes


def build_from_arrays(features, labels, config):
    """Run both splitting phases and assemble the finished model.

    labels: per-node int array, -1 for unlabeled. Requires at least one
    labeled node.
    """
    X = np.ascontiguousarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = X.shape[0]
    if labels.shape != (n,):
        raise EngineError("labels length must match feature rows")
    if n == 0 or not (labels >= 0).any():
        raise EngineError("granular-ball build needs at least one labeled node")

    state = _BuildState(X, labels, config)
    p1 = _purity_phase(state, config.purity_threshold,
                       config.purity_denominator)
    p2 = _size_phase(state, config.size_limit(n))
    # the size phase can re-mix labels inside a child ball; one more purity
    # sweep restores the purity guarantee without growing any ball
    p3 = _purity_phase(state, config.purity_threshold,
                       config.purity_denominator)

    balls = []
    assignment = np.empty(n, dtype=np.int64)
    domains = np.empty(n, dtype=np.int8)
    for b_idx, ids in enumerate(state.balls):
        block = X[ids]
        center = block.mean(axis=0)
        dist = np.sqrt(((block - center) ** 2).sum(axis=1))
        if config.radius_mode == "mean_distance":
            radius = float(dist.mean())
        else:
            radius = float(dist.max())
        label = majority_label(ids, labels)
        labs = labels[ids]
        labeled_count = int((labs >= 0).sum())
        balls.append(GranularBall(
            members=ids, center=center, radius=radius,
            purity=purity(ids, labels, config.purity_denominator),
            majority_label=label, labeled_count=labeled_count,
            unsplittable=state.flags[b_idx]))
        assignment[ids] = b_idx
        inside = dist <= radius
        dom = np.where(inside,
                       DEFINITE if label is not None else UNCERTAIN,
                       CHAOS)
        domains[ids] = dom

    final_bytes = (assignment.nbytes + domains.nbytes
                   + sum(b.members.nbytes + b.center.nbytes + 3 * _FLOAT_BYTES
                         for b in balls))
    stats = {
        "phase1_passes": p1,
        "phase2_passes": p2,
        "recheck_passes": p3,
        "splits": state.splits,
        "peak_workset_bytes": int(state.peak_split_bytes + final_bytes),
    }
    return GBModel(balls=balls, assignment=assignment, domains=domains,
                   config=config, num_nodes=n, build_stats=stats)


def build(bundle, config):
    """Build over a bundle using only its train-mask labels."""
    return build_from_arrays(bundle.features, bundle.train_labels(), config)


def predict(model):
    """Ball labels for nodes in the definite domain; others get no prediction."""
    entries = {}
    definite = np.nonzero(model.domains == DEFINITE)[0]
    for node in definite:
        ball = model.balls[model.assignment[node]]
        entries[int(node)] = int(ball.majority_label)
    return LabelSet(entries=entries, universe=model.num_nodes)


def _b64_f64(arr):
    return base64.b64encode(
        np.ascontiguousarray(arr, dtype="<f8").tobytes()).decode("ascii")


def _unb64_f64(s):
    return np.frombuffer(base64.b64decode(s), dtype="<f8").copy()


def model_to_json(model):
    """Serialize with bit-exact reals (hex floats / base64 raw doubles)."""
    cfg = model.config
    doc = {
        "format": "gbmodel/1",
        "num_nodes": model.num_nodes,
        "config": {
            "purity_threshold": cfg.purity_threshold,
            "size_limit_mode": cfg.size_limit_mode,
            "kmeans_max_iters": cfg.kmeans_max_iters,
            "kmeans_tol": cfg.kmeans_tol,
            "radius_mode": cfg.radius_mode,
            "purity_denominator": cfg.purity_denominator,
            "seed": cfg.seed,
        },
        "balls": [
            {
                "members": b.members.tolist(),
                "center_b64": _b64_f64(b.center),
                "radius_hex": float(b.radius).hex(),
                "purity_hex": float(b.purity).hex(),
                "label": b.majority_label,
                "labeled_count": b.labeled_count,
                "unsplittable": b.unsplittable,
            }
            for b in model.balls
        ],
        "assignment": model.assignment.tolist(),
        "domains": model.domains.tolist(),
        "build_stats": model.build_stats,
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def model_from_json(text):
    doc = json.loads(text)
    if doc.get("format") != "gbmodel/1":
        raise SchemaError("not a gbmodel/1 document")
    cfg_doc = dict(doc["config"])
    cfg = GBCConfig(**cfg_doc)
    balls = []
    for b in doc["balls"]:
        balls.append(GranularBall(
            members=np.array(b["members"], dtype=np.int64),
            center=_unb64_f64(b["center_b64"]),
            radius=float.fromhex(b["radius_hex"]),
            purity=float.fromhex(b["purity_hex"]),
            majority_label=b["label"],
            labeled_count=int(b["labeled_count"]),
            unsplittable=bool(b["unsplittable"])))
    return GBModel(
        balls=balls,
        assignment=np.array(doc["assignment"], dtype=np.int64),
        domains=np.array(doc["domains"], dtype=np.int8),
        config=cfg, num_nodes=int(doc["num_nodes"]),
        build_stats=dict(doc.get("build_stats", {})))


def save_model(model, path):
    with open(path, "w") as f:
        f.write(model_to_json(model))


def load_model(path):
    with open(path) as f:
        return model_from_json(f.read())
