"""Two-level structure augmentation: ball anchors + projection/bridging edges.

Anchors summarize each ball's group-level semantics as the mean feature of
its in-radius training nodes that carry the ball's label.  The augment graph
keeps the vanilla graph untouched and appends the anchors as new nodes wired
by projection edges (anchor <-> every ball member) and bridging edges
(same-label anchor pairs), giving any two same-label balls a 3-hop path.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .bundle import GraphBundle, load_bundle, make_bundle, normalize_edges, save_bundle
from .errors import IngestError, IoError, SchemaError, SpecError
from .gbc import DEFINITE, GBModel

ANCHORS_FILE = "anchors.json"

BRIDGE_MODES = ("full", "random_k")


@dataclass(frozen=True)
class Anchor:
    """A virtual node standing in for one ball's labeled core."""

    anchor_id: int          # >= n, position in the augmented node range
    source_ball: int        # index into GBModel.balls
    feature: np.ndarray     # (d,) float32, mean of contributor features
    label: int
    contributor_count: int


@dataclass(frozen=True)
class AugmentGraph:
    base: GraphBundle
    anchors: tuple[Anchor, ...]
    projection_edges: np.ndarray   # (m, 2) int64, member < anchor id
    bridging_edges: np.ndarray     # (m, 2) int64, both >= n
    bridge_mode: str
    bridge_k: int | None = None

    @property
    def num_nodes(self):
        return self.base.num_nodes + len(self.anchors)

    def feature_matrix(self):
        """Vanilla rows followed by anchor rows (row i < n untouched)."""
        if not self.anchors:
            return self.base.features
        tail = np.stack([a.feature for a in self.anchors])
        return np.vstack([self.base.features, tail])

    def all_edges(self):
        return np.vstack([self.base.edges, self.projection_edges,
                          self.bridging_edges])

    def anchor_ids(self):
        return np.array([a.anchor_id for a in self.anchors], dtype=np.int64)

    def anchor_labels(self):
        return np.array([a.label for a in self.anchors], dtype=np.int64)


def build_anchors(model: GBModel, bundle: GraphBundle):
    """One anchor per ball holding >= 1 in-radius train node with the ball
    label; balls without such contributors yield none."""
    train_labels = bundle.train_labels()
    anchors = []
    next_id = bundle.num_nodes
    for ball_idx, ball in enumerate(model.balls):
        if ball.majority_label is None:
            continue
        members = ball.members
        contrib = members[(train_labels[members] == ball.majority_label)
                          & (model.domains[members] == DEFINITE)]
        if len(contrib) == 0:
            continue
        feature = bundle.features[contrib].mean(axis=0, dtype=np.float64)
        anchors.append(Anchor(
            anchor_id=next_id,
            source_ball=ball_idx,
            feature=feature.astype(np.float32),
            label=int(ball.majority_label),
            contributor_count=int(len(contrib)),
        ))
        next_id += 1
    return anchors


def _bridging_pairs(anchors, mode, k, seed):
    by_label = {}
    for a in anchors:
        by_label.setdefault(a.label, []).append(a.anchor_id)
    pairs = set()
    if mode == "full":
        for ids in by_label.values():
            pairs.update(combinations(sorted(ids), 2))
    else:
        rng = np.random.default_rng(seed + 1)
        for ids in sorted(by_label.values()):
            ids = np.sort(np.asarray(ids, dtype=np.int64))
            for a in ids:
                others = ids[ids != a]
                if len(others) == 0:
                    continue
                take = min(k, len(others))
                picked = rng.choice(others, size=take, replace=False)
                pairs.update((min(a, int(b)), max(a, int(b))) for b in picked)
    if not pairs:
        return np.empty((0, 2), dtype=np.int64)
    return np.array(sorted(pairs), dtype=np.int64)


def build_augment(model: GBModel, bundle: GraphBundle, anchors,
                  bridge_mode="full", bridge_k=None) -> AugmentGraph:
    if bridge_mode not in BRIDGE_MODES:
        raise SpecError(f"unknown bridge_mode {bridge_mode!r}")
    if bridge_mode == "random_k":
        if bridge_k is None or bridge_k <= 0:
            raise SpecError("random_k bridging requires k >= 1")
    proj = []
    for a in anchors:
        members = model.balls[a.source_ball].members
        proj.append(np.column_stack([
            members,
            np.full(len(members), a.anchor_id, dtype=np.int64),
        ]))
    if proj:
        proj_edges = normalize_edges(np.vstack(proj), bundle.num_nodes + len(anchors))
    else:
        proj_edges = np.empty((0, 2), dtype=np.int64)
    bridge_edges = _bridging_pairs(anchors, bridge_mode,
                                   bridge_k or 0, model.config.seed)
    return AugmentGraph(
        base=bundle,
        anchors=tuple(anchors),
        projection_edges=proj_edges,
        bridging_edges=bridge_edges,
        bridge_mode=bridge_mode,
        bridge_k=bridge_k,
    )


def save_augment(aug: AugmentGraph, directory):
    """Persist as a plain bundle over n+a nodes plus an anchors.json sidecar."""
    base = aug.base
    combined = make_bundle(
        features=aug.feature_matrix(),
        edges=aug.all_edges(),
        labels=np.concatenate([base.labels, aug.anchor_labels()]),
        num_classes=base.num_classes,
        train_mask=base.mask("train"),
        val_mask=base.mask("val"),
        test_mask=base.mask("test"),
    )
    save_bundle(combined, directory)
    sidecar = {
        "format": "augment/1",
        "base_nodes": base.num_nodes,
        "bridge_mode": aug.bridge_mode,
        "bridge_k": aug.bridge_k,
        "anchors": [
            {"id": an.anchor_id, "ball": an.source_ball, "label": an.label,
             "contributors": an.contributor_count}
            for an in aug.anchors
        ],
    }
    try:
        with open(os.path.join(directory, ANCHORS_FILE), "w") as fh:
            json.dump(sidecar, fh, sort_keys=True, separators=(",", ":"))
            fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write anchor sidecar: {exc}") from exc


def load_augment(directory) -> AugmentGraph:
    path = os.path.join(directory, ANCHORS_FILE)
    if not os.path.exists(path):
        raise IngestError(f"no {ANCHORS_FILE} in {directory}")
    with open(path) as fh:
        sidecar = json.load(fh)
    if sidecar.get("format") != "augment/1":
        raise SchemaError(f"unsupported anchor sidecar format in {path}")
    combined = load_bundle(directory)
    n = int(sidecar["base_nodes"])
    a = combined.num_nodes - n
    if a != len(sidecar["anchors"]) or a < 0:
        raise SchemaError("anchor count disagrees with node count")

    edges = combined.edges
    both_base = edges[:, 1] < n
    is_proj = (edges[:, 0] < n) & (edges[:, 1] >= n)
    is_bridge = edges[:, 0] >= n
    base = make_bundle(
        features=combined.features[:n],
        edges=edges[both_base],
        labels=combined.labels[:n],
        num_classes=combined.num_classes,
        train_mask=combined.mask("train"),
        val_mask=combined.mask("val"),
        test_mask=combined.mask("test"),
    )
    anchors = tuple(
        Anchor(
            anchor_id=int(rec["id"]),
            source_ball=int(rec["ball"]),
            feature=combined.features[int(rec["id"])],
            label=int(rec["label"]),
            contributor_count=int(rec["contributors"]),
        )
        for rec in sidecar["anchors"]
    )
    return AugmentGraph(
        base=base,
        anchors=anchors,
        projection_edges=edges[is_proj],
        bridging_edges=edges[is_bridge],
        bridge_mode=sidecar["bridge_mode"],
        bridge_k=sidecar["bridge_k"],
    )
