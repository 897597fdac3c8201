"""Semantic-consistency GNN training with manual gradients.

Two shared-parameter channels run over the vanilla graph and the anchor-
augmented graph; per-node attention fuses the two logit matrices; the loss
is CE(train) + beta * CE(anchors) + gamma * CE(consistency pseudo-labels).
Everything is dense numpy + scipy.sparse propagation with hand-written
reverse-mode gradients, so gradient correctness is checkable by finite
differences and runs are bit-reproducible for a fixed seed.

RNG discipline: three independent streams derived from the seed (backbone
init / fusion init / dropout) so that with all ablation flags set the
parameter trajectory is bitwise-identical to the standalone backbone loop,
which draws the same streams.
"""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp

from .bundle import GraphBundle, LabelSet
from .errors import ConfigError, ModelError, SpecError, TrainError
from .gbc import GBModel, predict
from .lcc import lcc

BACKBONE_KINDS = ("MLP", "GCN")
ABLATION_FLAGS = ("no_lcc", "no_augment", "no_parallel")

FUSION_HIDDEN = 16

# stream ids appended to the user seed
_SEED_INIT, _SEED_FUSION, _SEED_DROPOUT = 0, 1, 2


@dataclass(frozen=True)
class BackboneSpec:
    kind: str = "GCN"
    hidden: int = 64
    layers: int = 2
    dropout: float = 0.5

    def __post_init__(self):
        if self.kind not in BACKBONE_KINDS:
            raise SpecError(f"backbone kind must be one of {BACKBONE_KINDS}")
        if self.hidden < 1:
            raise SpecError("hidden width must be >= 1")
        if self.layers != 2:
            raise SpecError("only 2-layer backbones are supported")
        if not (0.0 <= self.dropout < 1.0):
            raise SpecError("dropout must lie in [0, 1)")


@dataclass(frozen=True)
class TrainConfig:
    beta: float = 1.0
    gamma: float = 1.0
    epochs: int = 200
    lr: float = 0.01
    weight_decay: float = 5e-4
    lcc_start_epoch: int = 20
    lcc_refresh_every: int = 10
    seed: int = 0
    ablations: tuple = ()
    fusion_on_probs: bool = False   # feed softmax(P) instead of logits to fusion

    def __post_init__(self):
        if self.beta < 0 or self.gamma < 0:
            raise SpecError("loss weights must be >= 0")
        if self.epochs < 1 or self.lr <= 0 or self.weight_decay < 0:
            raise SpecError("bad optimizer settings")
        if not (0 <= self.lcc_start_epoch <= self.epochs):
            raise SpecError("lcc_start_epoch must lie in [0, epochs]")
        if self.lcc_refresh_every < 1:
            raise SpecError("lcc_refresh_every must be >= 1")
        bad = set(self.ablations) - set(ABLATION_FLAGS)
        if bad:
            raise SpecError(f"unknown ablation flags {sorted(bad)}")

    def has(self, flag):
        return flag in self.ablations


@dataclass
class TrainReport:
    config: dict
    loss_total: list = field(default_factory=list)
    loss_train: list = field(default_factory=list)
    loss_anchor: list = field(default_factory=list)
    loss_lcc: list = field(default_factory=list)
    val_acc: list = field(default_factory=list)
    test_acc: list = field(default_factory=list)
    mean_alpha: list = field(default_factory=list)
    lcc_size: list = field(default_factory=list)
    best_epoch: int = -1
    best_val_acc: float = 0.0
    test_acc_at_best: float = 0.0
    predictions_fuse: np.ndarray | None = None   # argmax at best epoch
    predictions_model: np.ndarray | None = None  # vanilla-channel argmax
    threads: str = ""


def report_to_json(report: TrainReport) -> str:
    payload = {k: v for k, v in report.__dict__.items()
               if not k.startswith("predictions")}
    for name in ("predictions_fuse", "predictions_model"):
        arr = getattr(report, name)
        payload[name] = None if arr is None else [int(x) for x in arr]
    return json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"


def report_to_csv(report: TrainReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["epoch", "loss_total", "loss_train", "loss_anchor",
                     "loss_lcc", "val_acc", "test_acc", "mean_alpha",
                     "lcc_size"])
    for e in range(len(report.loss_total)):
        writer.writerow([
            e,
            repr(report.loss_total[e]), repr(report.loss_train[e]),
            repr(report.loss_anchor[e]), repr(report.loss_lcc[e]),
            repr(report.val_acc[e]), repr(report.test_acc[e]),
            repr(report.mean_alpha[e]), report.lcc_size[e],
        ])
    return buf.getvalue()


# --- primitives ---------------------------------------------------------

def normalized_adjacency(num_nodes, edges):
    """Symmetric-normalized adjacency with self-loops as CSR."""
    u, v = edges[:, 0], edges[:, 1]
    loops = np.arange(num_nodes, dtype=np.int64)
    rows = np.concatenate([u, v, loops])
    cols = np.concatenate([v, u, loops])
    vals = np.ones(len(rows), dtype=np.float64)
    adj = sp.csr_matrix((vals, (rows, cols)), shape=(num_nodes, num_nodes))
    deg = np.asarray(adj.sum(axis=1)).ravel()
    inv_sqrt = 1.0 / np.sqrt(deg)
    return sp.diags(inv_sqrt) @ adj @ sp.diags(inv_sqrt)


def glorot(rng, shape):
    limit = np.sqrt(6.0 / (shape[0] + shape[1]))
    return rng.uniform(-limit, limit, size=shape)


def init_backbone_params(rng, d, hidden, c):
    return {
        "W1": glorot(rng, (d, hidden)),
        "b1": np.zeros(hidden),
        "W2": glorot(rng, (hidden, c)),
        "b2": np.zeros(c),
    }


def init_fusion_params(rng, c, hidden=FUSION_HIDDEN):
    return {
        "FW1": glorot(rng, (c, hidden)),
        "FW2": glorot(rng, (hidden, 1)),
    }


def draw_dropout_mask(rng, shape, rate):
    if rate == 0.0:
        return None
    return (rng.random(shape) >= rate).astype(np.float64) / (1.0 - rate)


def forward_backbone(params, prop, features_prop, mask=None):
    """Two-layer forward.  `prop` is the CSR propagation matrix or None
    (MLP); `features_prop` is prop @ X precomputed (or X itself for MLP).
    Returns logits and the cache needed for the backward pass."""
    if features_prop.shape[1] != params["W1"].shape[0]:
        raise ModelError("feature width does not match W1")
    A1 = features_prop @ params["W1"] + params["b1"]
    H = np.maximum(A1, 0.0)
    Hd = H if mask is None else H * mask
    M = Hd if prop is None else prop @ Hd
    Z = M @ params["W2"] + params["b2"]
    return Z, {"A1": A1, "Hd": Hd, "M": M, "mask": mask, "prop": prop,
               "N": features_prop}


def _backward_backbone(params, cache, dZ):
    grads = {}
    grads["W2"] = cache["M"].T @ dZ
    grads["b2"] = dZ.sum(axis=0)
    dM = dZ @ params["W2"].T
    dHd = dM if cache["prop"] is None else cache["prop"] @ dM
    dH = dHd if cache["mask"] is None else dHd * cache["mask"]
    dA1 = dH * (cache["A1"] > 0.0)
    grads["W1"] = cache["N"].T @ dA1
    grads["b1"] = dA1.sum(axis=0)
    return grads


def ce_loss_and_grad(Z, ids, labels):
    """Mean cross-entropy over the support plus dLoss/dZ (zero off-support).
    Empty support -> (0.0, None)."""
    if len(ids) == 0:
        return 0.0, None
    rows = Z[ids]
    shifted = rows - rows.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1))
    y = labels
    loss = float(np.mean(lse - shifted[np.arange(len(ids)), y]))
    probs = np.exp(shifted - lse[:, None])
    probs[np.arange(len(ids)), y] -= 1.0
    dZ = np.zeros_like(Z)
    dZ[ids] = probs / len(ids)
    return loss, dZ


def _fusion_scores(P, fusion):
    T = np.tanh(P @ fusion["FW1"])
    s = (T @ fusion["FW2"]).ravel()
    return T, s


def fuse(P, P_aug, fusion, on_probs=False):
    """Node-wise attention blend of the two channels.

    Returns (P_fuse, alpha, cache).  alpha = sigma(s - s_aug) which equals
    exp(s) / (exp(s) + exp(s_aug)) computed stably.
    """
    if P.shape != P_aug.shape:
        raise ModelError("channel shapes differ")
    In = _softmax(P) if on_probs else P
    In_aug = _softmax(P_aug) if on_probs else P_aug
    T, s = _fusion_scores(In, fusion)
    T_aug, s_aug = _fusion_scores(In_aug, fusion)
    diff = s - s_aug
    alpha = np.where(diff >= 0, 1.0 / (1.0 + np.exp(-diff)),
                     np.exp(diff) / (1.0 + np.exp(diff)))
    P_fuse = alpha[:, None] * P + (1.0 - alpha)[:, None] * P_aug
    cache = {"T": T, "T_aug": T_aug, "alpha": alpha, "In": In,
             "In_aug": In_aug, "on_probs": on_probs}
    return P_fuse, alpha, cache


def _softmax(Z):
    shifted = Z - Z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def backward_fuse(P, P_aug, fusion, cache, dPf):
    """Backward through the blend.  Returns (dP, dP_aug, fusion grads)."""
    alpha = cache["alpha"]
    w2 = fusion["FW2"].ravel()
    dalpha = np.einsum("ij,ij->i", dPf, P - P_aug)
    dgate = dalpha * alpha * (1.0 - alpha)      # d/ds of sigmoid(s - s_aug)
    ds, ds_aug = dgate, -dgate

    def channel(In, T, dsc):
        # s = tanh(In FW1) . FW2
        core = (1.0 - T * T) * w2[None, :] * dsc[:, None]
        dFW1 = In.T @ core
        dFW2 = (T * dsc[:, None]).sum(axis=0)[:, None]
        dIn = core @ fusion["FW1"].T
        return dIn, dFW1, dFW2

    dIn, g1, g2 = channel(cache["In"], cache["T"], ds)
    dIn_aug, g1a, g2a = channel(cache["In_aug"], cache["T_aug"], ds_aug)
    fgrads = {"FW1": g1 + g1a, "FW2": g2 + g2a}
    if cache["on_probs"]:
        dIn = _softmax_backward(cache["In"], dIn)
        dIn_aug = _softmax_backward(cache["In_aug"], dIn_aug)
    dP = alpha[:, None] * dPf + dIn
    dP_aug = (1.0 - alpha)[:, None] * dPf + dIn_aug
    return dP, dP_aug, fgrads


def _softmax_backward(probs, dprobs):
    dot = np.einsum("ij,ij->i", dprobs, probs)
    return probs * (dprobs - dot[:, None])


def adam_step(params, grads, moments, t, lr, weight_decay,
              beta1=0.9, beta2=0.999, eps=1e-8):
    for name, theta in params.items():
        g = grads.get(name)
        g = weight_decay * theta if g is None else g + weight_decay * theta
        m, v = moments[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        mhat = m / (1.0 - beta1 ** t)
        vhat = v / (1.0 - beta2 ** t)
        theta -= lr * mhat / (np.sqrt(vhat) + eps)


def init_moments(params):
    return {k: (np.zeros_like(p), np.zeros_like(p)) for k, p in params.items()}


def _accuracy(pred, labels, ids):
    if len(ids) == 0:
        return 0.0
    return float(np.mean(pred[ids] == labels[ids]))


def _threads_note():
    return os.environ.get("OMP_NUM_THREADS", "unset")


# --- training loops -----------------------------------------------------

def _channel_inputs(bundle, backbone):
    X = bundle.features.astype(np.float64)
    if backbone.kind == "GCN":
        A = normalized_adjacency(bundle.num_nodes, bundle.edges)
        return A, A @ X
    return None, X


def _aug_channel_inputs(aug_graph, backbone):
    X = aug_graph.feature_matrix().astype(np.float64)
    if backbone.kind == "GCN":
        A = normalized_adjacency(aug_graph.num_nodes, aug_graph.all_edges())
        return A, A @ X
    return None, X


def train_backbone_only(bundle: GraphBundle, cfg: TrainConfig,
                        backbone: BackboneSpec) -> TrainReport:
    """Plain two-layer backbone trained on the vanilla graph.  The reference
    the fully-ablated trainer must reproduce bitwise."""
    prop, N = _channel_inputs(bundle, backbone)
    rng_init = np.random.default_rng([cfg.seed, _SEED_INIT])
    rng_drop = np.random.default_rng([cfg.seed, _SEED_DROPOUT])
    params = init_backbone_params(rng_init, bundle.feature_dim,
                                  backbone.hidden, bundle.num_classes)
    moments = init_moments(params)
    train_ids = bundle.mask("train")
    val_ids, test_ids = bundle.mask("val"), bundle.mask("test")
    y_train = bundle.labels[train_ids]
    report = TrainReport(config={"cfg": asdict(cfg),
                                 "backbone": asdict(backbone),
                                 "mode": "backbone_only"},
                         threads=_threads_note())
    hid_shape = (bundle.num_nodes, backbone.hidden)
    for epoch in range(cfg.epochs):
        mask = draw_dropout_mask(rng_drop, hid_shape, backbone.dropout)
        Z, cache = forward_backbone(params, prop, N, mask)
        loss, dZ = ce_loss_and_grad(Z, train_ids, y_train)
        if not np.isfinite(loss):
            raise TrainError(f"non-finite loss at epoch {epoch}", epoch=epoch)
        grads = _backward_backbone(params, cache, dZ)
        adam_step(params, grads, moments, epoch + 1, cfg.lr, cfg.weight_decay)
        Z_eval, _ = forward_backbone(params, prop, N, None)
        pred = Z_eval.argmax(axis=1)
        va = _accuracy(pred, bundle.labels, val_ids)
        ta = _accuracy(pred, bundle.labels, test_ids)
        report.loss_total.append(loss)
        report.loss_train.append(loss)
        report.loss_anchor.append(0.0)
        report.loss_lcc.append(0.0)
        report.val_acc.append(va)
        report.test_acc.append(ta)
        report.mean_alpha.append(0.5)
        report.lcc_size.append(0)
        if va > report.best_val_acc or report.best_epoch < 0:
            report.best_epoch = epoch
            report.best_val_acc = va
            report.test_acc_at_best = ta
            report.predictions_fuse = pred.copy()
            report.predictions_model = pred.copy()
    return report


def train(bundle: GraphBundle, gb_model: GBModel | None = None,
          aug_graph=None, cfg: TrainConfig = TrainConfig(),
          backbone: BackboneSpec = BackboneSpec()) -> TrainReport:
    no_lcc = cfg.has("no_lcc")
    no_aug = cfg.has("no_augment") or aug_graph is None
    no_par = cfg.has("no_parallel")
    lcc_active = (not no_lcc) and cfg.gamma > 0.0
    if lcc_active and gb_model is None:
        raise ConfigError("consistency loss needs a ball model "
                          "(gamma > 0 without one)")

    n = bundle.num_nodes
    c = bundle.num_classes
    prop_v, N_v = _channel_inputs(bundle, backbone)
    if no_aug:
        prop_a, N_a = prop_v, N_v
        anchor_ids = np.zeros(0, dtype=np.int64)
        anchor_labels = np.zeros(0, dtype=np.int64)
        rows_a = n
    else:
        prop_a, N_a = _aug_channel_inputs(aug_graph, backbone)
        anchor_ids = aug_graph.anchor_ids()
        anchor_labels = aug_graph.anchor_labels()
        rows_a = aug_graph.num_nodes

    rng_init = np.random.default_rng([cfg.seed, _SEED_INIT])
    rng_fusion = np.random.default_rng([cfg.seed, _SEED_FUSION])
    rng_drop = np.random.default_rng([cfg.seed, _SEED_DROPOUT])
    params = init_backbone_params(rng_init, bundle.feature_dim,
                                  backbone.hidden, c)
    fusion = init_fusion_params(rng_fusion, c)
    moments = init_moments(params)
    fmoments = init_moments(fusion)

    train_ids = bundle.mask("train")
    val_ids, test_ids = bundle.mask("val"), bundle.mask("test")
    y_train = bundle.labels[train_ids]
    gbc_pred = predict(gb_model) if (lcc_active and gb_model is not None) \
        else None

    lcc_ids = np.zeros(0, dtype=np.int64)
    lcc_labels = np.zeros(0, dtype=np.int64)
    last_eval_P = None

    report = TrainReport(config={"cfg": asdict(cfg),
                                 "backbone": asdict(backbone),
                                 "mode": "scgnn"},
                         threads=_threads_note())

    for epoch in range(cfg.epochs):
        if (lcc_active and epoch >= cfg.lcc_start_epoch
                and (epoch - cfg.lcc_start_epoch) % cfg.lcc_refresh_every == 0):
            if last_eval_P is not None:
                src = last_eval_P
            elif no_par:
                src = forward_backbone(params, prop_a, N_a, None)[0][:n]
            else:
                src = forward_backbone(params, prop_v, N_v, None)[0]
            model_ls = LabelSet(
                {int(i): int(k) for i, k in enumerate(src.argmax(axis=1))}, n)
            rep = lcc(model_ls, gbc_pred, exclude=train_ids)
            lcc_ids = rep.retained.nodes()
            lcc_labels = rep.retained.labels_for(lcc_ids)

        # training forwards: vanilla first, then augment (fixed RNG order)
        if not no_par:
            mask_v = draw_dropout_mask(rng_drop, (n, backbone.hidden),
                                       backbone.dropout)
            Zv, cache_v = forward_backbone(params, prop_v, N_v, mask_v)
        mask_a = draw_dropout_mask(rng_drop, (rows_a, backbone.hidden),
                                   backbone.dropout)
        Za, cache_a = forward_backbone(params, prop_a, N_a, mask_a)
        P_aug = Za[:n]
        P = Zv if not no_par else P_aug

        P_fuse, alpha, fcache = fuse(P, P_aug, fusion, cfg.fusion_on_probs)

        l_train, dP_train = ce_loss_and_grad(P, train_ids, y_train)
        l_anchor, dZ_anchor = ce_loss_and_grad(
            Za, np.arange(n, rows_a, dtype=np.int64), anchor_labels) \
            if len(anchor_ids) else (0.0, None)
        l_lcc, dPf = ce_loss_and_grad(P_fuse, lcc_ids, lcc_labels) \
            if len(lcc_ids) else (0.0, None)

        total = l_train
        if dZ_anchor is not None:
            total = total + cfg.beta * l_anchor
        if dPf is not None:
            total = total + cfg.gamma * l_lcc
        if not np.isfinite(total):
            raise TrainError(f"non-finite loss at epoch {epoch}", epoch=epoch)

        # accumulate dL/dP and dL/dP_aug
        dP = dP_train if dP_train is not None else None
        dP_aug = None
        fgrads = None
        if dPf is not None:
            dPc, dPac, fgrads = backward_fuse(P, P_aug, fusion, fcache,
                                              cfg.gamma * dPf)
            dP = dPc if dP is None else dP + dPc
            dP_aug = dPac

        grads = None
        if not no_par and dP is not None:
            grads = _backward_backbone(params, cache_v, dP)
        dZa = None
        if no_par and dP is not None:
            dZa = np.zeros_like(Za)
            dZa[:n] += dP
        if dP_aug is not None:
            if dZa is None:
                dZa = np.zeros_like(Za)
            dZa[:n] += dP_aug
        if dZ_anchor is not None:
            if dZa is None:
                dZa = np.zeros_like(Za)
            dZa += cfg.beta * dZ_anchor
        if dZa is not None:
            ag = _backward_backbone(params, cache_a, dZa)
            if grads is None:
                grads = ag
            else:
                grads = {k: grads[k] + ag[k] for k in grads}
        if grads is None:
            grads = {}

        adam_step(params, grads, moments, epoch + 1, cfg.lr, cfg.weight_decay)
        adam_step(fusion, fgrads or {}, fmoments, epoch + 1, cfg.lr,
                  cfg.weight_decay)

        # evaluation pass, dropout off
        Za_e, _ = forward_backbone(params, prop_a, N_a, None)
        Pa_e = Za_e[:n]
        if no_par:
            P_e = Pa_e
        else:
            P_e, _ = forward_backbone(params, prop_v, N_v, None)
        Pf_e, alpha_e, _ = fuse(P_e, Pa_e, fusion, cfg.fusion_on_probs)
        pred_fuse = Pf_e.argmax(axis=1)
        pred_model = P_e.argmax(axis=1)
        va = _accuracy(pred_fuse, bundle.labels, val_ids)
        ta = _accuracy(pred_fuse, bundle.labels, test_ids)
        last_eval_P = P_e

        report.loss_total.append(float(total))
        report.loss_train.append(float(l_train))
        report.loss_anchor.append(float(l_anchor))
        report.loss_lcc.append(float(l_lcc))
        report.val_acc.append(va)
        report.test_acc.append(ta)
        report.mean_alpha.append(float(alpha_e.mean()))
        report.lcc_size.append(int(len(lcc_ids)))
        if va > report.best_val_acc or report.best_epoch < 0:
            report.best_epoch = epoch
            report.best_val_acc = va
            report.test_acc_at_best = ta
            report.predictions_fuse = pred_fuse.copy()
            report.predictions_model = pred_model.copy()
    return report


# --- finite-difference gradient check ------------------------------------

def _static_loss(params, fusion, ctx):
    """Deterministic total loss + grads with dropout off and a frozen
    consistency set; shared by the analytic and numeric sides of the
    gradient check."""
    Zv, cache_v = forward_backbone(params, ctx["prop_v"], ctx["N_v"], None)
    Za, cache_a = forward_backbone(params, ctx["prop_a"], ctx["N_a"], None)
    n = ctx["n"]
    P, P_aug = Zv, Za[:n]
    P_fuse, alpha, fcache = fuse(P, P_aug, fusion, ctx["on_probs"])
    l_train, dP = ce_loss_and_grad(P, ctx["train_ids"], ctx["y_train"])
    anchor_rows = np.arange(n, Za.shape[0], dtype=np.int64)
    l_anchor, dZ_anchor = ce_loss_and_grad(Za, anchor_rows,
                                           ctx["anchor_labels"]) \
        if len(anchor_rows) else (0.0, None)
    l_lcc, dPf = ce_loss_and_grad(P_fuse, ctx["lcc_ids"], ctx["lcc_labels"]) \
        if len(ctx["lcc_ids"]) else (0.0, None)
    beta, gamma = ctx["beta"], ctx["gamma"]
    total = l_train + beta * l_anchor + gamma * l_lcc

    fgrads = {k: np.zeros_like(v) for k, v in fusion.items()}
    dP_acc = dP if dP is not None else np.zeros_like(P)
    dP_aug_acc = np.zeros_like(P_aug)
    if dPf is not None:
        dPc, dPac, fg = backward_fuse(P, P_aug, fusion, fcache, gamma * dPf)
        dP_acc = dP_acc + dPc
        dP_aug_acc = dP_aug_acc + dPac
        fgrads = {k: fgrads[k] + fg[k] for k in fgrads}
    grads = _backward_backbone(params, cache_v, dP_acc)
    dZa = np.zeros_like(Za)
    dZa[:n] += dP_aug_acc
    if dZ_anchor is not None:
        dZa += beta * dZ_anchor
    ag = _backward_backbone(params, cache_a, dZa)
    grads = {k: grads[k] + ag[k] for k in grads}
    return float(total), grads, fgrads


def finite_difference_check(bundle, aug_graph, cfg, backbone,
                            lcc_ids, lcc_labels, eps=1e-3):
    """Max relative error between analytic and central-difference gradients
    for every parameter tensor."""
    prop_v, N_v = _channel_inputs(bundle, backbone)
    if aug_graph is not None:
        prop_a, N_a = _aug_channel_inputs(aug_graph, backbone)
        anchor_labels = aug_graph.anchor_labels()
    else:
        prop_a, N_a = prop_v, N_v
        anchor_labels = np.zeros(0, dtype=np.int64)
    train_ids = bundle.mask("train")
    ctx = {
        "prop_v": prop_v, "N_v": N_v, "prop_a": prop_a, "N_a": N_a,
        "n": bundle.num_nodes, "train_ids": train_ids,
        "y_train": bundle.labels[train_ids],
        "anchor_labels": anchor_labels,
        "lcc_ids": np.asarray(lcc_ids, dtype=np.int64),
        "lcc_labels": np.asarray(lcc_labels, dtype=np.int64),
        "beta": cfg.beta, "gamma": cfg.gamma,
        "on_probs": cfg.fusion_on_probs,
    }
    rng_init = np.random.default_rng([cfg.seed, _SEED_INIT])
    rng_fusion = np.random.default_rng([cfg.seed, _SEED_FUSION])
    params = init_backbone_params(rng_init, bundle.feature_dim,
                                  backbone.hidden, bundle.num_classes)
    fusion = init_fusion_params(rng_fusion, bundle.num_classes)

    _, grads, fgrads = _static_loss(params, fusion, ctx)
    analytic = {**grads, **fgrads}
    errors = {}
    for group in (params, fusion):
        for name, theta in group.items():
            numeric = np.zeros_like(theta)
            flat = theta.ravel()
            num_flat = numeric.ravel()
            for i in range(flat.size):
                keep = flat[i]
                flat[i] = keep + eps
                up, _, _ = _static_loss(params, fusion, ctx)
                flat[i] = keep - eps
                dn, _, _ = _static_loss(params, fusion, ctx)
                flat[i] = keep
                num_flat[i] = (up - dn) / (2.0 * eps)
            a = analytic[name]
            denom = max(np.linalg.norm(a), np.linalg.norm(numeric), 1e-12)
            errors[name] = float(np.linalg.norm(a - numeric) / denom)
    return errors
