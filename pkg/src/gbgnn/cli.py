"""Command-line client.

Every subcommand posts one request to the service; by default the app is
mounted in-process, so no server needs to be running.  ``--server URL``
points the same commands at a remote instance.

Precedence for request fields: explicit flags > ``--config`` file >
built-in defaults.  The config file is flat ``key = value`` lines with
``#`` comments; keys use the payload field names (dashes allowed).
"""

from __future__ import annotations

import argparse
import asyncio
import json
import os
import sys

import httpx

from .errors import ConfigError, GbgnnError

_ABLATIONS = ("no_lcc", "no_augment", "no_parallel")


# --------------------------------------------------------------------------
# config file


def _parse_value(raw):
    raw = raw.strip()
    try:
        return json.loads(raw)
    except ValueError:
        pass
    if "," in raw:
        return [_parse_value(part) for part in raw.split(",")]
    return raw


def load_config(path):
    """Flat key=value file -> dict; values are parsed as JSON when possible."""
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    values = {}
    for lineno, line in enumerate(lines, 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, _, raw = stripped.partition("=")
        values[key.strip().replace("-", "_")] = _parse_value(raw)
    return values


def _merge_config(args, values):
    # flags win; config only fills fields the user left unset
    for key, value in values.items():
        if hasattr(args, key) and getattr(args, key) is None:
            setattr(args, key, value)


# --------------------------------------------------------------------------
# transport


def _request(server, path, payload):
    if server:
        with httpx.Client(base_url=server, timeout=None) as client:
            resp = client.post(path, json=payload)
            return resp.status_code, resp.json()

    from .service import app

    async def go():
        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(transport=transport,
                                     base_url="http://gbgnn.local",
                                     timeout=None) as client:
            return await client.post(path, json=payload)

    resp = asyncio.run(go())
    return resp.status_code, resp.json()


def _payload(args, keys):
    out = {}
    for key in keys:
        value = getattr(args, key)
        if value is not None:
            out[key] = value
    return out


def _backbone_payload(args):
    sub = {}
    if args.backbone is not None:
        sub["kind"] = args.backbone
    if args.hidden is not None:
        sub["hidden"] = args.hidden
    if args.dropout is not None:
        sub["dropout"] = args.dropout
    return sub


# --------------------------------------------------------------------------
# subcommand wiring


def _add_backbone_flags(p):
    p.add_argument("--backbone", choices=("MLP", "GCN"))
    p.add_argument("--hidden", type=int)
    p.add_argument("--dropout", type=float)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gbgnn",
        description="Granular-ball guided GNN training pipeline.")
    parser.add_argument("--server", help="remote service URL "
                        "(default: run in-process)")
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("--json", action="store_true",
                        help="print the full JSON response")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("synth", help="generate a synthetic graph bundle")
    p.add_argument("out_dir")
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--c", type=int)
    p.add_argument("--cluster-spread", dest="cluster_spread", type=float)
    p.add_argument("--homophily", type=float)
    p.add_argument("--avg-degree", dest="avg_degree", type=float)
    p.add_argument("--label-rate", dest="label_rate", type=float)
    p.add_argument("--val-fraction", dest="val_fraction", type=float)
    p.add_argument("--seed", type=int)
    p.set_defaults(build=lambda a, pr: ("/v1/synth", _payload(a, [
        "out_dir", "n", "d", "c", "cluster_spread", "homophily",
        "avg_degree", "label_rate", "val_fraction", "seed"])))

    p = sub.add_parser("gbc", help="build the granular-ball model")
    p.add_argument("bundle_dir")
    p.add_argument("--out", dest="out_path")
    p.add_argument("--purity", type=float)
    p.add_argument("--size-limit", dest="size_limit",
                   help="'sqrt_n' or an integer cap")
    p.add_argument("--kmeans-max-iters", dest="kmeans_max_iters", type=int)
    p.add_argument("--kmeans-tol", dest="kmeans_tol", type=float)
    p.add_argument("--radius-mode", dest="radius_mode",
                   choices=("mean_distance", "max_distance"))
    p.add_argument("--purity-denominator", dest="purity_denominator",
                   choices=("labeled_only", "all_members"))
    p.add_argument("--seed", type=int)
    p.set_defaults(build=lambda a, pr: ("/v1/gbc", _payload(a, [
        "bundle_dir", "out_path", "purity", "size_limit",
        "kmeans_max_iters", "kmeans_tol", "radius_mode",
        "purity_denominator", "seed"])))

    p = sub.add_parser("augment", help="build anchors and the augmented "
                       "graph")
    p.add_argument("bundle_dir")
    p.add_argument("--model", dest="model_path",
                   help="ball model path (default <bundle>/gbmodel.json)")
    p.add_argument("--out", dest="out_dir", required=True)
    p.add_argument("--bridge-mode", dest="bridge_mode",
                   choices=("full", "random_k"))
    p.add_argument("--bridge-k", dest="bridge_k", type=int)
    p.set_defaults(build=_build_augment)

    p = sub.add_parser("train", help="train a backbone with the "
                       "enhancement losses")
    p.add_argument("bundle_dir")
    p.add_argument("--out", dest="out_dir", required=True)
    p.add_argument("--model", dest="model_path")
    p.add_argument("--aug", dest="aug_dir")
    p.add_argument("--beta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--weight-decay", dest="weight_decay", type=float)
    p.add_argument("--lcc-start-epoch", dest="lcc_start_epoch", type=int)
    p.add_argument("--lcc-refresh-every", dest="lcc_refresh_every",
                   type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--ablate", action="append", choices=_ABLATIONS,
                   help="repeatable; disable one pipeline stage")
    p.add_argument("--backbone-only", dest="backbone_only",
                   action="store_true", default=None,
                   help="plain backbone baseline, no enhancement")
    p.add_argument("--fusion-on-probs", dest="fusion_on_probs",
                   action="store_true", default=None)
    _add_backbone_flags(p)
    p.set_defaults(build=_build_train)

    p = sub.add_parser("bench", help="scaling benchmark: ball build vs "
                       "brute-force kNN")
    p.add_argument("out_dir")
    p.add_argument("--sizes", type=int, nargs="+")
    p.add_argument("--d", type=int)
    p.add_argument("--c", type=int)
    p.add_argument("--k", dest="k_for_knn", type=int)
    p.add_argument("--repeats", type=int)
    p.add_argument("--timeout", dest="timeout_seconds", type=float)
    p.add_argument("--seed", type=int)
    p.set_defaults(build=lambda a, pr: ("/v1/bench", _payload(a, [
        "out_dir", "sizes", "d", "c", "k_for_knn", "repeats",
        "timeout_seconds", "seed"])))

    p = sub.add_parser("lcc-eval", help="label-consistency noise: closed "
                       "form vs Monte Carlo, or measured on a run")
    p.add_argument("--mode", choices=("theory", "measure"), required=True)
    p.add_argument("bundle_dir", nargs="?")
    p.add_argument("--r1", type=float, nargs="+")
    p.add_argument("--r2", type=float, nargs="+")
    p.add_argument("--c", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--model", dest="model_path")
    p.add_argument("--report", dest="report_path",
                   help="train report JSON (measure mode)")
    p.add_argument("--out", dest="out_path")
    p.set_defaults(build=_build_lcc_eval)

    p = sub.add_parser("sweep", help="beta x gamma accuracy surface")
    p.add_argument("bundle_dir")
    p.add_argument("--out", dest="out_dir", required=True)
    p.add_argument("--model", dest="model_path")
    p.add_argument("--aug", dest="aug_dir")
    p.add_argument("--betas", type=float, nargs="+")
    p.add_argument("--gammas", type=float, nargs="+")
    p.add_argument("--seeds", type=int, nargs="+")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lcc-start-epoch", dest="lcc_start_epoch", type=int)
    p.add_argument("--lcc-refresh-every", dest="lcc_refresh_every",
                   type=int)
    _add_backbone_flags(p)
    p.set_defaults(build=_build_sweep)

    return parser


def _build_augment(args, parser):
    if args.model_path is None:
        args.model_path = os.path.join(args.bundle_dir, "gbmodel.json")
    return "/v1/augment", _payload(args, [
        "bundle_dir", "model_path", "out_dir", "bridge_mode", "bridge_k"])


def _build_train(args, parser):
    payload = _payload(args, [
        "bundle_dir", "out_dir", "model_path", "aug_dir", "beta", "gamma",
        "epochs", "lr", "weight_decay", "lcc_start_epoch",
        "lcc_refresh_every", "seed", "backbone_only", "fusion_on_probs"])
    backbone = _backbone_payload(args)
    if backbone:
        payload["backbone"] = backbone
    if args.ablate:
        payload["ablations"] = args.ablate
    return "/v1/train", payload


def _build_lcc_eval(args, parser):
    if args.mode == "theory":
        if args.r1 is None:
            parser.error("theory mode requires --r1")
        return "/v1/lcc/theory", _payload(args, [
            "r1", "r2", "c", "trials", "seed", "out_path"])
    if not args.bundle_dir:
        parser.error("measure mode requires a bundle directory")
    if args.report_path is None:
        parser.error("measure mode requires --report")
    if args.model_path is None:
        args.model_path = os.path.join(args.bundle_dir, "gbmodel.json")
    return "/v1/lcc/measure", _payload(args, [
        "bundle_dir", "model_path", "report_path", "out_path"])


def _build_sweep(args, parser):
    payload = _payload(args, [
        "bundle_dir", "out_dir", "model_path", "aug_dir", "betas",
        "gammas", "seeds", "epochs", "lcc_start_epoch",
        "lcc_refresh_every"])
    backbone = _backbone_payload(args)
    if backbone:
        payload["backbone"] = backbone
    return "/v1/sweep", payload


# --------------------------------------------------------------------------
# entry point


def _print_response(body, as_json):
    if as_json:
        print(json.dumps(body, indent=2, sort_keys=True))
        return
    for key, value in body.items():
        if isinstance(value, (dict, list)):
            print(f"{key}: {json.dumps(value)}")
        else:
            print(f"{key}: {value}")


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.config:
            _merge_config(args, load_config(args.config))
        path, payload = args.build(args, parser)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    except GbgnnError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code

    try:
        status, body = _request(args.server, path, payload)
    except httpx.HTTPError as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        return 3

    if 200 <= status < 300:
        _print_response(body, args.json)
        return 0
    if isinstance(body, dict):
        kind = body.get("kind", "Error")
        message = body.get("message", json.dumps(body))
        print(f"{kind}: {message}", file=sys.stderr)
        return int(body.get("exit_code", 4))
    print(f"error: HTTP {status}: {body}", file=sys.stderr)
    return 4


if __name__ == "__main__":
    sys.exit(main())
