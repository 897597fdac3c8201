"""HTTP facade over the pipeline.

Every endpoint is a thin orchestration of the core modules: load inputs,
run, write outputs + a manifest, return a summary.  Domain errors surface
as JSON bodies carrying the same exit codes the CLI uses.
"""

from __future__ import annotations

import csv
import io
import json
import os

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from . import __version__
from .augment import build_anchors, build_augment, load_augment, save_augment
from .bench import BenchSpec, report_csv, run_bench, slopes_json
from .bundle import (
    LabelSet,
    SyntheticSpec,
    generate_synthetic,
    load_bundle,
    measured_homophily,
    save_bundle,
)
from .errors import ConfigError, GbgnnError, IngestError, SpecError
from .gbc import GBCConfig, build, load_model, predict, save_model
from .lcc import NoiseParams, lcc, r3_closed_form, r3_monte_carlo
from .manifest import MANIFEST_NAME, RunManifest, hash_input, write_manifest
from .schemas import (
    AugmentRequest,
    AugmentResponse,
    BenchRequest,
    BenchResponse,
    GbcRequest,
    GbcResponse,
    HealthResponse,
    LccMeasureRequest,
    LccMeasureResponse,
    LccTheoryRequest,
    LccTheoryResponse,
    LccTheoryRow,
    SweepCell,
    SweepRequest,
    SweepResponse,
    SynthRequest,
    SynthResponse,
    TrainRequest,
    TrainResponse,
)
from .trainer import (
    BackboneSpec,
    TrainConfig,
    report_to_csv,
    report_to_json,
    train,
    train_backbone_only,
)

_STATUS_BY_EXIT = {2: 422, 3: 400, 4: 500}


def _hashes(paths):
    # taken before any outputs are written, so identical reruns record
    # identical manifests
    return {p: hash_input(p) for p in paths}


def _manifest_for(subcommand, config, input_hashes, outputs, seed,
                  notes=None):
    return RunManifest(
        subcommand=subcommand,
        config=config,
        input_hashes=input_hashes,
        outputs=sorted(outputs),
        seed=seed,
        version=__version__,
        notes=notes or {},
    )


def _write_text(path, text):
    with open(path, "w") as fh:
        fh.write(text)
    return path


def create_app() -> FastAPI:
    app = FastAPI(title="gbgnn", version=__version__)

    @app.exception_handler(GbgnnError)
    async def _domain_error(request: Request, exc: GbgnnError):
        return JSONResponse(
            status_code=_STATUS_BY_EXIT.get(exc.exit_code, 500),
            content={"kind": type(exc).__name__, "message": str(exc),
                     "exit_code": exc.exit_code},
        )

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request: Request,
                                exc: RequestValidationError):
        return JSONResponse(
            status_code=422,
            content={"kind": "ValidationError", "message": str(exc.errors()),
                     "exit_code": 2},
        )

    @app.get("/v1/health", response_model=HealthResponse)
    def health():
        return HealthResponse(status="ok", version=__version__)

    @app.post("/v1/synth", response_model=SynthResponse)
    def synth(req: SynthRequest):
        spec = SyntheticSpec(
            n=req.n, d=req.d, c=req.c, cluster_spread=req.cluster_spread,
            homophily=req.homophily, avg_degree=req.avg_degree,
            label_rate=req.label_rate, seed=req.seed,
            val_fraction=req.val_fraction)
        bundle = generate_synthetic(spec)
        save_bundle(bundle, req.out_dir)
        manifest = _manifest_for(
            "synth", req.model_dump(), {}, [req.out_dir], req.seed)
        mpath = write_manifest(manifest,
                               os.path.join(req.out_dir, MANIFEST_NAME))
        return SynthResponse(
            out_dir=req.out_dir, num_nodes=bundle.num_nodes,
            num_edges=len(bundle.edges),
            measured_homophily=measured_homophily(bundle),
            manifest_path=mpath)

    @app.post("/v1/gbc", response_model=GbcResponse)
    def gbc(req: GbcRequest):
        size_limit = req.size_limit
        if isinstance(size_limit, str) and size_limit != "sqrt_n":
            if size_limit.isdigit():
                size_limit = int(size_limit)
            else:
                raise SpecError("size_limit must be 'sqrt_n' or an integer")
        cfg = GBCConfig(
            purity_threshold=req.purity, size_limit_mode=size_limit,
            kmeans_max_iters=req.kmeans_max_iters, kmeans_tol=req.kmeans_tol,
            radius_mode=req.radius_mode,
            purity_denominator=req.purity_denominator, seed=req.seed)
        bundle = load_bundle(req.bundle_dir)
        hashes = _hashes([req.bundle_dir])
        model = build(bundle, cfg)
        out_path = req.out_path or os.path.join(req.bundle_dir,
                                                "gbmodel.json")
        save_model(model, out_path)
        manifest = _manifest_for(
            "gbc", req.model_dump(), hashes, [out_path], req.seed)
        mpath = write_manifest(manifest, out_path + ".manifest.json")
        return GbcResponse(
            model_path=out_path, num_balls=len(model.balls),
            domain_counts=model.domain_counts(),
            build_stats=dict(model.build_stats), manifest_path=mpath)

    @app.post("/v1/augment", response_model=AugmentResponse)
    def augment(req: AugmentRequest):
        bundle = load_bundle(req.bundle_dir)
        model = load_model(req.model_path)
        if model.num_nodes != bundle.num_nodes:
            raise ConfigError("ball model was built over a different graph")
        hashes = _hashes([req.bundle_dir, req.model_path])
        anchors = build_anchors(model, bundle)
        aug = build_augment(model, bundle, anchors, req.bridge_mode,
                            req.bridge_k)
        os.makedirs(req.out_dir, exist_ok=True)
        save_augment(aug, req.out_dir)
        manifest = _manifest_for(
            "augment", req.model_dump(), hashes, [req.out_dir],
            model.config.seed)
        mpath = write_manifest(manifest,
                               os.path.join(req.out_dir, MANIFEST_NAME))
        return AugmentResponse(
            out_dir=req.out_dir, num_anchors=len(anchors),
            projection_edges=len(aug.projection_edges),
            bridging_edges=len(aug.bridging_edges), manifest_path=mpath)

    @app.post("/v1/train", response_model=TrainResponse)
    def train_cmd(req: TrainRequest):
        bundle = load_bundle(req.bundle_dir)
        gb = load_model(req.model_path) if req.model_path else None
        aug = load_augment(req.aug_dir) if req.aug_dir else None
        if aug is not None and aug.base.num_nodes != bundle.num_nodes:
            raise ConfigError("augment graph was built over a different "
                              "graph")
        inputs = [req.bundle_dir]
        if req.model_path:
            inputs.append(req.model_path)
        if req.aug_dir:
            inputs.append(req.aug_dir)
        hashes = _hashes(inputs)
        cfg = TrainConfig(
            beta=req.beta, gamma=req.gamma, epochs=req.epochs, lr=req.lr,
            weight_decay=req.weight_decay,
            lcc_start_epoch=min(req.lcc_start_epoch, req.epochs),
            lcc_refresh_every=req.lcc_refresh_every, seed=req.seed,
            ablations=tuple(req.ablations),
            fusion_on_probs=req.fusion_on_probs)
        backbone = BackboneSpec(kind=req.backbone.kind,
                                hidden=req.backbone.hidden,
                                dropout=req.backbone.dropout)
        if req.backbone_only:
            report = train_backbone_only(bundle, cfg, backbone)
        else:
            report = train(bundle, gb, aug, cfg, backbone)
        os.makedirs(req.out_dir, exist_ok=True)
        report_path = _write_text(os.path.join(req.out_dir, "report.json"),
                                  report_to_json(report))
        csv_path = _write_text(os.path.join(req.out_dir, "report.csv"),
                               report_to_csv(report))
        manifest = _manifest_for(
            "train", req.model_dump(), hashes, [report_path, csv_path],
            req.seed)
        mpath = write_manifest(manifest,
                               os.path.join(req.out_dir, MANIFEST_NAME))
        return TrainResponse(
            report_path=report_path, csv_path=csv_path, manifest_path=mpath,
            best_epoch=report.best_epoch, best_val_acc=report.best_val_acc,
            test_acc_at_best=report.test_acc_at_best,
            final_loss=report.loss_total[-1],
            lcc_size_final=report.lcc_size[-1])

    @app.post("/v1/bench", response_model=BenchResponse)
    def bench(req: BenchRequest):
        spec = BenchSpec(
            sizes=tuple(req.sizes), d=req.d, c=req.c,
            k_for_knn=req.k_for_knn, repeats=req.repeats, seed=req.seed,
            timeout_seconds=req.timeout_seconds)
        report = run_bench(spec)
        os.makedirs(req.out_dir, exist_ok=True)
        csv_path = _write_text(os.path.join(req.out_dir, "bench.csv"),
                               report_csv(report))
        slopes_path = _write_text(os.path.join(req.out_dir, "slopes.json"),
                                  slopes_json(report))
        manifest = _manifest_for(
            "bench", req.model_dump(), {}, [csv_path, slopes_path],
            req.seed)
        mpath = write_manifest(manifest,
                               os.path.join(req.out_dir, MANIFEST_NAME))
        return BenchResponse(
            csv_path=csv_path, slopes_path=slopes_path, manifest_path=mpath,
            slopes=report.slopes,
            medians={f"{m}@{n}": s for (m, n), s in report.medians.items()},
            resident={f"{m}@{n}": b for (m, n), b in report.resident.items()},
            timeouts=report.timeouts)

    @app.post("/v1/lcc/theory", response_model=LccTheoryResponse)
    def lcc_theory(req: LccTheoryRequest):
        r2 = req.r2 if req.r2 is not None else list(req.r1)
        if len(r2) != len(req.r1):
            raise SpecError("r1 and r2 sweeps must have equal length")
        rows = []
        for r1v, r2v in zip(req.r1, r2):
            p = NoiseParams(r1v, r2v, req.c)
            est, stderr = r3_monte_carlo(p, req.trials, req.seed)
            rows.append(LccTheoryRow(
                r1=r1v, r2=r2v, c=req.c, closed_form=r3_closed_form(p),
                mc_estimate=est, mc_stderr=stderr))
        out_path = mpath = None
        if req.out_path:
            buf = io.StringIO()
            writer = csv.writer(buf)
            writer.writerow(["r1", "r2", "c", "closed_form", "mc_estimate",
                             "mc_stderr"])
            for row in rows:
                writer.writerow([row.r1, row.r2, row.c,
                                 repr(row.closed_form),
                                 repr(row.mc_estimate),
                                 repr(row.mc_stderr)])
            out_path = _write_text(req.out_path, buf.getvalue())
            manifest = _manifest_for(
                "lcc-eval", req.model_dump(), {}, [out_path], req.seed)
            mpath = write_manifest(manifest, out_path + ".manifest.json")
        return LccTheoryResponse(rows=rows, out_path=out_path,
                                 manifest_path=mpath)

    @app.post("/v1/lcc/measure", response_model=LccMeasureResponse)
    def lcc_measure(req: LccMeasureRequest):
        bundle = load_bundle(req.bundle_dir)
        gb = load_model(req.model_path)
        if gb.num_nodes != bundle.num_nodes:
            raise ConfigError("ball model was built over a different graph")
        try:
            with open(req.report_path) as fh:
                payload = json.load(fh)
        except OSError as exc:
            raise IngestError(f"cannot read train report: {exc}") from exc
        preds = payload.get("predictions_model")
        if preds is None or len(preds) != bundle.num_nodes:
            raise ConfigError("train report lacks usable predictions")
        hashes = _hashes([req.bundle_dir, req.model_path, req.report_path])
        model_pred = LabelSet({i: int(p) for i, p in enumerate(preds)},
                              bundle.num_nodes)
        gbc_pred = predict(gb)
        # judge only nodes with ground truth, and never the train set
        exclude = set(bundle.mask("train").tolist())
        exclude.update(np.nonzero(bundle.labels < 0)[0].tolist())
        report = lcc(model_pred, gbc_pred, exclude, truth=bundle.labels)
        m = report.measured
        out_path = labels_path = mpath = None
        if req.out_path:
            buf = io.StringIO()
            writer = csv.writer(buf)
            writer.writerow(["n_input", "n_gbc", "n_retained", "coverage",
                             "acc_model", "acc_gbc", "acc_lcc",
                             "noise_model", "noise_gbc", "noise_lcc",
                             "coverage_noise_lcc"])
            writer.writerow([
                report.n_input, report.n_gbc, report.n_retained,
                repr(report.coverage),
                repr(m["model"].conditional_acc),
                repr(m["gbc"].conditional_acc),
                repr(m["lcc"].conditional_acc),
                repr(m["model"].conditional_noise),
                repr(m["gbc"].conditional_noise),
                repr(m["lcc"].conditional_noise),
                repr(m["lcc"].coverage_noise),
            ])
            out_path = _write_text(req.out_path, buf.getvalue())
            lbuf = io.StringIO()
            writer = csv.writer(lbuf)
            writer.writerow(["node", "label"])
            for node in sorted(report.retained.entries):
                writer.writerow([node, report.retained.entries[node]])
            labels_path = _write_text(
                os.path.splitext(req.out_path)[0] + "_labels.csv",
                lbuf.getvalue())
            manifest = _manifest_for(
                "lcc-eval", req.model_dump(), hashes,
                [out_path, labels_path], 0)
            mpath = write_manifest(manifest, out_path + ".manifest.json")
        return LccMeasureResponse(
            n_input=report.n_input, n_gbc=report.n_gbc,
            n_retained=report.n_retained, coverage=report.coverage,
            acc_model=m["model"].conditional_acc,
            acc_gbc=m["gbc"].conditional_acc,
            acc_lcc=m["lcc"].conditional_acc,
            noise_model=m["model"].conditional_noise,
            noise_gbc=m["gbc"].conditional_noise,
            noise_lcc=m["lcc"].conditional_noise,
            coverage_noise_lcc=m["lcc"].coverage_noise,
            out_path=out_path, labels_path=labels_path, manifest_path=mpath)

    @app.post("/v1/sweep", response_model=SweepResponse)
    def sweep(req: SweepRequest):
        bundle = load_bundle(req.bundle_dir)
        gb = load_model(req.model_path) if req.model_path else None
        aug = load_augment(req.aug_dir) if req.aug_dir else None
        backbone = BackboneSpec(kind=req.backbone.kind,
                                hidden=req.backbone.hidden,
                                dropout=req.backbone.dropout)
        inputs = [req.bundle_dir]
        if req.model_path:
            inputs.append(req.model_path)
        if req.aug_dir:
            inputs.append(req.aug_dir)
        hashes = _hashes(inputs)
        cells = []
        for beta in req.betas:
            for gamma in req.gammas:
                # the grid origin is the unenhanced backbone, exactly
                flags = (("no_lcc", "no_augment", "no_parallel")
                         if beta == 0.0 and gamma == 0.0 else ())
                accs = []
                for seed in req.seeds:
                    cfg = TrainConfig(
                        beta=beta, gamma=gamma, epochs=req.epochs,
                        lcc_start_epoch=min(req.lcc_start_epoch, req.epochs),
                        lcc_refresh_every=req.lcc_refresh_every, seed=seed,
                        ablations=flags,
                    )
                    report = train(bundle, gb, aug, cfg, backbone)
                    accs.append(report.test_acc_at_best)
                cells.append(SweepCell(
                    beta=beta, gamma=gamma,
                    mean_test_acc=float(np.mean(accs)),
                    n_seeds=len(req.seeds)))
        os.makedirs(req.out_dir, exist_ok=True)
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["beta", "gamma", "mean_test_acc", "n_seeds"])
        for cell in cells:
            writer.writerow([cell.beta, cell.gamma,
                             repr(cell.mean_test_acc), cell.n_seeds])
        csv_path = _write_text(os.path.join(req.out_dir, "sweep.csv"),
                               buf.getvalue())
        manifest = _manifest_for(
            "sweep", req.model_dump(), hashes, [csv_path],
            req.seeds[0] if req.seeds else 0,
            notes={"seeds": list(req.seeds)})
        mpath = write_manifest(manifest,
                               os.path.join(req.out_dir, MANIFEST_NAME))
        best = max(cells, key=lambda cell: cell.mean_test_acc)
        return SweepResponse(
            csv_path=csv_path, manifest_path=mpath, cells=cells,
            best_beta=best.beta, best_gamma=best.gamma,
            best_mean_test_acc=best.mean_test_acc)

    return app


app = create_app()
