"""Request/response models for the HTTP service.

Paths in requests are resolved on the host running the service; the CLI
talks to an in-process app by default, so they are ordinary local paths.
"""

from __future__ import annotations

from typing import List, Optional, Union

from pydantic import BaseModel, Field


class SynthRequest(BaseModel):
    out_dir: str
    n: int = Field(ge=4)
    d: int = Field(ge=1)
    c: int = Field(ge=2)
    cluster_spread: float = 1.0
    homophily: float = Field(default=0.8, ge=0.0, le=1.0)
    avg_degree: float = 8.0
    label_rate: float = Field(default=0.05, gt=0.0, le=1.0)
    seed: int = 0
    val_fraction: float = Field(default=0.5, ge=0.0, le=1.0)


class SynthResponse(BaseModel):
    out_dir: str
    num_nodes: int
    num_edges: int
    measured_homophily: float
    manifest_path: str


class GbcRequest(BaseModel):
    bundle_dir: str
    out_path: Optional[str] = None          # default <bundle_dir>/gbmodel.json
    purity: float = 0.8
    size_limit: Union[int, str] = "sqrt_n"
    kmeans_max_iters: int = 50
    kmeans_tol: float = 1e-4
    radius_mode: str = "mean_distance"
    purity_denominator: str = "labeled_only"
    seed: int = 0


class GbcResponse(BaseModel):
    model_path: str
    num_balls: int
    domain_counts: dict
    build_stats: dict
    manifest_path: str


class AugmentRequest(BaseModel):
    bundle_dir: str
    model_path: str
    out_dir: str
    bridge_mode: str = "full"
    bridge_k: Optional[int] = None


class AugmentResponse(BaseModel):
    out_dir: str
    num_anchors: int
    projection_edges: int
    bridging_edges: int
    manifest_path: str


class BackboneModel(BaseModel):
    kind: str = "GCN"
    hidden: int = 64
    dropout: float = 0.5


class TrainRequest(BaseModel):
    bundle_dir: str
    out_dir: str
    model_path: Optional[str] = None
    aug_dir: Optional[str] = None
    beta: float = 1.0
    gamma: float = 1.0
    epochs: int = 200
    lr: float = 0.01
    weight_decay: float = 5e-4
    lcc_start_epoch: int = 20
    lcc_refresh_every: int = 10
    seed: int = 0
    ablations: List[str] = []
    backbone: BackboneModel = BackboneModel()
    backbone_only: bool = False
    fusion_on_probs: bool = False


class TrainResponse(BaseModel):
    report_path: str
    csv_path: str
    manifest_path: str
    best_epoch: int
    best_val_acc: float
    test_acc_at_best: float
    final_loss: float
    lcc_size_final: int


class BenchRequest(BaseModel):
    out_dir: str
    sizes: List[int] = [2000, 8000, 32000]
    d: int = 32
    c: int = 3
    k_for_knn: int = 5
    repeats: int = 3
    seed: int = 0
    timeout_seconds: float = 600.0


class BenchResponse(BaseModel):
    csv_path: str
    slopes_path: str
    manifest_path: str
    slopes: dict
    medians: dict
    resident: dict
    timeouts: list


class LccTheoryRequest(BaseModel):
    r1: List[float]
    r2: Optional[List[float]] = None        # defaults to r1 (symmetric sweep)
    c: int = 7
    trials: int = 1_000_000
    seed: int = 0
    out_path: Optional[str] = None


class LccTheoryRow(BaseModel):
    r1: float
    r2: float
    c: int
    closed_form: float
    mc_estimate: float
    mc_stderr: float


class LccTheoryResponse(BaseModel):
    rows: List[LccTheoryRow]
    out_path: Optional[str] = None
    manifest_path: Optional[str] = None


class LccMeasureRequest(BaseModel):
    bundle_dir: str
    model_path: str                          # ball model
    report_path: str                         # train report JSON
    out_path: Optional[str] = None


class LccMeasureResponse(BaseModel):
    n_input: int
    n_gbc: int
    n_retained: int
    coverage: float
    acc_model: float
    acc_gbc: float
    acc_lcc: float
    noise_model: float
    noise_gbc: float
    noise_lcc: float
    coverage_noise_lcc: float
    out_path: Optional[str] = None
    labels_path: Optional[str] = None
    manifest_path: Optional[str] = None


class SweepRequest(BaseModel):
    bundle_dir: str
    out_dir: str
    model_path: Optional[str] = None
    aug_dir: Optional[str] = None
    betas: List[float] = [0.0, 0.25, 0.5, 1.0, 2.0]
    gammas: List[float] = [0.0, 0.25, 0.5, 1.0, 2.0]
    seeds: List[int] = [0, 1, 2]
    epochs: int = 60
    lcc_start_epoch: int = 20
    lcc_refresh_every: int = 10
    backbone: BackboneModel = BackboneModel()


class SweepCell(BaseModel):
    beta: float
    gamma: float
    mean_test_acc: float
    n_seeds: int


class SweepResponse(BaseModel):
    csv_path: str
    manifest_path: str
    cells: List[SweepCell]
    best_beta: float
    best_gamma: float
    best_mean_test_acc: float


class HealthResponse(BaseModel):
    status: str
    version: str


class ErrorBody(BaseModel):
    kind: str
    message: str
    exit_code: int
