"""Label consistency checking and its noise-rate analysis.

Two independent predictors with symmetric noise rates R1, R2 over c classes
agree either when both are right or when both land on the same wrong class;
keeping only agreements drops the noise rate to

    R3 = (R1 R2 / (c-1)) / ((1-R1)(1-R2) + R1 R2 / (c-1))

which is quadratic in the input rates instead of linear.  `lcc` applies the
check to concrete label sets; `r3_monte_carlo` is the independent simulation
oracle for the closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bundle import LabelSet
from .errors import OracleError, SpecError

_MC_BATCH = 1 << 20


@dataclass(frozen=True)
class NoiseParams:
    r1: float
    r2: float
    c: int

    def __post_init__(self):
        if not (0.0 <= self.r1 < 1.0 and 0.0 <= self.r2 < 1.0):
            raise SpecError("noise rates must lie in [0, 1)")
        if self.c < 2:
            raise SpecError("need at least 2 classes")


@dataclass(frozen=True)
class PredictorStats:
    """Accuracy/noise of one predictor against ground truth.

    conditional_* divide by the predictor's own defined set; coverage_noise
    divides by the full eligible universe.
    """

    defined: int
    correct: int
    conditional_acc: float
    conditional_noise: float
    coverage_noise: float


@dataclass(frozen=True)
class LccReport:
    retained: LabelSet
    n_input: int      # eligible nodes with a model prediction
    n_gbc: int        # of those, nodes with a ball prediction
    n_retained: int   # agreements kept
    measured: dict | None = None   # keys model/gbc/lcc when truth was given

    @property
    def coverage(self):
        return self.n_retained / self.n_input if self.n_input else 0.0


def _stats(pred_entries, eligible, truth, universe_size):
    defined = 0
    correct = 0
    for node, cls in pred_entries.items():
        if node in eligible:
            defined += 1
            if truth[node] == cls:
                correct += 1
    acc = correct / defined if defined else 0.0
    return PredictorStats(
        defined=defined,
        correct=correct,
        conditional_acc=acc,
        conditional_noise=1.0 - acc if defined else 0.0,
        coverage_noise=(defined - correct) / universe_size
        if universe_size else 0.0,
    )


def lcc(model_pred: LabelSet, gbc_pred: LabelSet, exclude=(),
        truth=None) -> LccReport:
    """Keep nodes where both predictors agree, dropping the exclude set
    (the train nodes, so retained labels are additional supervision)."""
    exclude = set(int(i) for i in exclude)
    eligible = {i for i in model_pred.entries if i not in exclude}
    retained = {}
    n_gbc = 0
    for node, cls in gbc_pred.entries.items():
        if node not in eligible:
            continue
        n_gbc += 1
        if model_pred.entries[node] == cls:
            retained[node] = cls
    report_sets = None
    if truth is not None:
        truth = np.asarray(truth)
        n_eligible = len(eligible)
        report_sets = {
            "model": _stats(model_pred.entries, eligible, truth, n_eligible),
            "gbc": _stats(gbc_pred.entries, eligible, truth, n_eligible),
            "lcc": _stats(retained, eligible, truth, n_eligible),
        }
    return LccReport(
        retained=LabelSet(retained, model_pred.universe),
        n_input=len(eligible),
        n_gbc=n_gbc,
        n_retained=len(retained),
        measured=report_sets,
    )


def r3_closed_form(p: NoiseParams) -> float:
    """Noise rate among agreements of two independent symmetric-noise
    predictors."""
    coincide = p.r1 * p.r2 / (p.c - 1)
    agree = (1.0 - p.r1) * (1.0 - p.r2) + coincide
    return coincide / agree


def r3_monte_carlo(p: NoiseParams, trials: int, seed: int = 0):
    """Simulate the two predictors; among agreeing trials return the noisy
    fraction and its binomial standard error."""
    if trials < 10_000:
        raise SpecError("need at least 1e4 trials for a usable estimate")
    n_agree = 0
    n_noisy = 0
    done = 0
    batch_idx = 0
    while done < trials:
        m = min(_MC_BATCH, trials - done)
        rng = np.random.default_rng([seed, batch_idx])
        true = rng.integers(0, p.c, size=m)
        preds = []
        for rate in (p.r1, p.r2):
            err = rng.random(m) < rate
            # uniform over the c-1 wrong classes via a nonzero cyclic shift
            shift = rng.integers(1, p.c, size=m)
            preds.append(np.where(err, (true + shift) % p.c, true))
        agree = preds[0] == preds[1]
        n_agree += int(agree.sum())
        n_noisy += int((agree & (preds[0] != true)).sum())
        done += m
        batch_idx += 1
    if n_agree == 0:
        raise OracleError("no agreeing trials; cannot estimate R3")
    est = n_noisy / n_agree
    stderr = math.sqrt(max(est * (1.0 - est), 1e-300) / n_agree)
    return est, stderr


def inject_symmetric_noise(truth, rate, num_classes, rng):
    """Corrupt each label independently with probability `rate`, flipping to
    one of the other classes uniformly."""
    truth = np.asarray(truth, dtype=np.int64)
    err = rng.random(len(truth)) < rate
    shift = rng.integers(1, num_classes, size=len(truth))
    return np.where(err, (truth + shift) % num_classes, truth)
