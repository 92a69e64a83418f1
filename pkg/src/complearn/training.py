"""Mini-batch training from complementary labels, the supervised baseline,
prediction, and the multi-seed evaluation protocol."""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import (
    ClassPriors,
    ComplementaryDataset,
    OrdinaryDataset,
    builtin_transition,
    class_frequencies,
    complementary_priors,
    corrupt_priors,
    gen_complementary,
    make_gaussian_mixture,
    rng_stream,
)
from .model import ModelConfig, ModelParams, adam_init, adam_step, forward, init_params, ovr_risk_and_grad, risk_and_grad
from .risk import RiskSpec, nu_risk_with_grad, ovr_empirical_risk

__all__ = [
    "TrainConfig",
    "TrainReport",
    "train_conu",
    "train_supervised",
    "predict",
    "accuracy",
    "Experiment",
    "run_trials",
    "aggregate",
    "write_report_csv",
    "write_results_csv",
    "write_summary_csv",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 256
    lr: float = 1e-3
    weight_decay: float = 1e-5
    seed: int = 0
    correction: str = "abs"
    record_batches: bool = False

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")


@dataclass
class TrainReport:
    """Per-epoch full-training-set risk and test accuracy.

    With ``record_batches`` the objective of every mini-batch and the smallest
    positive part ``P_k`` seen in it are kept too.
    """

    train_risk: list = field(default_factory=list)
    test_acc: list = field(default_factory=list)
    batch_risk: list = field(default_factory=list)
    batch_min_positive_part: list = field(default_factory=list)

    def last_k_accuracy(self, k: int = 10) -> float:
        return float(np.mean(self.test_acc[-k:]))


def predict(params: ModelParams, X) -> np.ndarray:
    """Index of the largest score; ties go to the smallest class index."""
    return np.argmax(forward(params, X), axis=1)


def accuracy(params: ModelParams, ds: OrdinaryDataset) -> float:
    return float(np.mean(predict(params, ds.features) == ds.labels))


def _fit(n, step, epoch_end, model_config, cfg: TrainConfig):
    params = init_params(model_config, rng_stream(cfg.seed, "init"))
    theta = params.theta
    state = adam_init(theta.size, cfg.lr, cfg.weight_decay)
    for epoch in range(cfg.epochs):
        order = rng_stream(cfg.seed, "shuffle", epoch).permutation(n)
        for start in range(0, n, cfg.batch_size):
            grad = step(params.with_theta(theta), order[start:start + cfg.batch_size])
            state, theta = adam_step(state, theta, grad)
        epoch_end(params.with_theta(theta))
    return params.with_theta(theta)


def train_conu(cds: ComplementaryDataset, priors: ClassPriors, model_config: ModelConfig,
               train_config: TrainConfig = TrainConfig(), test_set: OrdinaryDataset | None = None):
    """Minimize the corrected risk (or, with ``correction="identity"``, the
    unbiased one) over shuffled mini-batches with Adam."""
    if priors.q != cds.q or model_config.output_dim != cds.q:
        raise ValueError(f"class-count mismatch: data q={cds.q}, priors q={priors.q}, "
                         f"model outputs {model_config.output_dim}")
    if cds.n == 0:
        raise ValueError("empty training set")
    spec = RiskSpec(priors, train_config.correction)
    report = TrainReport()
    X, M = cds.features, cds.comp_labels

    def step(params, idx):
        if train_config.record_batches:
            scores = forward(params, X[idx])
            value, _, pos = nu_risk_with_grad(scores, M[idx], spec)
            report.batch_risk.append(value)
            report.batch_min_positive_part.append(float(pos.min()))
        return risk_and_grad(params, X[idx], M[idx], spec)[1]

    def epoch_end(params):
        report.train_risk.append(nu_risk_with_grad(forward(params, X), M, spec)[0])
        if test_set is not None:
            report.test_acc.append(accuracy(params, test_set))

    params = _fit(cds.n, step, epoch_end, model_config, train_config)
    return params, report


def train_supervised(ds: OrdinaryDataset, model_config: ModelConfig,
                     train_config: TrainConfig = TrainConfig(), test_set: OrdinaryDataset | None = None):
    """Same loop on ordinary labels with the OVR logistic risk."""
    if model_config.output_dim != ds.q:
        raise ValueError(f"model outputs {model_config.output_dim} scores, data has q={ds.q}")
    report = TrainReport()
    X, y = ds.features, ds.labels

    def step(params, idx):
        return ovr_risk_and_grad(params, X[idx], y[idx])[1]

    def epoch_end(params):
        report.train_risk.append(ovr_empirical_risk(forward(params, X), y))
        if test_set is not None:
            report.test_acc.append(accuracy(params, test_set))

    params = _fit(ds.n, step, epoch_end, model_config, train_config)
    return params, report


# -- multi-seed protocol ----------------------------------------------------------------

@dataclass(frozen=True)
class Experiment:
    """Gaussian benchmark, generation settings and methods compared over seeds.

    ``methods`` draw from "conu" (absolute-value correction), "ure" (no
    correction), "relu" (max(0, .) correction) and "supervised".
    ``prior_sigma`` > 0 perturbs the true priors handed to the NU methods;
    ``estimate_priors`` replaces them by estimates from the complementary labels.
    Features stay fixed across seeds; labels, initialization and shuffling vary.
    """

    q: int = 4
    d: int = 2
    separation: float = 6.0
    n_per_class: int = 1000
    test_per_class: int = 500
    settings: tuple = ("uniform",)
    methods: tuple = ("conu", "ure", "supervised")
    hidden: tuple = (64,)
    arch: str = "mlp"
    train: TrainConfig = TrainConfig()
    prior_sigma: float = 0.0
    estimate_priors: bool = False
    data_seed: int = 0
    last_k: int = 10


_CORRECTION = {"conu": "abs", "ure": "identity", "relu": "relu"}


def _one_run(exp: Experiment, train_ds, test_ds, method, setting, seed):
    model_cfg = ModelConfig(exp.d, exp.q, exp.arch, exp.hidden)
    cfg = TrainConfig(exp.train.epochs, exp.train.batch_size, exp.train.lr, exp.train.weight_decay,
                      seed, _CORRECTION.get(method, "abs"))
    if method == "supervised":
        _, report = train_supervised(train_ds, model_cfg, cfg, test_ds)
        return report.last_k_accuracy(exp.last_k)
    spec = builtin_transition(setting, exp.q, class_frequencies(train_ds.labels, exp.q))
    cds = gen_complementary(train_ds, spec, rng_stream(seed, f"labels:{setting}"))
    if exp.estimate_priors:
        from .priors import estimate_priors
        priors = estimate_priors(cds, seed=seed)
    else:
        priors = ClassPriors(class_frequencies(train_ds.labels, exp.q), complementary_priors(cds))
    if exp.prior_sigma > 0:
        priors = corrupt_priors(priors, exp.prior_sigma, rng_stream(seed, "prior-noise"))
    _, report = train_conu(cds, priors, model_cfg, cfg, test_ds)
    return report.last_k_accuracy(exp.last_k)


def run_trials(exp: Experiment, n_seeds: int = 5, jobs: int = 1, seeds=None):
    """Accuracy of every (method, setting, seed); accuracy of a run is the mean
    test accuracy over its last ``exp.last_k`` epochs.

    Returns rows ``(method, setting, seed, acc)`` in deterministic order.
    """
    if n_seeds < 1:
        raise ValueError("n_seeds must be at least 1")
    seeds = list(range(n_seeds)) if seeds is None else list(seeds)
    train_ds = make_gaussian_mixture(exp.q, exp.n_per_class, exp.d, exp.separation, rng_stream(exp.data_seed, "data"))
    test_ds = make_gaussian_mixture(exp.q, exp.test_per_class, exp.d, exp.separation, rng_stream(exp.data_seed, "test"))
    jobs_list = []
    for method in exp.methods:
        # the supervised baseline ignores complementary labels
        for setting in (("-",) if method == "supervised" else exp.settings):
            for seed in seeds:
                jobs_list.append((method, setting, seed))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            accs = list(pool.map(lambda j: _one_run(exp, train_ds, test_ds, *j), jobs_list))
    else:
        accs = [_one_run(exp, train_ds, test_ds, *j) for j in jobs_list]
    for (method, setting, seed), acc in zip(jobs_list, accs):
        log.info("%s %s seed=%d acc=%.4f", method, setting, seed, acc)
    return [(m, s, seed, acc) for (m, s, seed), acc in zip(jobs_list, accs)]


def aggregate(rows):
    """``(method, setting, mean, std)`` per group; std is the sample std (0 for one seed)."""
    groups = {}
    for method, setting, _, acc in rows:
        groups.setdefault((method, setting), []).append(acc)
    out = []
    for (method, setting), accs in groups.items():
        accs = np.asarray(accs)
        std = float(accs.std(ddof=1)) if accs.size > 1 else 0.0
        out.append((method, setting, float(accs.mean()), std))
    return out


def write_report_csv(report: TrainReport, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "train_risk", "test_acc"])
        for e, risk in enumerate(report.train_risk, start=1):
            acc = report.test_acc[e - 1] if e - 1 < len(report.test_acc) else ""
            w.writerow([e, repr(float(risk)), repr(float(acc)) if acc != "" else ""])


def write_results_csv(rows, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "setting", "seed", "acc"])
        for method, setting, seed, acc in rows:
            w.writerow([method, setting, seed, repr(float(acc))])


def write_summary_csv(summary, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "setting", "mean", "std"])
        for method, setting, mean, std in summary:
            w.writerow([method, setting, repr(mean), repr(std)])
