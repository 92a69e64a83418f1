"""Class-prior estimation from complementary labels with Best Bin Estimation.

For each class k the rows flagged "not k" are a clean sample of
p(x | y != k), the component. The mixture is either the unflagged rows
(default) or every row. A positive-versus-unlabeled scorer separates the
two; the top-score bin then gives the component proportion in the mixture.

With the unflagged rows as mixture the proportion is
``theta_k = (1 - pi_k - pi_bar_k) / (1 - pi_bar_k)``, hence
``1 - pi_k = pi_bar_k + theta_k * (1 - pi_bar_k)``. With every row as
mixture the proportion is ``1 - pi_k`` itself.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import ClassPriors, ComplementaryDataset, complementary_priors, decompose, rng_stream, split
from .model import ModelConfig, ModelParams, adam_init, adam_step, backward, _forward, init_params
from .risk import logistic_loss

__all__ = [
    "BbeConfig",
    "PvuScorer",
    "train_pvu",
    "empirical_upper_cdf",
    "bbe_objective",
    "bbe_theta",
    "recover_one_minus_pi",
    "estimate_priors",
    "write_priors_csv",
    "read_priors_csv",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BbeConfig:
    gamma: float = 0.01
    delta: float = 0.1
    split_fraction: float = 0.8
    hidden: tuple = (64, 64)
    epochs: int = 50
    batch_size: int = 256
    lr: float = 1e-3
    weight_decay: float = 0.0
    mixture: str = "unlabeled"

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if not 0 < self.delta < 1:
            raise ValueError("delta must be in (0, 1)")
        if not 0 < self.split_fraction < 1:
            raise ValueError("split_fraction must be in (0, 1)")
        if self.mixture not in ("unlabeled", "all"):
            raise ValueError("mixture must be 'unlabeled' or 'all'")


class PvuScorer:
    """Sigmoid output of a single-head network: high means "looks like the component"."""

    def __init__(self, params: ModelParams):
        self.params = params

    def __call__(self, X) -> np.ndarray:
        f = _forward(self.params, X)[0][:, 0]
        return np.exp(-np.logaddexp(0.0, -f))


def train_pvu(component, mixture, config: BbeConfig = BbeConfig(), seed=0) -> PvuScorer:
    """Logistic-loss classifier with the component sample as label 1."""
    component = np.asarray(component, dtype=np.float64)
    mixture = np.asarray(mixture, dtype=np.float64)
    if len(component) == 0 or len(mixture) == 0:
        raise ValueError("train_pvu needs nonempty component and mixture samples")
    X = np.vstack([component, mixture])
    sign = np.concatenate([np.ones(len(component)), -np.ones(len(mixture))])
    cfg = ModelConfig(X.shape[1], 1, "mlp", config.hidden)
    params = init_params(cfg, rng_stream(seed, "pvu-init"))
    theta = params.theta
    state = adam_init(theta.size, config.lr, config.weight_decay)
    n = len(X)
    for epoch in range(config.epochs):
        order = rng_stream(seed, "pvu-shuffle", epoch).permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            p = params.with_theta(theta)
            f, cache = _forward(p, X[idx])
            s = sign[idx][:, None]
            _, dl = logistic_loss(s * f)
            grad = backward(p, cache, s * dl / len(idx))
            state, theta = adam_step(state, theta, grad)
    return PvuScorer(params.with_theta(theta))


def empirical_upper_cdf(scores, z) -> float:
    """Fraction of ``scores`` at or above ``z``."""
    scores = np.asarray(scores)
    if scores.size == 0:
        raise ValueError("empty score set")
    return float(np.count_nonzero(scores >= z) / scores.size)


def _upper_fractions(sorted_scores, grid):
    return 1.0 - np.searchsorted(sorted_scores, grid, side="left") / sorted_scores.size


def bbe_objective(z_p, z_u, gamma, delta):
    """Grid of candidate thresholds with the upper-confidence objective on each.

    Returns ``(grid, objective, qp, qu)``; the objective is ``inf`` where no
    component score reaches the threshold.
    """
    z_p = np.sort(np.asarray(z_p, dtype=np.float64))
    z_u = np.sort(np.asarray(z_u, dtype=np.float64))
    if z_p.size == 0 or z_u.size == 0:
        raise ValueError("both score sets must be nonempty")
    grid = np.unique(np.concatenate([z_p, z_u]))
    qp = _upper_fractions(z_p, grid)
    qu = _upper_fractions(z_u, grid)
    slack = (1 + gamma) * (np.sqrt(np.log(4 / delta) / (2 * z_p.size)) + np.sqrt(np.log(4 / delta) / (2 * z_u.size)))
    with np.errstate(divide="ignore", invalid="ignore"):
        obj = np.where(qp > 0, (qu + slack) / qp, np.inf)
    return grid, obj, qp, qu


def bbe_theta(z_p, z_u, gamma=0.01, delta=0.1) -> float:
    """Component proportion of the mixture scores ``z_u``, clipped to [0, 1]."""
    grid, obj, qp, qu = bbe_objective(z_p, z_u, gamma, delta)
    if not np.isfinite(obj).any():
        raise ValueError("no admissible threshold")
    i = int(np.argmin(obj))
    return float(np.clip(qu[i] / qp[i], 0.0, 1.0))


def recover_one_minus_pi(theta, pi_bar):
    """``1 - pi_k`` from the component proportion inside the unflagged rows."""
    return pi_bar + theta * (1.0 - pi_bar)


def estimate_priors(cds: ComplementaryDataset, config: BbeConfig = BbeConfig(), seed=0) -> ClassPriors:
    """Estimate ``pi`` class by class, then renormalize onto the simplex.

    ``pi_bar`` is the empirical flag frequency of the full dataset.
    """
    train, val = split(cds, config.split_fraction, rng_stream(seed, "prior-split"))
    dec_tr, dec_val = decompose(train), decompose(val)
    pi_bar = complementary_priors(cds)
    one_minus = np.empty(cds.q)
    for k in range(cds.q):
        neg_tr, neg_val = dec_tr.neg_indices[k], dec_val.neg_indices[k]
        if neg_tr.size == 0 or neg_val.size == 0:
            raise ValueError(f"class {k + 1} has no complementary-labelled examples in the "
                             f"{'training' if neg_tr.size == 0 else 'validation'} split")
        if config.mixture == "unlabeled":
            mix_tr, mix_val = train.features[dec_tr.unl_indices[k]], val.features[dec_val.unl_indices[k]]
        else:
            mix_tr, mix_val = train.features, val.features
        if len(mix_tr) == 0 or len(mix_val) == 0:
            raise ValueError(f"class {k + 1} has no unlabeled examples")
        scorer = train_pvu(train.features[neg_tr], mix_tr, config, seed=int(rng_stream(seed, "pvu", k).integers(2**31)))
        theta = bbe_theta(scorer(val.features[neg_val]), scorer(mix_val), config.gamma, config.delta)
        one_minus[k] = recover_one_minus_pi(theta, pi_bar[k]) if config.mixture == "unlabeled" else theta
        log.debug("class %d: theta=%.4f 1-pi=%.4f", k + 1, theta, one_minus[k])
    pi = np.clip(1.0 - one_minus, 0.0, None)
    pi = pi / pi.sum() if pi.sum() > 0 else np.full(cds.q, 1.0 / cds.q)
    return ClassPriors(pi, pi_bar)


def write_priors_csv(priors: ClassPriors, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "pi_k", "pi_bar_k"])
        for k in range(priors.q):
            w.writerow([k + 1, repr(float(priors.pi[k])), repr(float(priors.pi_bar[k]))])


def read_priors_csv(path) -> ClassPriors:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or set(rows[0]) != {"k", "pi_k", "pi_bar_k"}:
        raise ValueError(f"{path}: expected header k,pi_k,pi_bar_k")
    rows.sort(key=lambda r: int(r["k"]))
    return ClassPriors([float(r["pi_k"]) for r in rows], [float(r["pi_bar_k"]) for r in rows])
