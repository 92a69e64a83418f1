"""One-versus-rest risks for ordinary and complementary labels.

For class k, rows flagged as "not k" are its negatives (N) and the remaining
rows are unlabeled (U). With ``a_k = pi_bar_k + pi_k - 1``,
``b_k = 1 - pi_bar_k`` and logistic loss ``l``::

    P_k   = a_k * mean_N l(f_k) + b_k * mean_U l(f_k)     (may be negative)
    NEG_k = (1 - pi_k) * mean_N l(-f_k)

    unbiased estimator   sum_k P_k + NEG_k
    corrected estimator  sum_k g(P_k) + NEG_k

Inside a mini-batch, a class whose N (or U) set is empty simply drops the
terms averaged over that set.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .data import BinaryDecomposition, ClassPriors

__all__ = [
    "logistic_loss",
    "CORRECTIONS",
    "RiskSpec",
    "ovr_empirical_risk",
    "ovr_risk_with_grad",
    "positive_parts",
    "positive_part",
    "ure_risk",
    "corrected_risk",
    "nu_risk_with_grad",
    "DiscreteDistribution",
    "exact_risks",
]


def logistic_loss(z):
    """``softplus(-z)`` and its derivative ``-sigmoid(-z)``, overflow-safe."""
    z = np.asarray(z, dtype=np.float64)
    value = np.logaddexp(0.0, -z)
    # sigmoid(-z) = exp(-softplus(z))
    deriv = -np.exp(-np.logaddexp(0.0, z))
    return value, deriv


def _abs(z):
    return np.abs(z), np.where(z >= 0, 1.0, -1.0)


def _relu(z):
    return np.maximum(z, 0.0), (z > 0).astype(np.float64)


def _identity(z):
    return np.asarray(z, dtype=np.float64), np.ones_like(z, dtype=np.float64)


# correction name -> function returning (g(z), g'(z)); subgradient of |z| at 0 is +1
CORRECTIONS: dict[str, Callable] = {"abs": _abs, "relu": _relu, "identity": _identity}


@dataclass(frozen=True)
class RiskSpec:
    priors: ClassPriors
    correction: str = "abs"
    loss: Callable = logistic_loss

    def __post_init__(self):
        if self.correction not in CORRECTIONS:
            raise ValueError(f"unknown correction {self.correction!r}; choose from {sorted(CORRECTIONS)}")


# -- ordinary labels -------------------------------------------------------------

def ovr_risk_with_grad(scores, labels, loss=logistic_loss):
    scores = np.asarray(scores, dtype=np.float64)
    n, q = scores.shape
    if n == 0:
        raise ValueError("empty sample")
    onehot = np.zeros((n, q), dtype=bool)
    onehot[np.arange(n), np.asarray(labels)] = True
    # margin is +f for the true class, -f for the rest
    sign = np.where(onehot, 1.0, -1.0)
    value, deriv = loss(sign * scores)
    return value.sum() / n, sign * deriv / n


def ovr_empirical_risk(scores, labels, loss=logistic_loss) -> float:
    """Mean over examples of ``l(f_y) + sum_{k != y} l(-f_k)``."""
    return ovr_risk_with_grad(scores, labels, loss)[0]


# -- complementary labels ----------------------------------------------------------

def _mask_of(decomp) -> np.ndarray:
    if isinstance(decomp, BinaryDecomposition):
        return decomp.mask
    return np.asarray(decomp, dtype=bool)


def _terms(scores, mask, priors: ClassPriors, loss):
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.shape != mask.shape:
        raise ValueError(f"scores {scores.shape} do not match the decomposition {mask.shape}")
    n, q = scores.shape
    if n == 0:
        raise ValueError("empty batch")
    if priors.q != q:
        raise ValueError(f"priors cover {priors.q} classes, scores have {q}")
    n_neg = mask.sum(axis=0)
    n_unl = n - n_neg
    w_neg = np.divide(1.0, n_neg, out=np.zeros(q), where=n_neg > 0)
    w_unl = np.divide(1.0, n_unl, out=np.zeros(q), where=n_unl > 0)
    a = priors.pi_bar + priors.pi - 1.0
    b = 1.0 - priors.pi_bar
    c = 1.0 - priors.pi
    lp, dlp = loss(scores)
    ln, dln = loss(-scores)
    coef_p = np.where(mask, a * w_neg, b * w_unl)
    coef_n = np.where(mask, c * w_neg, 0.0)
    pos = (coef_p * lp).sum(axis=0)
    neg = (coef_n * ln).sum(axis=0)
    return pos, neg, coef_p * dlp, -coef_n * dln


def positive_parts(scores, decomp, priors: ClassPriors, loss=logistic_loss) -> np.ndarray:
    """Per-class positive parts ``P_k`` (length q)."""
    return _terms(scores, _mask_of(decomp), priors, loss)[0]


def positive_part(scores, decomp, priors: ClassPriors, k: int, loss=logistic_loss) -> float:
    return float(positive_parts(scores, decomp, priors, loss)[k])


def ure_risk(scores, decomp, priors: ClassPriors, loss=logistic_loss) -> float:
    pos, neg, _, _ = _terms(scores, _mask_of(decomp), priors, loss)
    return float((pos + neg).sum())


def corrected_risk(scores, decomp, priors: ClassPriors, correction="abs", loss=logistic_loss) -> float:
    pos, neg, _, _ = _terms(scores, _mask_of(decomp), priors, loss)
    g = CORRECTIONS[correction](pos)[0]
    return float((g + neg).sum())


def nu_risk_with_grad(scores, decomp, spec: RiskSpec):
    """Risk under ``spec``, its gradient with respect to ``scores``, and the ``P_k``."""
    pos, neg, dpos, dneg = _terms(scores, _mask_of(decomp), spec.priors, spec.loss)
    g, dg = CORRECTIONS[spec.correction](pos)
    value = float((g + neg).sum())
    return value, dg * dpos + dneg, pos


# -- exact risks on a discrete population ---------------------------------------------

@dataclass(frozen=True)
class DiscreteDistribution:
    """Finite joint distribution over (x, y) with SCAR flag probabilities.

    ``points`` is s x d, ``labels`` holds 0-based classes, ``masses`` sums to 1.
    """

    points: np.ndarray
    labels: np.ndarray
    masses: np.ndarray
    flag_probs: np.ndarray
    q: int

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        lab = np.asarray(self.labels, dtype=np.int64)
        w = np.asarray(self.masses, dtype=np.float64)
        c = np.asarray(self.flag_probs, dtype=np.float64)
        if not (pts.shape[0] == lab.size == w.size):
            raise ValueError("points, labels and masses disagree in length")
        if (w <= 0).any() or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("masses must be positive and sum to 1")
        if c.shape != (self.q,) or (c < 0).any() or (c >= 1).any():
            raise ValueError("flag_probs must be a length-q vector in [0, 1)")
        if lab.min() < 0 or lab.max() >= self.q:
            raise ValueError("labels out of range")
        for name, val in (("points", pts), ("labels", lab), ("masses", w), ("flag_probs", c)):
            object.__setattr__(self, name, val)

    @property
    def pi(self) -> np.ndarray:
        return np.bincount(self.labels, weights=self.masses, minlength=self.q)

    @property
    def pi_bar(self) -> np.ndarray:
        return self.flag_probs * (1.0 - self.pi)

    def priors(self) -> ClassPriors:
        return ClassPriors(self.pi, self.pi_bar)


def exact_risks(dist: DiscreteDistribution, scorer, loss=logistic_loss):
    """Exact OVR risk computed two ways: directly over p(x, y), and as the sum of
    per-class NU risks over the conditionals p(x | flagged k) and p(x | not flagged k).

    ``scorer`` maps an s x d array to s x q scores (a ModelParams works).
    Returns ``(direct, decomposed)``.
    """
    F = np.asarray(scorer(dist.points), dtype=np.float64)
    w, y, c, q = dist.masses, dist.labels, dist.flag_probs, dist.q
    s = w.size
    is_k = np.zeros((s, q), dtype=bool)
    is_k[np.arange(s), y] = True

    lp = loss(F)[0]
    ln = loss(-F)[0]
    direct = float(w @ np.where(is_k, lp, ln).sum(axis=1))

    pi = dist.pi
    pi_bar = dist.pi_bar
    decomposed = 0.0
    for k in range(q):
        other = w * ~is_k[:, k]
        if other.sum() > 0 and c[k] <= 0:
            raise ValueError(f"class {k + 1}: flag probability must be positive when p(y != k) > 0")
        # p(x | flagged k) is proportional to p(x, y != k)
        if other.sum() > 0:
            p_neg = other / other.sum()
            decomposed += p_neg @ ((1 - pi[k]) * ln[:, k] + (pi_bar[k] + pi[k] - 1) * lp[:, k])
        # p(x | not flagged k) is proportional to p(x, y = k) + (1 - c_k) p(x, y != k)
        unl = w * is_k[:, k] + (1 - c[k]) * other
        p_unl = unl / unl.sum()
        decomposed += (1 - pi_bar[k]) * (p_unl @ lp[:, k])
    return direct, float(decomposed)
