"""Desk-scale verification suite.

Each ``check_*`` function runs one acceptance check and returns a
:class:`CheckResult`. The test suite and ``complearn reproduce`` both call
them.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .data import (
    ClassPriors,
    ScarIndependent,
    Uniform,
    class_frequencies,
    complementary_priors,
    gen_complementary,
    make_gaussian_mixture,
    rng_stream,
)
from .model import ModelConfig, grad_check, init_params, risk_and_grad
from .priors import BbeConfig, bbe_theta, estimate_priors
from .risk import (
    DiscreteDistribution,
    RiskSpec,
    corrected_risk,
    exact_risks,
    positive_parts,
    ure_risk,
)
from .training import Experiment, TrainConfig, aggregate, run_trials, train_conu


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail} ({self.seconds:.1f}s)"


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def random_discrete_distribution(rng, q=None, d=3):
    q = int(rng.integers(2, 5)) if q is None else q
    s = int(rng.integers(q, 11))
    labels = rng.integers(0, q, size=s)
    masses = rng.random(s) + 0.05
    return DiscreteDistribution(rng.normal(size=(s, d)), labels, masses / masses.sum(),
                                rng.uniform(0.1, 0.9, size=q), q)


@_timed
def check_identity(n_trials=100, seed=0, tol=1e-10, time_limit=5.0) -> CheckResult:
    """Direct OVR risk equals the sum of per-class NU risks on random discrete populations."""
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(n_trials):
        dist = random_discrete_distribution(rng)
        params = init_params(ModelConfig(dist.points.shape[1], dist.q, "linear"), rng)
        params = params.with_theta(rng.normal(scale=2.0, size=params.theta.size))
        lhs, rhs = exact_risks(dist, params)
        worst = max(worst, abs(lhs - rhs))
    elapsed = time.perf_counter() - t0
    return CheckResult("identity", worst < tol and elapsed < time_limit,
                       f"max |direct - decomposed| = {worst:.2e} over {n_trials} trials (< {tol:g}), {elapsed:.2f}s (< {time_limit:g}s)")


def gaussian_population(q=3, per_class=400, d=2, separation=2.0, seed=0, flag_probs=(0.3, 0.5, 0.4)):
    """A finite Gaussian sample treated as the whole population (uniform masses)."""
    ds = make_gaussian_mixture(q, per_class, d, separation, rng_stream(seed, "population"))
    masses = np.full(ds.n, 1.0 / ds.n)
    return DiscreteDistribution(ds.features, ds.labels, masses, np.asarray(flag_probs), q)


@_timed
def check_unbiased(n=200, n_resamples=2000, seed=0, time_limit=120.0) -> CheckResult:
    """Mean of the unbiased estimator over SCAR resamples matches the exact risk."""
    t0 = time.perf_counter()
    dist = gaussian_population(seed=seed)
    params = init_params(ModelConfig(2, 3, "mlp", (16, 16)), rng_stream(seed, "init"))
    params = params.with_theta(2.0 * params.theta)
    exact, _ = exact_risks(dist, params)
    priors = dist.priors()
    scores_all = params(dist.points)
    rng = rng_stream(seed, "resample")
    spec = ScarIndependent(dist.flag_probs)
    vals = np.empty(n_resamples)
    for m in range(n_resamples):
        idx = rng.integers(0, dist.labels.size, size=n)
        flags = rng.random((n, dist.q)) < spec.flag_probs
        flags[np.arange(n), dist.labels[idx]] = False
        vals[m] = ure_risk(scores_all[idx], flags, priors)
    mean = vals.mean()
    se = vals.std(ddof=1) / np.sqrt(n_resamples)
    elapsed = time.perf_counter() - t0
    ok = abs(mean - exact) <= 3 * se and elapsed < time_limit
    return CheckResult("unbiasedness", ok,
                       f"mean URE {mean:.5f} vs exact {exact:.5f}, |diff| = {abs(mean - exact):.5f} <= 3 SE = {3 * se:.5f}, {elapsed:.1f}s (< {time_limit:g}s)")


def random_risk_instance(rng, q=None, n=None):
    q = int(rng.integers(2, 6)) if q is None else q
    n = int(rng.integers(2, 30)) if n is None else n
    scores = rng.normal(scale=rng.uniform(0.1, 5.0), size=(n, q))
    mask = rng.random((n, q)) < rng.uniform(0.05, 0.6)
    mask[mask.all(axis=1), 0] = False
    pi = rng.dirichlet(np.ones(q))
    pi_bar = rng.uniform(0, 1, q) * (1 - pi)
    return scores, mask, ClassPriors(pi, pi_bar)


@_timed
def check_dominance(n_instances=1000, seed=0) -> CheckResult:
    """Absolute-value corrected risk bounds the unbiased one from above, tightly when no ``P_k`` is negative."""
    rng = np.random.default_rng(seed)
    worst_gap, worst_eq, n_eq = np.inf, 0.0, 0
    for _ in range(n_instances):
        scores, mask, priors = random_risk_instance(rng)
        u = ure_risk(scores, mask, priors)
        c = corrected_risk(scores, mask, priors, "abs")
        worst_gap = min(worst_gap, c - u)
        if (positive_parts(scores, mask, priors) >= 0).all():
            n_eq += 1
            worst_eq = max(worst_eq, abs(c - u))
    ok = worst_gap >= -1e-12 and worst_eq <= 1e-12
    return CheckResult("dominance", ok,
                       f"min(corrected - URE) = {worst_gap:.2e} (>= -1e-12); max gap on {n_eq} all-nonnegative instances = {worst_eq:.1e} (<= 1e-12)")


def _grad_instance(arch, correction, seed, want_negative):
    """Batch, params and spec for a gradient check, with every ``|P_k| > 1e-3``;
    ``want_negative`` additionally demands some ``P_k < 0``."""
    for attempt in range(1000):
        rng = rng_stream(seed, f"grad:{arch}:{correction}", attempt)
        d, q, n = 3, 4, 48
        X = rng.normal(size=(n, d))
        mask = rng.random((n, q)) < 0.35
        mask[mask.all(axis=1), 0] = False
        pi = rng.dirichlet(np.full(q, 3.0))
        pi_bar = rng.uniform(0.05, 0.5, q) * (1 - pi)
        priors = ClassPriors(pi, pi_bar)
        cfg = ModelConfig(d, q, arch, (12, 10))
        params = init_params(cfg, rng)
        params = params.with_theta(params.theta * rng.uniform(0.5, 4.0) + 0.1 * rng.normal(size=params.theta.size))
        pos = positive_parts(params(X), mask, priors)
        if np.abs(pos).min() <= 1e-3:
            continue
        if want_negative and not (pos < 0).any():
            continue
        return params, X, mask, RiskSpec(priors, correction), pos
    raise RuntimeError("no suitable gradient-check instance found")


@_timed
def check_gradients(h=1e-5, tol=1e-5, seed=0) -> CheckResult:
    """Finite-difference check of the risk gradients for linear and MLP models."""
    errs = {}
    for arch in ("linear", "mlp"):
        for correction in ("identity", "abs"):
            params, X, mask, spec, pos = _grad_instance(arch, correction, seed, want_negative=(correction == "abs"))
            closure = lambda th: risk_and_grad(params.with_theta(th), X, mask, spec)  # noqa: E731
            errs[f"{arch}/{correction}"] = grad_check(params.theta, closure, h)
    worst = max(errs.values())
    detail = ", ".join(f"{k} {v:.1e}" for k, v in errs.items())
    return CheckResult("gradients", worst < tol, f"max relative error {worst:.2e} (< {tol:g}): {detail}")


def two_gaussian_scores(theta, n_p, n_u, rng, means=(0.0, 4.0)):
    """Component scores from N(means[1], 1) and mixture scores with that component at weight ``theta``.

    Values are passed through a logistic squashing, which preserves the ordering.
    """
    def squash(x):
        return 1.0 / (1.0 + np.exp(-(x - np.mean(means))))
    z_p = rng.normal(means[1], 1.0, n_p)
    from_component = rng.random(n_u) < theta
    z_u = np.where(from_component, rng.normal(means[1], 1.0, n_u), rng.normal(means[0], 1.0, n_u))
    return squash(z_p), squash(z_u)


@_timed
def check_bbe(theta=0.7, n=5000, n_seeds=5, tol=0.05, required=4) -> CheckResult:
    """Best-bin estimate of a known mixture proportion."""
    ests = []
    for seed in range(n_seeds):
        z_p, z_u = two_gaussian_scores(theta, n, n, rng_stream(seed, "bbe"))
        ests.append(bbe_theta(z_p, z_u, 0.01, 0.1))
    hits = sum(abs(e - theta) <= tol for e in ests)
    return CheckResult("bbe", hits >= required,
                       f"estimates {np.round(ests, 4).tolist()}, {hits}/{n_seeds} within {tol} of {theta} (need {required})")


@_timed
def check_prior_estimation(n=8000, c=0.5, tol=0.03, seed=0, time_limit=300.0) -> CheckResult:
    """Class priors recovered from SCAR complementary labels on balanced Gaussians."""
    t0 = time.perf_counter()
    q = 4
    ds = make_gaussian_mixture(q, n // q, 2, 6.0, rng_stream(seed, "data"))
    cds = gen_complementary(ds, ScarIndependent(np.full(q, c)), rng_stream(seed, "labels"))
    est = estimate_priors(cds, BbeConfig(), seed)
    err = np.abs(est.pi - 1.0 / q).max()
    elapsed = time.perf_counter() - t0
    return CheckResult("prior estimation", err <= tol and elapsed < time_limit,
                       f"pi_hat = {np.round(est.pi, 4).tolist()}, max |pi_hat - 0.25| = {err:.4f} (<= {tol}), {elapsed:.1f}s (< {time_limit:g}s)")


def overfit_benchmark(seed=0, n=500, q=4, d=10, separation=2.5, test_per_class=500):
    train = make_gaussian_mixture(q, n // q, d, separation, rng_stream(seed, "data"))
    test = make_gaussian_mixture(q, test_per_class, d, separation, rng_stream(seed, "test"))
    cds = gen_complementary(train, Uniform(), rng_stream(seed, "labels"))
    priors = ClassPriors(class_frequencies(train.labels, q), complementary_priors(cds))
    return train, test, cds, priors


@_timed
def check_overfitting(seed=0, epochs=200, hidden=(300, 300, 300)) -> CheckResult:
    """Uncorrected training risk dives below zero and the correction prevents it."""
    train, test, cds, priors = overfit_benchmark(seed)
    mc = ModelConfig(train.d, train.q, "mlp", hidden)
    _, ure = train_conu(cds, priors, mc, TrainConfig(epochs=epochs, seed=seed, correction="identity"), test)
    _, conu = train_conu(cds, priors, mc, TrainConfig(epochs=epochs, seed=seed, correction="abs"), test)
    ure_neg = [e + 1 for e, r in enumerate(ure.train_risk) if r < 0]
    ok = bool(ure_neg) and min(conu.train_risk) >= 0 and conu.test_acc[-1] >= ure.test_acc[-1]
    first = ure_neg[0] if ure_neg else None
    return CheckResult("overfitting", ok,
                       f"URE risk first negative at epoch {first} (min {min(ure.train_risk):.3g}); "
                       f"CONU min risk {min(conu.train_risk):.4f}; final test acc CONU {conu.test_acc[-1]:.4f} vs URE {ure.test_acc[-1]:.4f}")


BENCHMARK = dict(q=4, d=2, separation=6.0, n_per_class=1000, test_per_class=500, hidden=(64,))


def nearest_centroid_accuracy(train, test) -> float:
    centroids = np.array([train.features[train.labels == k].mean(axis=0) for k in range(train.q)])
    dist = ((test.features[:, None, :] - centroids[None]) ** 2).sum(axis=2)
    return float(np.mean(dist.argmin(axis=1) == test.labels))


@_timed
def check_end_to_end(n_seeds=5, epochs=200, jobs=1) -> CheckResult:
    """CONU on separated Gaussians with one uniform complementary label per example."""
    exp = Experiment(**BENCHMARK, methods=("conu", "supervised"), train=TrainConfig(epochs=epochs))
    train = make_gaussian_mixture(exp.q, exp.n_per_class, exp.d, exp.separation, rng_stream(exp.data_seed, "data"))
    test = make_gaussian_mixture(exp.q, exp.test_per_class, exp.d, exp.separation, rng_stream(exp.data_seed, "test"))
    nc = nearest_centroid_accuracy(train, test)
    summary = {m: mean for m, _, mean, _ in aggregate(run_trials(exp, n_seeds, jobs))}
    conu, sup = summary["conu"], summary["supervised"]
    ok = nc >= 0.99 and conu >= 0.90 and sup - conu <= 0.05
    return CheckResult("end-to-end", ok,
                       f"nearest-centroid {nc:.4f} (>= 0.99); CONU mean {conu:.4f} (>= 0.90); supervised {sup:.4f} (gap <= 0.05)")


@_timed
def check_sensitivity(sigmas=(0.0, 0.1, 0.3), n_seeds=5, epochs=200, jobs=1) -> CheckResult:
    """Accuracy under perturbed class priors does not rise with the perturbation size."""
    means = {}
    for sigma in sigmas:
        exp = Experiment(**BENCHMARK, methods=("conu",), prior_sigma=sigma, train=TrainConfig(epochs=epochs))
        means[sigma] = aggregate(run_trials(exp, n_seeds, jobs))[0][2]
    ok = means[sigmas[0]] >= means[sigmas[-1]] - 0.01
    return CheckResult("sensitivity", ok,
                       ", ".join(f"sigma={s}: {m:.4f}" for s, m in means.items())
                       + f" (sigma={sigmas[0]} >= sigma={sigmas[-1]} - 0.01)")


SUITES = {
    "identity": check_identity,
    "unbiased": check_unbiased,
    "dominance": check_dominance,
    "gradients": check_gradients,
    "bbe": check_bbe,
    "priors": check_prior_estimation,
    "overfit": check_overfitting,
    "e2e": check_end_to_end,
    "sensitivity": check_sensitivity,
}


def run_suite(names=None, jobs=1):
    names = list(SUITES) if names in (None, "all", ["all"]) else list(names)
    out = []
    for name in names:
        fn = SUITES[name]
        out.append(fn(jobs=jobs) if name in ("e2e", "sensitivity") else fn())
    return out
