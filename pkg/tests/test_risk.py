import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from complearn.data import ClassPriors, ScarIndependent
from complearn.model import ModelConfig, init_params
from complearn.reproduce import gaussian_population, random_discrete_distribution, random_risk_instance
from complearn.risk import (
    DiscreteDistribution,
    RiskSpec,
    corrected_risk,
    exact_risks,
    logistic_loss,
    nu_risk_with_grad,
    ovr_empirical_risk,
    positive_part,
    positive_parts,
    ure_risk,
)

LN2 = math.log(2.0)


def brute_logistic(z):
    return math.log1p(math.exp(-z)) if z > -30 else -z + math.log1p(math.exp(z))


def table_loss(table):
    """Loss given by a lookup table on exact score values (derivative unused)."""
    def loss(z):
        z = np.asarray(z, dtype=float)
        return np.vectorize(lambda v: table.get(float(v), 0.0))(z), np.zeros_like(z)
    return loss


class TestLogistic:
    def test_zero(self):
        assert logistic_loss(0.0)[0] == pytest.approx(LN2, abs=1e-15)
        assert logistic_loss(0.0)[1] == pytest.approx(-0.5, abs=1e-15)

    def test_one(self):
        # ln(1 + e^-1) evaluated with mpmath at 50 digits
        assert logistic_loss(1.0)[0] == pytest.approx(0.313261687518223, abs=1e-15)

    def test_reflection_identity(self):
        z = np.linspace(-30, 30, 601)
        np.testing.assert_allclose(logistic_loss(-z)[0], logistic_loss(z)[0] + z, atol=1e-12)

    def test_derivative_matches_difference_quotient(self):
        z = np.linspace(-8, 8, 33)
        h = 1e-6
        fd = (logistic_loss(z + h)[0] - logistic_loss(z - h)[0]) / (2 * h)
        np.testing.assert_allclose(logistic_loss(z)[1], fd, atol=1e-8)

    def test_no_overflow(self):
        v, d = logistic_loss(np.array([-1e4, 1e4]))
        np.testing.assert_allclose(v, [1e4, 0.0])
        np.testing.assert_allclose(d, [-1.0, 0.0])


class TestOvrRisk:
    def test_zero_scores(self):
        assert ovr_empirical_risk(np.zeros((1, 2)), [0]) == pytest.approx(2 * LN2)

    def test_confident_scores(self):
        assert ovr_empirical_risk(np.array([[50.0, -50.0]]), [0]) < 1e-20

    def test_against_loops(self):
        rng = np.random.default_rng(3)
        F = rng.normal(scale=2, size=(5, 3))
        y = rng.integers(0, 3, 5)
        total = 0.0
        for i in range(5):
            total += brute_logistic(F[i, y[i]])
            total += sum(brute_logistic(-F[i, k]) for k in range(3) if k != y[i])
        assert ovr_empirical_risk(F, y) == pytest.approx(total / 5, abs=1e-12)

    def test_empty(self):
        with pytest.raises(ValueError):
            ovr_empirical_risk(np.zeros((0, 3)), [])


class TestNuRisks:
    # class 0: pi = 0.3, pi_bar = 0.2; row 0 flagged with l(f) = 1.0 and l(-f) = 0.9,
    # row 1 unflagged with l(f) = 0.4; class 1 sees only zero losses.
    # P_0 = -0.5 * 1.0 + 0.8 * 0.4 = -0.18, NEG_0 = 0.7 * 0.9 = 0.63
    priors = ClassPriors([0.3, 0.7], [0.2, 0.1])
    scores = np.array([[1.0, 5.0], [2.0, 5.0]])
    mask = np.array([[True, False], [False, False]])
    loss = staticmethod(table_loss({1.0: 1.0, -1.0: 0.9, 2.0: 0.4}))

    def test_positive_part_hand(self):
        assert positive_part(self.scores, self.mask, self.priors, 0, self.loss) == pytest.approx(-0.18, abs=1e-15)

    def test_ure_hand(self):
        assert ure_risk(self.scores, self.mask, self.priors, self.loss) == pytest.approx(0.45, abs=1e-15)

    def test_corrected_hand(self):
        assert corrected_risk(self.scores, self.mask, self.priors, "abs", self.loss) == pytest.approx(0.81, abs=1e-15)

    def test_flagged_coefficient_vanishes(self):
        priors = ClassPriors([0.4, 0.6], [0.6, 0.3])
        F = np.array([[3.0, 0.0], [0.0, 0.0]])
        mask = np.array([[True, False], [False, False]])
        # pi_bar + pi = 1 for class 0, so the flagged row's l(f) cannot matter
        a = positive_part(F, mask, priors, 0)
        F[0, 0] = -7.0
        assert positive_part(F, mask, priors, 0) == a

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 10**6))
    def test_positive_part_nonnegative_when_coefficients_are(self, seed):
        rng = np.random.default_rng(seed)
        q = 3
        pi = rng.dirichlet(np.ones(q))
        pi_bar = (1 - pi) * rng.uniform(0.0, 0.999, q)
        pi_bar = np.maximum(pi_bar, np.minimum(1 - pi, 0.999))  # forces pi_bar + pi >= 1 (within [0,1))
        F = rng.normal(scale=5, size=(12, q))
        mask = rng.random((12, q)) < 0.5
        pos = positive_parts(F, mask, ClassPriors(pi, pi_bar))
        ok = pi_bar + pi >= 1
        assert (pos[ok] >= 0).all()

    def test_identity_equals_ure(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            F, M, P = random_risk_instance(rng)
            assert corrected_risk(F, M, P, "identity") == pytest.approx(ure_risk(F, M, P), abs=1e-12)

    @settings(max_examples=300, deadline=None)
    @given(st.integers(0, 10**6), st.sampled_from(["abs", "relu"]))
    def test_dominance(self, seed, correction):
        F, M, P = random_risk_instance(np.random.default_rng(seed))
        u = ure_risk(F, M, P)
        c = corrected_risk(F, M, P, correction)
        assert c >= u - 1e-12
        if (positive_parts(F, M, P) >= 0).all():
            assert abs(c - u) <= 1e-12

    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 10**6), st.sampled_from(["abs", "relu"]))
    def test_corrected_nonnegative_when_consistent(self, seed, correction):
        F, M, P = random_risk_instance(np.random.default_rng(seed))
        assert (P.pi + P.pi_bar <= 1 + 1e-9).all()
        assert corrected_risk(F, M, P, correction) >= 0

    def test_empty_negative_set_drops_terms(self):
        priors = ClassPriors([0.5, 0.5], [0.3, 0.3])
        F = np.array([[0.4, -1.0], [1.2, 2.0]])
        mask = np.array([[False, True], [False, False]])
        lp = logistic_loss(F)[0]
        # class 0 has no flagged rows: only (1 - pi_bar) * mean_U l(f) remains
        assert positive_part(F, mask, priors, 0) == pytest.approx(0.7 * lp[:, 0].mean())
        ln = logistic_loss(-F)[0]
        class1 = (0.3 + 0.5 - 1) * lp[0, 1] + 0.7 * lp[1, 1] + 0.5 * ln[0, 1]
        assert ure_risk(F, mask, priors) == pytest.approx(0.7 * lp[:, 0].mean() + class1)

    def test_prior_mismatch(self):
        with pytest.raises(ValueError):
            ure_risk(np.zeros((2, 3)), np.zeros((2, 3), bool), ClassPriors([0.5, 0.5], [0.1, 0.1]))

    def test_empty_batch(self):
        with pytest.raises(ValueError):
            ure_risk(np.zeros((0, 2)), np.zeros((0, 2), bool), ClassPriors([0.5, 0.5], [0.1, 0.1]))

    @pytest.mark.parametrize("correction", ["identity", "abs", "relu"])
    def test_score_gradient(self, correction):
        rng = np.random.default_rng(1)
        F, M, P = random_risk_instance(rng, q=4, n=15)
        spec = RiskSpec(P, correction)
        _, grad, pos = nu_risk_with_grad(F, M, spec)
        assert np.abs(pos).min() > 1e-3
        h = 1e-6
        fd = np.zeros_like(F)
        for idx in np.ndindex(F.shape):
            Fp, Fm = F.copy(), F.copy()
            Fp[idx] += h
            Fm[idx] -= h
            fd[idx] = (nu_risk_with_grad(Fp, M, spec)[0] - nu_risk_with_grad(Fm, M, spec)[0]) / (2 * h)
        np.testing.assert_allclose(grad, fd, atol=1e-7)

    def test_abs_subgradient_at_zero_is_plus_one(self):
        from complearn.risk import CORRECTIONS
        assert CORRECTIONS["abs"](np.array(0.0))[1] == 1.0


class TestExactRisks:
    def test_zero_scores(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            dist = random_discrete_distribution(rng)
            lhs, rhs = exact_risks(dist, lambda X: np.zeros((len(X), dist.q)))
            assert lhs == pytest.approx(dist.q * LN2, abs=1e-12)
            assert rhs == pytest.approx(dist.q * LN2, abs=1e-12)

    def test_two_point_hand(self):
        F = np.array([[0.7, -1.3], [0.2, 2.1]])
        dist = DiscreteDistribution([[0.0], [1.0]], [0, 1], [0.5, 0.5], [0.5, 0.5], 2)
        lhs, rhs = exact_risks(dist, lambda X: F)
        l = brute_logistic
        # pi = 0.5, pi_bar = 0.25 for both classes; the l(f) terms of the flagged
        # point cancel against part of the unflagged mixture
        hand = 0.5 * (l(F[0, 0]) + l(-F[1, 0]) + l(-F[0, 1]) + l(F[1, 1]))
        assert lhs == pytest.approx(hand, abs=1e-12)
        assert rhs == pytest.approx(hand, abs=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 10**6))
    def test_identity_random(self, seed):
        rng = np.random.default_rng(seed)
        dist = random_discrete_distribution(rng)
        params = init_params(ModelConfig(dist.points.shape[1], dist.q, "linear"), rng)
        params = params.with_theta(rng.normal(scale=3, size=params.theta.size))
        lhs, rhs = exact_risks(dist, params)
        assert abs(lhs - rhs) < 1e-10

    def test_single_class_support(self):
        dist = DiscreteDistribution([[0.0], [1.0]], [0, 0], [0.3, 0.7], [0.0, 0.4], 2)
        lhs, rhs = exact_risks(dist, lambda X: np.column_stack([X[:, 0], -X[:, 0]]))
        assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_precondition(self):
        dist = DiscreteDistribution([[0.0], [1.0]], [0, 1], [0.5, 0.5], [0.0, 0.5], 2)
        with pytest.raises(ValueError, match="flag probability"):
            exact_risks(dist, lambda X: np.zeros((2, 2)))

    def test_invalid_distribution(self):
        with pytest.raises(ValueError):
            DiscreteDistribution([[0.0]], [0], [0.9], [0.5, 0.5], 2)


class TestMonteCarlo:
    """Sampling behaviour of the estimators on a finite population."""

    @staticmethod
    def resample(dist, scores, n, m, seed, fn):
        rng = np.random.default_rng(seed)
        spec = ScarIndependent(dist.flag_probs)
        priors = dist.priors()
        out = np.empty(m)
        for i in range(m):
            idx = rng.integers(0, dist.labels.size, size=n)
            flags = rng.random((n, dist.q)) < spec.flag_probs
            flags[np.arange(n), dist.labels[idx]] = False
            out[i] = fn(scores[idx], flags, priors)
        return out

    def setup_method(self):
        self.dist = gaussian_population(per_class=200, seed=4)
        params = init_params(ModelConfig(2, 3, "mlp", (8,)), 4)
        self.params = params.with_theta(3 * params.theta)
        self.scores = self.params(self.dist.points)
        self.exact = exact_risks(self.dist, self.params)[0]

    def test_ure_unbiased(self):
        vals = self.resample(self.dist, self.scores, 100, 1500, 0, ure_risk)
        se = vals.std(ddof=1) / np.sqrt(vals.size)
        assert abs(vals.mean() - self.exact) <= 3 * se

    def test_corrected_bias_nonnegative(self):
        vals = self.resample(self.dist, self.scores, 30, 1500, 1, corrected_risk)
        se = vals.std(ddof=1) / np.sqrt(vals.size)
        assert vals.mean() - self.exact >= -3 * se
