"""Multi-class learning from complementary labels via per-class
negative-unlabeled risks, with a non-negative risk correction and
class-prior estimation."""

from .data import (
    BinaryDecomposition,
    Biased,
    ClassPriors,
    ComplementaryDataset,
    OrdinaryDataset,
    ScarIndependent,
    ScarSingle,
    Uniform,
    builtin_transition,
    complementary_priors,
    corrupt_priors,
    decompose,
    gen_complementary,
    make_gaussian_mixture,
    split,
)
from .model import ModelConfig, ModelParams, adam_step, forward, grad_check, init_params, risk_and_grad
from .priors import BbeConfig, bbe_theta, estimate_priors, train_pvu
from .risk import (
    DiscreteDistribution,
    RiskSpec,
    corrected_risk,
    exact_risks,
    logistic_loss,
    ovr_empirical_risk,
    positive_part,
    positive_parts,
    ure_risk,
)
from .training import Experiment, TrainConfig, TrainReport, predict, run_trials, train_conu, train_supervised

__version__ = "0.1.0"
