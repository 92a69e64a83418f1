"""Recover class priors from independent complementary flags."""

# %%
import numpy as np

from complearn import data
from complearn.priors import BbeConfig, bbe_theta, estimate_priors
from complearn.reproduce import two_gaussian_scores

# Best-bin estimation on scores with a known component share of 0.7.
z_p, z_u = two_gaussian_scores(0.7, 5000, 5000, np.random.default_rng(0))
print(f"component share estimate {bbe_theta(z_p, z_u):.4f} (true 0.7)")

# %% Imbalanced classes: keep all of class 1, 60% of class 2, 30% of class 3.
full = data.make_gaussian_mixture(q=3, n_per_class=2000, d=2, separation=6.0, seed=0)
keep_rate = np.array([1.0, 0.6, 0.3])[full.labels]
keep = np.random.default_rng(1).random(full.n) < keep_rate
ds = data.OrdinaryDataset(full.features[keep], full.labels[keep], 3)
print("true priors     ", np.round(data.class_frequencies(ds.labels, 3), 4))

# %% Every wrong class is flagged with probability 0.5; priors come from the flags alone.
cds = data.gen_complementary(ds, data.ScarIndependent(np.full(3, 0.5)), seed=2)
est = estimate_priors(cds, BbeConfig(), seed=0)
print("estimated priors", np.round(est.pi, 4))

# %% Using every row as the mixture sample instead of only the unflagged ones.
est_all = estimate_priors(cds, BbeConfig(mixture="all"), seed=0)
print("estimated (all) ", np.round(est_all.pi, 4))
