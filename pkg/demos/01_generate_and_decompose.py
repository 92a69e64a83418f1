"""Generate complementary labels and split them into per-class binary problems."""

# %%
import numpy as np

from complearn import data

ds = data.make_gaussian_mixture(q=4, n_per_class=250, d=2, separation=6.0, seed=0)
print("features", ds.features.shape, "labels", np.bincount(ds.labels))

# %% One uniform complementary label per example: a class the example is not.
cds = data.gen_complementary(ds, data.Uniform(), seed=1)
print("first rows of the complementary-label matrix:")
print(cds.comp_labels[:5].astype(int), "true labels", ds.labels[:5])

# %% Independent flags: each wrong class is flagged with its own probability c_k.
scar = data.gen_complementary(ds, data.ScarIndependent(np.array([0.1, 0.3, 0.5, 0.7])), seed=2)
print("flags per row:", np.bincount(scar.comp_labels.sum(axis=1)))

# %% Fraction flagged per class should match c_k * (1 - pi_k) = c_k * 0.75.
print("pi_bar empirical", np.round(data.complementary_priors(scar), 3))
print("pi_bar expected ", np.array([0.1, 0.3, 0.5, 0.7]) * 0.75)

# %% Per class k: flagged rows are known negatives, the rest are unlabeled.
dec = data.decompose(scar)
for k in range(scar.q):
    print(f"class {k + 1}: {dec.n_neg[k]} negatives, {dec.n_unl[k]} unlabeled")
