"""Train a large network with and without the risk correction and compare curves."""

# %%
from complearn.model import ModelConfig
from complearn.reproduce import overfit_benchmark
from complearn.training import TrainConfig, train_conu

# 500 examples in 10 dimensions, one uniform complementary label each.
train, test, cds, priors = overfit_benchmark(seed=0)
model = ModelConfig(train.d, train.q, "mlp", (300, 300, 300))

# %% Same initialization and batch order for both runs; only the correction differs.
_, ure = train_conu(cds, priors, model, TrainConfig(epochs=100, correction="identity"), test)
_, conu = train_conu(cds, priors, model, TrainConfig(epochs=100, correction="abs"), test)

# %% The uncorrected objective is driven below zero, which no true risk can be.
print("epoch   URE risk   acc  | corrected risk   acc")
for e in (0, 4, 9, 19, 49, 99):
    print(f"{e + 1:5d} {ure.train_risk[e]:10.3g} {ure.test_acc[e]:.3f} | "
          f"{conu.train_risk[e]:14.4f} {conu.test_acc[e]:.3f}")
first = next((e + 1 for e, r in enumerate(ure.train_risk) if r < 0), None)
print("URE risk first negative at epoch", first)
