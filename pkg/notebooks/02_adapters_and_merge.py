# %% [markdown]
# # Adapters, budgets and merging
#
# An adapter keeps only `floor((1 - eta) r d)` learnable coefficients per
# factor. This notebook builds adapters under each update schema, counts
# their parameters and folds them into dense weights.

# %%
import numpy as np

from selora import AdapterConfig, Schema, expected_parameter_count, forward, init_adapter, merge

rng = np.random.default_rng(0)
W0 = rng.standard_normal((64, 64)) / 8
X = rng.standard_normal((64, 5))

# %% [markdown]
# A fresh adapter has `F_B = 0`, so it leaves the base layer untouched.

# %%
for schema in Schema:
    cfg = AdapterConfig(in_dim=64, out_dim=64, rank=16, sparse_ratio=0.5, basis="haar", schema=schema)
    adapter = init_adapter(cfg, W0)
    print(f"{schema.value:12s} params={adapter.num_parameters:5d}  "
          f"max|f(X) - W0 X|={np.abs(forward(adapter, X) - W0 @ X).max():.1e}")

# %% [markdown]
# After perturbing the coefficients, the merged weight reproduces the adapted
# forward pass. Inference then runs at the base layer's cost.

# %%
adapter = init_adapter(AdapterConfig(64, 64, rank=16, sparse_ratio=0.5, schema=Schema.DORA), W0)
adapter.set_parameters(adapter.parameters() + 0.05 * rng.standard_normal(adapter.num_parameters))
print("merge gap", np.abs(forward(adapter, X) - merge(adapter) @ X).max())

# %% [markdown]
# Budgets scale linearly in `1 - eta`. Below are the q/k/v/up/down
# projections of a 32-layer 7B-class model at rank 32.

# %%
modules = [(4096, 4096)] * 3 + [(11008, 4096), (4096, 11008)]
dense = 32 * sum(expected_parameter_count(32, o, i) for o, i in modules)
for eta in (0.0, 0.4, 0.6, 0.8):
    sparse = 32 * sum(expected_parameter_count(32, o, i, eta) for o, i in modules)
    print(f"eta={eta:.1f}  params={sparse:>11,d}  ratio={sparse / dense:.6f}")
