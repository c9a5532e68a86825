# %% [markdown]
# # Checking gradients
#
# Backward passes are written by hand per schema. Here they are compared
# coordinate by coordinate against central differences.

# %%
import numpy as np

from selora import AdapterConfig, Schema, backward, forward, init_adapter
from selora.autograd import finite_difference_check, numerical_gradient, squared_error

rng = np.random.default_rng(1)

# %%
for schema in (Schema.LORA, Schema.DORA, Schema.HIRA):
    for basis in ("fourier", "haar"):
        cfg = AdapterConfig(16, 16, rank=8, alpha=16.0, sparse_ratio=0.5, basis=basis, schema=schema)
        adapter = init_adapter(cfg, rng.standard_normal((16, 16)) / 4)
        adapter.set_parameters(adapter.parameters() + 0.1 * rng.standard_normal(adapter.num_parameters))
        X, Y = rng.standard_normal((2, 16, 8))
        err = finite_difference_check(adapter, X, squared_error(Y))
        print(f"{schema.value:5s} {basis:8s} max relative error {err:.1e}")

# %% [markdown]
# The per-coordinate relative error is sensitive to tiny gradients. A
# two-point difference at `eps = 1e-5` carries an absolute roundoff of
# roughly `1e-16 * L / eps`. Any coordinate much smaller than that shows a
# large relative error even when the analytic value is right.

# %%
loss_fn = squared_error(Y)
analytic = backward(adapter, X, loss_fn(forward(adapter, X))[1]).flat()
numeric = numerical_gradient(adapter, X, loss_fn)
abs_err = np.abs(analytic - numeric)
order = np.argsort(np.abs(analytic))
print("smallest |grad|:", np.abs(analytic)[order[:3]])
print("abs error there:", abs_err[order[:3]])
print("max abs error overall:", abs_err.max())
