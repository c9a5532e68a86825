# %% [markdown]
# # Which directions does an adapter amplify?
#
# The amplification factor compares the update norm with the base weight's
# energy inside the update's top-`r` singular subspace. The reverse factor
# does the same for the complementary subspace.

# %%
import numpy as np

from selora import AdapterConfig, OptimizerConfig, amplification_factors, make_teacher_student_task, merge, train
from selora.analysis import variance_report

# %% [markdown]
# For the textbook case `W = diag(3, 1)` and `dW = diag(2, 0)`, the update lives
# on the first axis, where `W` has energy 3.

# %%
rep = amplification_factors(np.diag([3.0, 1.0]), np.diag([2.0, 0.0]), 1)
print(rep.af, rep.raf)

# %%
task = make_teacher_student_task(64, 64, 8, seed=0)
cfg = AdapterConfig(64, 64, rank=16, alpha=32.0, sparse_ratio=0.5, basis="haar")
metrics, adapters, _ = train(task, cfg, steps=600, optimizer=OptimizerConfig(lr=1e-2, warmup_steps=50),
                             return_adapters=True)
adapter = adapters["weight"]
delta = merge(adapter) - adapter.W0
for r in (4, 8, 16):
    rep = amplification_factors(adapter.W0, delta, r)
    print(f"r={r:2d} AF={rep.af:.3f} RAF={rep.raf:.3f}")

# %%
stats = variance_report(adapter)
print({k: round(v, 5) for k, v in stats.items() if v is not None})
