# %% [markdown]
# # Training and sweeps on a teacher-student task
#
# The task hides a rank-8 perturbation of a frozen 64x64 weight. Adapters are
# trained to recover it, and the metric is the relative Frobenius error of
# the recovered update.

# %%
import json

from selora import AdapterConfig, OptimizerConfig, make_teacher_student_task, train
from selora.metrics import dumps_metrics
from selora.trainer import sweep

task = make_teacher_student_task(64, 64, 8, seed=0)
opt = OptimizerConfig(lr=1e-2, warmup_steps=50)

# %%
for basis in ("identity", "haar", "fourier"):
    cfg = AdapterConfig(64, 64, rank=16, alpha=32.0, sparse_ratio=0.0 if basis == "identity" else 0.5, basis=basis)
    m = train(task, cfg, steps=600, optimizer=opt)
    print(f"{basis:8s} params={m.trainable_params:5d} error={m.final_metric:.4f}")

# %% [markdown]
# A sparse-ratio sweep runs three arms at every ratio: SeLoRA, masked LoRA
# (same support, no transform) and dense LoRA with a matched budget. The
# steps are cut down here to keep the notebook fast.

# %%
base = AdapterConfig(64, 64, rank=16, alpha=32.0, basis="haar")
report = sweep("sparse_ratio", [0.2, 0.6], task, base, seeds=[0, 1], steps=300, optimizer=opt)
for (eta, arm), med in report.medians().items():
    print(f"eta={eta}  {arm:13s} median error {med:.4f}")

# %% [markdown]
# The same report as plot-ready CSV.

# %%
print(dumps_metrics(report, "csv"))
print(json.dumps(report.to_dict()["medians"][:2], indent=1))
