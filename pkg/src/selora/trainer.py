"""Training loop and sweep harnesses over sparse ratio, rank, basis and schema."""
from __future__ import annotations

import enum
import math
import os
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .adapter import AdapterConfig, Schema, init_adapter
from .errors import NumericalError, SeLoRAError
from .optim import OptimizerConfig, OptimizerState, adamw_step
from .spectral import SpectralBasis


@dataclass
class RunMetrics:
    losses: list[float]
    final_metric: float
    initial_metric: float
    trainable_params: int
    wall_seconds: float
    config: dict = field(default_factory=dict)

    def to_dict(self, include_timing: bool = False) -> dict:
        out = asdict(self)
        if not include_timing:
            out.pop("wall_seconds")
        return out


def config_echo(config: AdapterConfig) -> dict:
    return {
        "rank": config.rank,
        "alpha": config.alpha,
        "sparse_ratio": config.sparse_ratio,
        "basis": config.basis.name,
        "schema": config.schema.value,
        "init_scheme": config.init_scheme.value,
        "dropout_rate": config.dropout_rate,
    }


def build_adapters(task, config: AdapterConfig, seed: int) -> dict:
    adapters = {}
    for name, W in task.layers.items():
        cfg = replace(config, in_dim=W.shape[1], out_dim=W.shape[0], seed=seed)
        adapters[name] = init_adapter(cfg, W, seed)
    return adapters


def train(
    task,
    adapter_config: AdapterConfig,
    steps: int,
    seed: int = 0,
    optimizer: OptimizerConfig | None = None,
    batch_size: int = 64,
    return_adapters: bool = False,
):
    """Fit adapters on ``task`` for ``steps`` AdamW updates.

    The cosine schedule spans exactly ``steps``. Batches are drawn from the
    task's stream ``seed`` so runs are bit-reproducible. With
    ``return_adapters`` the result is ``(metrics, adapters, optimizer_state)``.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    opt_cfg = replace(optimizer or OptimizerConfig(), total_steps=steps)
    started = time.perf_counter()
    adapters = build_adapters(task, adapter_config, seed)
    names = sorted(adapters)
    sizes = [adapters[k].num_parameters for k in names]
    state = OptimizerState.zeros(sum(sizes), opt_cfg)
    initial_metric = task.evaluate(adapters)
    dropout_rng = np.random.default_rng([seed, 3])
    losses = []
    # Overflow is caught by the finiteness checks and raised as NumericalError.
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(steps):
            X, Y = task.batch(step, batch_size, stream=seed)
            loss, grads = task.loss_and_grads(adapters, X, Y, training=True, rng=dropout_rng)
            flat_grad = np.concatenate([grads[k].flat() for k in names])
            if not math.isfinite(loss) or not np.all(np.isfinite(flat_grad)):
                raise NumericalError(f"non-finite loss or gradient at step {step}")
            losses.append(loss)
            params = np.concatenate([adapters[k].parameters() for k in names])
            params = adamw_step(state, params, flat_grad)
            offset = 0
            for k, n in zip(names, sizes):
                adapters[k].set_parameters(params[offset:offset + n])
                offset += n
        final_metric = task.evaluate(adapters)
    if not math.isfinite(final_metric):
        raise NumericalError("final metric is not finite")
    metrics = RunMetrics(
        losses=losses,
        final_metric=final_metric,
        initial_metric=initial_metric,
        trainable_params=int(sum(sizes)),
        wall_seconds=time.perf_counter() - started,
        config={**config_echo(adapter_config), "seed": seed, "steps": steps},
    )
    if return_adapters:
        return metrics, adapters, state
    return metrics


class SweepAxis(str, enum.Enum):
    SPARSE_RATIO = "sparse_ratio"
    RANK = "rank"
    BASIS = "basis"
    SCHEMA = "schema"

    @classmethod
    def parse(cls, text: str) -> "SweepAxis":
        return cls(text.strip().lower().replace("-", "_"))


DEFAULT_BASIS_GRID = ("fourier", "haar", "db4", "bior2.2", "coif1")
DEFAULT_SCHEMA_GRID = ("lora", "dora", "hira")


def matched_rank(rank: int, sparse_ratio: float) -> int:
    """Dense rank with roughly the budget of rank ``rank`` at ratio ``eta``."""
    return max(1, math.floor((1.0 - sparse_ratio) * rank + 0.5))


def sweep_arms(axis: SweepAxis, value, base: AdapterConfig) -> list[tuple[str, dict]]:
    """Arms run at one grid point as ``(name, config overrides)``."""
    axis = SweepAxis(axis)
    if axis is SweepAxis.SPARSE_RATIO:
        eta = float(value)
        return [
            ("selora", {"sparse_ratio": eta}),
            ("masked_lora", {"sparse_ratio": eta, "schema": Schema.MASKED_LORA}),
            ("reduced_lora", {
                "sparse_ratio": 0.0,
                "rank": matched_rank(base.rank, eta),
                "schema": Schema.LORA,
                "basis": SpectralBasis.identity(),
            }),
        ]
    if axis is SweepAxis.RANK:
        return [("selora", {"rank": int(value)})]
    if axis is SweepAxis.BASIS:
        return [("selora", {"basis": SpectralBasis.from_name(str(value))})]
    schema = Schema(str(value))
    return [
        ("spectral", {"schema": schema}),
        ("spatial", {"schema": schema, "basis": SpectralBasis.identity(), "sparse_ratio": 0.0}),
    ]


@dataclass
class SweepReport:
    axis: SweepAxis
    grid: list
    seeds: list[int]
    entries: list[dict] = field(default_factory=list)
    skipped: list[dict] = field(default_factory=list)

    def medians(self) -> dict[tuple, float]:
        """Median final metric per ``(axis_value, arm)``."""
        groups: dict[tuple, list[float]] = {}
        for e in self.entries:
            groups.setdefault((e["axis_value"], e["arm"]), []).append(e["final_metric"])
        return {k: statistics.median(v) for k, v in groups.items()}

    def median(self, axis_value, arm: str) -> float:
        return self.medians()[(axis_value, arm)]

    def to_dict(self) -> dict:
        return {
            "axis": self.axis.value,
            "grid": list(self.grid),
            "seeds": list(self.seeds),
            "entries": self.entries,
            "skipped": self.skipped,
            "medians": [
                {"axis_value": k[0], "arm": k[1], "median_final_metric": v}
                for k, v in self.medians().items()
            ],
        }


def _run_job(job):
    task, config, steps, seed, optimizer, batch_size = job
    return train(task, config, steps, seed, optimizer, batch_size)


def max_workers() -> int:
    """Sweep parallelism, capped by ``SELORA_MAX_WORKERS`` (default 1)."""
    raw = os.environ.get("SELORA_MAX_WORKERS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def sweep(
    axis,
    grid,
    task,
    base_config: AdapterConfig,
    seeds,
    steps: int = 500,
    optimizer: OptimizerConfig | None = None,
    batch_size: int = 64,
    workers: int | None = None,
) -> SweepReport:
    """Train every arm at every grid point for every seed.

    Grid points whose config is invalid are recorded in ``skipped``. The
    report order follows (grid point, arm, seed) regardless of ``workers``.
    """
    axis = SweepAxis.parse(axis) if isinstance(axis, str) else SweepAxis(axis)
    grid = list(grid)
    seeds = [int(s) for s in seeds]
    if not grid or not seeds:
        raise ValueError("sweep needs a non-empty grid and at least one seed")
    report = SweepReport(axis, grid, seeds)
    jobs, keys = [], []
    for value in grid:
        for arm, overrides in sweep_arms(axis, value, base_config):
            try:
                cfg = replace(base_config, **overrides)
                build_adapters(task, cfg, seeds[0])
            except SeLoRAError as exc:
                report.skipped.append({"axis_value": value, "arm": arm, "reason": str(exc)})
                continue
            for seed in seeds:
                jobs.append((task, cfg, steps, seed, optimizer, batch_size))
                keys.append((value, arm, seed))
    workers = workers or max_workers()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_job, jobs))
    else:
        results = [_run_job(job) for job in jobs]
    for (value, arm, seed), metrics in zip(keys, results):
        report.entries.append({
            "axis_value": value,
            "arm": arm,
            "seed": seed,
            "final_metric": metrics.final_metric,
            "initial_metric": metrics.initial_metric,
            "final_loss": metrics.losses[-1],
            "params": metrics.trainable_params,
        })
    return report
