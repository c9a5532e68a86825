"""AdamW with linear warmup and cosine decay to zero."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidDimensionError


@dataclass(frozen=True)
class OptimizerConfig:
    lr: float = 2e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    warmup_steps: int = 100
    total_steps: int = 1000

    def __post_init__(self):
        if self.lr < 0 or self.weight_decay < 0:
            raise ValueError("lr and weight_decay must be non-negative")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("betas must lie in [0, 1)")
        if self.total_steps < 1 or self.warmup_steps < 0:
            raise ValueError("total_steps must be >= 1 and warmup_steps >= 0")


def learning_rate(t: int, cfg: OptimizerConfig) -> float:
    """Rate at step ``t`` (1-based): linear ramp from 0, then cosine to 0 at ``total_steps``."""
    warm = min(cfg.warmup_steps, cfg.total_steps)
    if t <= warm:
        return cfg.lr * t / warm
    span = cfg.total_steps - warm
    if span <= 0:
        return 0.0
    progress = min(1.0, (t - warm) / span)
    return cfg.lr * 0.5 * (1.0 + math.cos(math.pi * progress))


@dataclass
class OptimizerState:
    config: OptimizerConfig
    first_moment: np.ndarray
    second_moment: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n: int, config: OptimizerConfig | None = None) -> "OptimizerState":
        return cls(config or OptimizerConfig(), np.zeros(n), np.zeros(n))

    def __len__(self) -> int:
        return len(self.first_moment)


def adamw_step(
    state: OptimizerState,
    params: np.ndarray,
    grads: np.ndarray,
    lr: float | None = None,
) -> np.ndarray:
    """Advance ``state`` by one step and return the updated parameters.

    Weight decay is decoupled and applied before the Adam update. ``lr``
    overrides the scheduled rate for this step.
    """
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != state.first_moment.shape or grads.shape != params.shape:
        raise InvalidDimensionError(
            f"layout mismatch: params {params.shape}, grads {grads.shape}, state {state.first_moment.shape}"
        )
    cfg = state.config
    t = state.t + 1
    lr_t = learning_rate(t, cfg) if lr is None else lr
    params = params * (1.0 - lr_t * cfg.weight_decay)
    m = cfg.beta1 * state.first_moment + (1.0 - cfg.beta1) * grads
    v = cfg.beta2 * state.second_moment + (1.0 - cfg.beta2) * grads * grads
    m_hat = m / (1.0 - cfg.beta1**t)
    v_hat = v / (1.0 - cfg.beta2**t)
    state.first_moment, state.second_moment, state.t = m, v, t
    return params - lr_t * m_hat / (np.sqrt(v_hat) + cfg.eps)
