"""Reverse-mode gradients of adapted layers with respect to their learnable coordinates.

The chain is short and fixed, so gradients are written out per schema:

    grad_W   = grad_Y X^T                       (effective-weight gradient)
    grad_dW  = grad_W | W0 * grad_W | DoRA quotient rule
    grad_A~  = (alpha/r) B~^T grad_dW,  grad_B~ = (alpha/r) grad_dW A~^T
    grad_F   = T*(grad_factor) restricted to the index set

LoRA-type schemas skip forming ``grad_W`` and use the dropout-masked input on
the adapter branch instead.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .adapter import Adapter, Schema, _column_norms, effective_weight, forward, materialize
from .errors import InvalidDimensionError
from .spectral import adjoint_transform

LossFn = Callable[[np.ndarray], "tuple[float, np.ndarray]"]


@dataclass
class GradientBundle:
    grad_fa: np.ndarray
    grad_fb: np.ndarray
    grad_m: np.ndarray | None = None

    def flat(self) -> np.ndarray:
        parts = [self.grad_fa, self.grad_fb]
        if self.grad_m is not None:
            parts.append(self.grad_m)
        return np.concatenate(parts)

    def __add__(self, other: "GradientBundle") -> "GradientBundle":
        m = None if self.grad_m is None else self.grad_m + other.grad_m
        return GradientBundle(self.grad_fa + other.grad_fa, self.grad_fb + other.grad_fb, m)


def _check_shapes(adapter: Adapter, X, grad_Y):
    X = np.asarray(X, dtype=np.float64)
    grad_Y = np.asarray(grad_Y, dtype=np.float64)
    d1, d2 = adapter.config.out_dim, adapter.config.in_dim
    if X.ndim != 2 or X.shape[0] != d2:
        raise InvalidDimensionError(f"X has shape {X.shape}, expected ({d2}, n)")
    if grad_Y.shape != (d1, X.shape[1]):
        raise InvalidDimensionError(f"grad_Y has shape {grad_Y.shape}, expected {(d1, X.shape[1])}")
    return X, grad_Y


def backward(adapter: Adapter, X, grad_Y, mask: np.ndarray | None = None) -> GradientBundle:
    """Gradient of the loss w.r.t. the adapter's learnable coordinates.

    ``mask`` must be the dropout multiplier used in the matching training
    forward pass, if any.
    """
    X, G = _check_shapes(adapter, X, grad_Y)
    cfg = adapter.config
    s = cfg.scaling
    a_t, b_t, delta = materialize(adapter)
    grad_m = None
    if cfg.update_schema is Schema.LORA:
        Xd = X if mask is None else X * mask
        grad_a = s * (b_t.T @ G) @ Xd.T
        grad_b = s * G @ (a_t @ Xd).T
    else:
        grad_w = G @ X.T
        if cfg.update_schema is Schema.HIRA:
            grad_delta = adapter.W0 * grad_w
        else:
            V = adapter.W0 + delta
            norms = _column_norms(V)
            m = adapter.magnitude
            proj = np.sum(V * grad_w, axis=0)
            grad_m = proj / norms
            grad_delta = (m / norms) * (grad_w - V * (proj / norms**2))
        grad_a = s * b_t.T @ grad_delta
        grad_b = s * grad_delta @ a_t.T
    basis = adapter.basis
    return GradientBundle(
        adapter.fa.gather(adjoint_transform(grad_a, basis)),
        adapter.fb.gather(adjoint_transform(grad_b, basis)),
        grad_m,
    )


def backward_input(adapter: Adapter, grad_Y, mask: np.ndarray | None = None) -> np.ndarray:
    """Gradient of the loss w.r.t. the layer input ``X``."""
    G = np.asarray(grad_Y, dtype=np.float64)
    cfg = adapter.config
    if cfg.update_schema is Schema.LORA:
        a_t, b_t, _ = materialize(adapter)
        branch = cfg.scaling * (a_t.T @ (b_t.T @ G))
        if mask is not None:
            branch = branch * mask
        return adapter.W0.T @ G + branch
    return effective_weight(adapter).T @ G


def half_squared_norm(Y: np.ndarray) -> tuple[float, np.ndarray]:
    """``L = 0.5 ||Y||_F^2``."""
    return 0.5 * float(np.sum(Y * Y)), Y


def squared_error(target: np.ndarray) -> LossFn:
    """Loss ``0.5 ||Y - target||_F^2 / n`` for ``n`` columns."""
    target = np.asarray(target, dtype=np.float64)
    n = target.shape[1]

    def loss(Y):
        R = Y - target
        return 0.5 * float(np.sum(R * R)) / n, R / n

    return loss


def zero_loss(Y: np.ndarray) -> tuple[float, np.ndarray]:
    return 0.0, np.zeros_like(Y)


def numerical_gradient(adapter: Adapter, X, loss_fn: LossFn, epsilon: float = 1e-5) -> np.ndarray:
    """Central differences of ``loss_fn(forward(adapter, X))`` per coordinate."""
    theta = adapter.parameters()
    probe = adapter.copy()
    out = np.empty_like(theta)
    for i in range(theta.size):
        bumped = theta.copy()
        bumped[i] = theta[i] + epsilon
        probe.set_parameters(bumped)
        plus = loss_fn(forward(probe, X))[0]
        bumped[i] = theta[i] - epsilon
        probe.set_parameters(bumped)
        minus = loss_fn(forward(probe, X))[0]
        out[i] = (plus - minus) / (2.0 * epsilon)
    return out


def finite_difference_check(adapter: Adapter, X, loss_fn: LossFn, epsilon: float = 1e-5) -> float:
    """Max relative error between :func:`backward` and central differences.

    The relative error per coordinate uses the denominator
    ``max(|analytic|, |numeric|, 1e-12)``.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    _, grad_Y = loss_fn(forward(adapter, X))
    analytic = backward(adapter, X, grad_Y).flat()
    numeric = numerical_gradient(adapter, X, loss_fn, epsilon)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-12)
    return float(np.max(np.abs(analytic - numeric) / denom))
