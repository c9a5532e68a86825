"""Self-contained property battery behind ``selora check``.

Every check is deterministic, runs in memory (checkpoints use a temporary
directory) and returns a :class:`CheckResult`.
"""
from __future__ import annotations

import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .adapter import AdapterConfig, Schema, forward, init_adapter, merge
from .autograd import finite_difference_check, squared_error
from .checkpoint import load_checkpoint, save_checkpoint
from .spectral import (
    FilterKind,
    SpectralBasis,
    adjoint_transform,
    build_wavelet_filter,
    forward_wavelet_2d,
    inverse_wavelet_2d,
    transform,
)
from .tasks import make_teacher_student_task
from .trainer import train


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    detail: str


def _fourier_double_sum(F):
    r, d = F.shape
    j = np.arange(r)[:, None, None, None]
    k = np.arange(d)[None, :, None, None]
    u = np.arange(r)[None, None, :, None]
    v = np.arange(d)[None, None, None, :]
    phase = 2.0 * np.pi * (u * j / r + v * k / d)
    return np.einsum("jkuv,uv->jk", np.cos(phase), F)


def _rel(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def check_fourier(rng) -> CheckResult:
    worst = 0.0
    for _ in range(20):
        r, d = rng.integers(1, 13, size=2)
        F = rng.standard_normal((r, d))
        worst = max(worst, _rel(transform(F, SpectralBasis.fourier()), _fourier_double_sum(F)))
    return CheckResult("fourier_vs_double_sum", worst <= 1e-10, f"max rel err {worst:.2e}")


def check_wavelet_roundtrip(rng) -> CheckResult:
    worst = 0.0
    for kind in FilterKind:
        filt = build_wavelet_filter(kind)
        for _ in range(5):
            r, d = 2 * rng.integers(1, 9, size=2)
            M = rng.standard_normal((r, d))
            worst = max(worst, float(np.max(np.abs(inverse_wavelet_2d(forward_wavelet_2d(M, filt), filt) - M))))
    return CheckResult("wavelet_roundtrip", worst <= 1e-10, f"max abs err {worst:.2e}")


def check_adjoints(rng) -> CheckResult:
    worst = 0.0
    bases = [SpectralBasis.fourier()] + [SpectralBasis.wavelet(k) for k in FilterKind]
    for basis in bases:
        for _ in range(10):
            r, d = 2 * rng.integers(1, 9, size=2)
            F, G = rng.standard_normal((2, r, d))
            lhs = float(np.sum(transform(F, basis) * G))
            rhs = float(np.sum(F * adjoint_transform(G, basis)))
            worst = max(worst, abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300))
    return CheckResult("adjoint_identity", worst <= 1e-10, f"max rel err {worst:.2e}")


def _random_adapter(rng, schema, basis, rank=4, dim=8, sparse_ratio=0.3, perturb=True):
    cfg = AdapterConfig(
        in_dim=dim, out_dim=dim, rank=rank, alpha=2.0 * rank, sparse_ratio=sparse_ratio,
        basis=basis, schema=schema, seed=int(rng.integers(1 << 31)),
    )
    W0 = rng.standard_normal((dim, dim)) / np.sqrt(dim)
    adapter = init_adapter(cfg, W0)
    if perturb:
        theta = adapter.parameters()
        adapter.set_parameters(theta + 0.1 * rng.standard_normal(theta.size))
    return adapter


def check_gradients(rng) -> CheckResult:
    worst = {}
    for schema in (Schema.LORA, Schema.DORA, Schema.HIRA):
        for basis in (SpectralBasis.fourier(), SpectralBasis.wavelet()):
            adapter = _random_adapter(rng, schema, basis)
            X = rng.standard_normal((8, 5))
            target = rng.standard_normal((8, 5))
            err = finite_difference_check(adapter, X, squared_error(target))
            worst[schema] = max(worst.get(schema, 0.0), err)
    ok = worst[Schema.LORA] <= 1e-6 and worst[Schema.DORA] <= 1e-5 and worst[Schema.HIRA] <= 1e-5
    detail = ", ".join(f"{s.value} {e:.1e}" for s, e in worst.items())
    return CheckResult("gradient_check", ok, detail)


def check_zero_init_and_merge(rng) -> CheckResult:
    worst_init = worst_merge = 0.0
    for schema in Schema:
        for basis in (SpectralBasis.fourier(), SpectralBasis.wavelet("db4")):
            X = rng.standard_normal((8, 6))
            fresh = _random_adapter(rng, schema, basis, perturb=False)
            worst_init = max(worst_init, float(np.max(np.abs(forward(fresh, X) - fresh.W0 @ X))))
            trained = _random_adapter(rng, schema, basis)
            worst_merge = max(worst_merge, float(np.max(np.abs(forward(trained, X) - merge(trained) @ X))))
    ok = worst_init <= 1e-12 and worst_merge <= 1e-10
    return CheckResult("zero_init_and_merge", ok, f"init {worst_init:.1e}, merge {worst_merge:.1e}")


def check_determinism(rng) -> CheckResult:
    task = make_teacher_student_task(16, 16, 2, seed=3)
    cfg = AdapterConfig(in_dim=16, out_dim=16, rank=4, alpha=8.0, sparse_ratio=0.25, dropout_rate=0.1)
    runs = [train(task, cfg, steps=20, seed=1, batch_size=8).to_dict() for _ in range(2)]
    return CheckResult("determinism", runs[0] == runs[1], "two identical runs compared")


def check_checkpoint(rng) -> CheckResult:
    mismatches = 0
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "adapter.selora"
        for schema in Schema:
            adapter = _random_adapter(rng, schema, SpectralBasis.wavelet("coif1"))
            save_checkpoint(adapter, None, path)
            loaded, _ = load_checkpoint(path)
            if not np.array_equal(loaded.parameters(), adapter.parameters()):
                mismatches += 1
    return CheckResult("checkpoint_roundtrip", mismatches == 0, f"{mismatches} mismatches")


CHECKS = (
    check_fourier,
    check_wavelet_roundtrip,
    check_adjoints,
    check_gradients,
    check_zero_init_and_merge,
    check_determinism,
    check_checkpoint,
)


def run_checks(seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    return [check(rng) for check in CHECKS]
