"""Post-training diagnostics: subspace amplification and factor statistics."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .adapter import Adapter, materialize
from .errors import AFUndefinedError, InvalidDimensionError, InvalidRankError


@dataclass(frozen=True)
class SubspaceReport:
    delta_norm: float
    projected_norm: float
    residual_projected_norm: float
    af: float
    raf: float
    rank_used: int
    tie: bool = False

    def to_dict(self) -> dict:
        out = asdict(self)
        if not np.isfinite(out["raf"]):
            out["raf"] = None
        return out


def amplification_factors(W, delta_W, r: int, tie_tol: float = 1e-12) -> SubspaceReport:
    """Amplification factor of ``delta_W`` relative to ``W`` over its top-``r`` subspace.

    With ``U, S, V^T = svd(delta_W)``::

        AF  = ||delta_W||_F / ||U_r^T W V_r||_F
        RAF = ||delta_W||_F / ||U_{d-r}^T W V_{d-r}||_F

    ``tie`` is set when the ``r``-th and ``(r+1)``-th singular values coincide,
    in which case the split is not unique. RAF is ``inf`` when the complement
    projection vanishes.
    """
    W = np.asarray(W, dtype=np.float64)
    delta_W = np.asarray(delta_W, dtype=np.float64)
    if W.ndim != 2 or W.shape != delta_W.shape or W.shape[0] != W.shape[1]:
        raise InvalidDimensionError(
            f"W and delta_W must be square and equal-shaped, got {W.shape} and {delta_W.shape}"
        )
    d = W.shape[0]
    if not 1 <= r < d:
        raise InvalidRankError(f"rank must satisfy 1 <= r < d = {d}, got {r}")
    U, S, Vt = np.linalg.svd(delta_W)
    V = Vt.T
    delta_norm = float(np.linalg.norm(delta_W))
    projected = float(np.linalg.norm(U[:, :r].T @ W @ V[:, :r]))
    residual = float(np.linalg.norm(U[:, r:].T @ W @ V[:, r:]))
    if projected == 0.0:
        raise AFUndefinedError("W has no component in the top-r subspace of delta_W")
    tie = bool(abs(S[r - 1] - S[r]) <= tie_tol * max(S[0], 1.0))
    raf = delta_norm / residual if residual > 0.0 else float("inf")
    return SubspaceReport(delta_norm, projected, residual, delta_norm / projected, raf, r, tie)


def variance_report(adapter: Adapter) -> dict:
    """Empirical mean/variance of factors and coefficients.

    ``init_variance_ratio`` is ``Var(A~)/Var(A')`` recorded by variance-matched
    initialization, or ``None`` for spatial adapters.
    """
    a_t, b_t, delta = materialize(adapter)
    out = {}
    for name, values in (
        ("A", a_t),
        ("B", b_t),
        ("F_A", adapter.fa.values),
        ("F_B", adapter.fb.values),
        ("delta_W", delta),
    ):
        out[f"mean_{name}"] = float(np.mean(values))
        out[f"var_{name}"] = float(np.var(values))
    out["init_variance_ratio"] = adapter.init_stats.get("variance_ratio")
    out["aux_variance"] = adapter.init_stats.get("aux_variance")
    return out
