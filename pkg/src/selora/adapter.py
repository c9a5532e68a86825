"""Sparse spectral adapters: index sets, initialization, materialization, merging.

An adapter holds a frozen base weight ``W0`` (``d1 x d2``) and two sparse
coefficient matrices ``F_A`` (``r x d2``) and ``F_B`` (``d1 x r``) whose only
learnable entries sit on fixed index sets. The low-rank factors are
``A~ = T(F_A)`` and ``B~ = T(F_B)`` and the update is
``dW = (alpha / r) B~ A~``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    DegenerateSparsityError,
    InitDegenerateError,
    InvalidDimensionError,
    NormalizationDegenerateError,
)
from .spectral import SpectralBasis, transform


class Schema(str, enum.Enum):
    LORA = "lora"
    DORA = "dora"
    HIRA = "hira"
    MASKED_LORA = "masked_lora"


class InitScheme(str, enum.Enum):
    KAIMING = "kaiming"
    XAVIER = "xavier"


def learnable_count(rows: int, cols: int, sparse_ratio: float) -> int:
    """``floor((1 - eta) * rows * cols)``, guarded against float round-off."""
    exact = (1.0 - sparse_ratio) * rows * cols
    n = math.floor(exact)
    # (1 - 0.9) * 10 evaluates to 0.9999999999999998 and must floor to 1.
    if math.isclose(exact, n + 1, rel_tol=0.0, abs_tol=1e-9):
        n += 1
    return n


@dataclass(frozen=True, eq=False)
class IndexSet:
    """Sorted learnable locations ``(u, v)`` in a ``rows x cols`` grid."""

    rows: int
    cols: int
    indices: np.ndarray  # int64, shape (n, 2), sorted by (u, v)
    seed: int = 0

    def __len__(self) -> int:
        return len(self.indices)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, IndexSet)
            and self.shape == other.shape
            and np.array_equal(self.indices, other.indices)
        )

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def rows_idx(self) -> np.ndarray:
        return self.indices[:, 0]

    @property
    def cols_idx(self) -> np.ndarray:
        return self.indices[:, 1]

    def transpose(self) -> "IndexSet":
        swapped = self.indices[:, ::-1]
        order = np.lexsort((swapped[:, 1], swapped[:, 0]))
        return IndexSet(self.cols, self.rows, np.ascontiguousarray(swapped[order]), self.seed)

    def mask(self) -> np.ndarray:
        m = np.zeros(self.shape)
        m[self.rows_idx, self.cols_idx] = 1.0
        return m


def sample_index_set(rows: int, cols: int, sparse_ratio: float, seed: int) -> IndexSet:
    """Draw ``floor((1 - eta) rows cols)`` distinct cells uniformly.

    Partial Fisher-Yates over the flattened cell indices, driven by a seeded
    PCG64 stream, then sorted into ``(u, v)`` order.
    """
    if rows <= 0 or cols <= 0:
        raise InvalidDimensionError(f"index grid must be non-empty, got {rows}x{cols}")
    if not 0.0 <= sparse_ratio < 1.0:
        raise DegenerateSparsityError(f"sparse ratio must lie in [0, 1), got {sparse_ratio}")
    total = rows * cols
    n = learnable_count(rows, cols, sparse_ratio)
    if n < 1:
        raise DegenerateSparsityError(
            f"sparse ratio {sparse_ratio} leaves no learnable entry in a {rows}x{cols} matrix"
        )
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, rows, cols])))
    cells = np.arange(total, dtype=np.int64)
    if n < total:
        offsets = np.floor(rng.random(n) * (total - np.arange(n))).astype(np.int64)
        for i in range(n):
            j = i + offsets[i]
            cells[i], cells[j] = cells[j], cells[i]
    chosen = np.sort(cells[:n])
    indices = np.stack([chosen // cols, chosen % cols], axis=1)
    return IndexSet(rows, cols, indices, seed)


@dataclass(eq=False)
class SparseSpectralMatrix:
    """Coefficients living only on ``index_set``; zero everywhere else."""

    index_set: IndexSet
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (len(self.index_set),):
            raise InvalidDimensionError(
                f"{self.values.shape[0]} values for {len(self.index_set)} indices"
            )

    @property
    def shape(self) -> tuple[int, int]:
        return self.index_set.shape

    def dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        out[self.index_set.rows_idx, self.index_set.cols_idx] = self.values
        return out

    def gather(self, M: np.ndarray) -> np.ndarray:
        """Restrict a dense matrix to this matrix's index set."""
        return M[self.index_set.rows_idx, self.index_set.cols_idx]


@dataclass(frozen=True)
class AdapterConfig:
    """Hyperparameters of one adapted weight matrix (``out_dim x in_dim``)."""

    in_dim: int
    out_dim: int
    rank: int = 32
    alpha: float = 64.0
    sparse_ratio: float = 0.4
    basis: SpectralBasis = field(default_factory=lambda: SpectralBasis.wavelet("haar"))
    schema: Schema = Schema.LORA
    init_scheme: InitScheme = InitScheme.KAIMING
    dropout_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "schema", Schema(self.schema))
        object.__setattr__(self, "init_scheme", InitScheme(self.init_scheme))
        if isinstance(self.basis, str):
            object.__setattr__(self, "basis", SpectralBasis.from_name(self.basis))
        r, d1, d2 = self.rank, self.out_dim, self.in_dim
        if min(r, d1, d2) < 1:
            raise InvalidDimensionError(f"rank and dims must be positive (r={r}, d1={d1}, d2={d2})")
        if r > min(d1, d2):
            raise InvalidDimensionError(f"rank {r} exceeds min(d1, d2) = {min(d1, d2)}")
        if self.effective_basis.requires_even and (r % 2 or d1 % 2 or d2 % 2):
            raise InvalidDimensionError(
                f"wavelet basis needs even r, d1, d2 (got {r}, {d1}, {d2})"
            )
        if not self.alpha > 0:
            raise InvalidDimensionError(f"alpha must be positive, got {self.alpha}")
        if not 0.0 <= self.sparse_ratio < 1.0:
            raise DegenerateSparsityError(f"sparse ratio must lie in [0, 1), got {self.sparse_ratio}")
        if learnable_count(r, min(d1, d2), self.sparse_ratio) < 1:
            raise DegenerateSparsityError(
                f"sparse ratio {self.sparse_ratio} leaves no learnable entry at r={r}, d={min(d1, d2)}"
            )
        if not 0.0 <= self.dropout_rate < 1.0:
            raise InvalidDimensionError(f"dropout rate must lie in [0, 1), got {self.dropout_rate}")

    @property
    def scaling(self) -> float:
        return self.alpha / self.rank

    @property
    def effective_basis(self) -> SpectralBasis:
        if self.schema is Schema.MASKED_LORA:
            return SpectralBasis.identity()
        return self.basis

    @property
    def update_schema(self) -> Schema:
        """Schema governing how ``dW`` enters the weight (masked LoRA is LoRA)."""
        return Schema.LORA if self.schema is Schema.MASKED_LORA else self.schema

    def with_dims(self, in_dim: int, out_dim: int) -> "AdapterConfig":
        return replace(self, in_dim=in_dim, out_dim=out_dim)


@dataclass(eq=False)
class Adapter:
    config: AdapterConfig
    W0: np.ndarray
    fa: SparseSpectralMatrix
    fb: SparseSpectralMatrix
    magnitude: np.ndarray | None = None
    init_stats: dict = field(default_factory=dict)

    @property
    def basis(self) -> SpectralBasis:
        return self.config.effective_basis

    @property
    def mask_a(self) -> np.ndarray | None:
        """Binary support of ``A`` for masked LoRA, else ``None``."""
        if self.config.schema is not Schema.MASKED_LORA:
            return None
        return self.fa.index_set.mask()

    @property
    def mask_b(self) -> np.ndarray | None:
        if self.config.schema is not Schema.MASKED_LORA:
            return None
        return self.fb.index_set.mask()

    @property
    def num_parameters(self) -> int:
        return trainable_parameter_count(self)

    def parameters(self) -> np.ndarray:
        """Flat copy of the learnable coordinates: ``[F_A | F_B | m]``."""
        parts = [self.fa.values, self.fb.values]
        if self.magnitude is not None:
            parts.append(self.magnitude)
        return np.concatenate(parts)

    def set_parameters(self, flat: np.ndarray) -> None:
        """Overwrite learnable coordinates in place (single writer only)."""
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (self.num_parameters,):
            raise InvalidDimensionError(
                f"expected {self.num_parameters} parameters, got {flat.shape}"
            )
        na, nb = len(self.fa.values), len(self.fb.values)
        self.fa.values = flat[:na].copy()
        self.fb.values = flat[na:na + nb].copy()
        if self.magnitude is not None:
            self.magnitude = flat[na + nb:].copy()

    def copy(self) -> "Adapter":
        return Adapter(
            self.config,
            self.W0,
            SparseSpectralMatrix(self.fa.index_set, self.fa.values.copy()),
            SparseSpectralMatrix(self.fb.index_set, self.fb.values.copy()),
            None if self.magnitude is None else self.magnitude.copy(),
            dict(self.init_stats),
        )


def _draw(scheme: InitScheme, shape, fan_in: int, fan_out: int, rng) -> np.ndarray:
    if scheme is InitScheme.KAIMING:
        std = math.sqrt(2.0 / fan_in)
    else:
        std = math.sqrt(2.0 / (fan_in + fan_out))
    return rng.normal(0.0, std, size=shape)


def adapter_index_sets(config: AdapterConfig, seed: int | None = None) -> tuple[IndexSet, IndexSet]:
    """Index sets for ``F_A`` and ``F_B``.

    One set is drawn per shape class from the shared seed; ``F_B`` uses the
    transpose of the set drawn for shape ``(r, d1)``, so square layers share
    identical locations across both factors.
    """
    seed = config.seed if seed is None else seed
    r, d1, d2 = config.rank, config.out_dim, config.in_dim
    omega_a = sample_index_set(r, d2, config.sparse_ratio, seed)
    omega_b = sample_index_set(r, d1, config.sparse_ratio, seed).transpose()
    return omega_a, omega_b


def init_adapter(config: AdapterConfig, W0, seed: int | None = None) -> Adapter:
    """Build a fresh adapter whose update is exactly zero.

    ``F_A`` is drawn from the init scheme (Kaiming: variance ``2/d2``; Xavier:
    ``2/(r+d2)``) and, for spectral bases, rescaled so the empirical variance
    of ``T(F_A)`` equals that of an auxiliary matrix ``A'`` drawn from the same
    scheme. ``F_B`` starts at zero.
    """
    W0 = np.asarray(W0, dtype=np.float64)
    r, d1, d2 = config.rank, config.out_dim, config.in_dim
    if W0.shape != (d1, d2):
        raise InvalidDimensionError(f"W0 has shape {W0.shape}, config expects {(d1, d2)}")
    seed = config.seed if seed is None else seed
    omega_a, omega_b = adapter_index_sets(config, seed)
    rng_values = np.random.default_rng([seed, 1])
    rng_aux = np.random.default_rng([seed, 2])

    dense_a = _draw(config.init_scheme, (r, d2), d2, r, rng_values)
    fa = SparseSpectralMatrix(omega_a, dense_a[omega_a.rows_idx, omega_a.cols_idx])
    stats = {}
    basis = config.effective_basis
    if basis.is_spectral:
        aux = _draw(config.init_scheme, (r, d2), d2, r, rng_aux)
        a_tilde = transform(fa.dense(), basis)
        var_t = float(np.var(a_tilde))
        if var_t == 0.0:
            raise InitDegenerateError("T(F_A) has zero empirical variance")
        var_aux = float(np.var(aux))
        fa.values = fa.values * math.sqrt(var_aux / var_t)
        stats["aux_variance"] = var_aux
        stats["variance_ratio"] = float(np.var(transform(fa.dense(), basis))) / var_aux
    fb = SparseSpectralMatrix(omega_b, np.zeros(len(omega_b)))
    magnitude = None
    if config.schema is Schema.DORA:
        magnitude = np.linalg.norm(W0, axis=0)
    return Adapter(config, W0, fa, fb, magnitude, stats)


def materialize(adapter: Adapter) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(A~, B~, dW)`` with ``dW = (alpha/r) B~ A~``."""
    basis = adapter.basis
    a_t = transform(adapter.fa.dense(), basis)
    b_t = transform(adapter.fb.dense(), basis)
    return a_t, b_t, adapter.config.scaling * (b_t @ a_t)


def _column_norms(V: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(V, axis=0)
    if np.any(norms == 0.0):
        bad = np.flatnonzero(norms == 0.0)
        raise NormalizationDegenerateError(f"zero-norm columns {bad.tolist()[:8]} in DoRA weight")
    return norms


def effective_weight(adapter: Adapter, delta: np.ndarray | None = None) -> np.ndarray:
    """Weight ``W'`` that the adapter realizes under its update schema."""
    if delta is None:
        delta = materialize(adapter)[2]
    schema = adapter.config.update_schema
    W0 = adapter.W0
    if schema is Schema.LORA:
        return W0 + delta
    if schema is Schema.HIRA:
        return W0 + W0 * delta
    V = W0 + delta
    return V * (adapter.magnitude / _column_norms(V))


def dropout_mask(rate: float, shape, rng) -> np.ndarray:
    """Inverted-dropout multiplier: 0 with probability ``rate``, else ``1/(1-rate)``."""
    if rate <= 0.0:
        return np.ones(shape)
    keep = rng.random(shape) >= rate
    return keep / (1.0 - rate)


def forward(
    adapter: Adapter,
    X,
    training: bool = False,
    rng: np.random.Generator | None = None,
    mask: np.ndarray | None = None,
) -> np.ndarray:
    """Adapted layer output for inputs ``X`` (``d2 x n``).

    Dropout hits only the adapter branch of LoRA-type schemas and only when
    ``training`` is set. Pass ``mask`` to replay a specific dropout draw.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != adapter.config.in_dim:
        raise InvalidDimensionError(f"X has shape {X.shape}, expected ({adapter.config.in_dim}, n)")
    cfg = adapter.config
    if cfg.update_schema is Schema.LORA:
        a_t, b_t, _ = materialize(adapter)
        Xd = X
        if training and (mask is not None or cfg.dropout_rate > 0.0):
            if mask is None:
                mask = dropout_mask(cfg.dropout_rate, X.shape, rng or np.random.default_rng())
            Xd = X * mask
        return adapter.W0 @ X + cfg.scaling * (b_t @ (a_t @ Xd))
    return effective_weight(adapter) @ X


def merge(adapter: Adapter) -> np.ndarray:
    """Fold the adapter into a single dense weight for inference."""
    return effective_weight(adapter)


def trainable_parameter_count(adapter: Adapter) -> int:
    n = len(adapter.fa.index_set) + len(adapter.fb.index_set)
    if adapter.magnitude is not None:
        n += len(adapter.magnitude)
    return n


def expected_parameter_count(
    rank: int, out_dim: int, in_dim: int, sparse_ratio: float = 0.0, dora: bool = False
) -> int:
    """Trainable coordinates of one adapted matrix, without building it."""
    n = learnable_count(rank, in_dim, sparse_ratio) + learnable_count(out_dim, rank, sparse_ratio)
    return n + (in_dim if dora else 0)
