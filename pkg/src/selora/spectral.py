"""Inverse 2D spectral transforms, their adjoints, and wavelet filter banks.

Every transform here is a real linear map ``R^{r x d} -> R^{r x d}``.

Fourier
    ``T(F)[j, k] = sum_{u,v} F[u, v] cos(2 pi (u j / r + v k / d))``, the real
    part of the *unnormalized* inverse DFT of a real coefficient matrix. The
    cosine kernel is symmetric in ``(u, v) <-> (j, k)`` so the map is
    self-adjoint.

Wavelet
    Single-level separable synthesis with periodic boundaries. The coefficient
    matrix is split into quadrants ``[[a, h], [v, d]]`` of size
    ``(r/2, d/2)``; ``h`` is high-pass along rows (axis 0) and low-pass along
    columns, ``v`` the reverse. Filters are stored with orthonormal scaling
    and the 2D synthesis is multiplied by :data:`WAVELET_GAIN` (``sqrt 2``),
    so for Haar each coefficient spreads as ``1/sqrt(2)`` times a ``{-1, 1}``
    indicator over its 2x2 block. A lone approximation coefficient of 1
    therefore produces the constant :data:`HAAR_DC_GAIN` (``1/sqrt 2``).
    :func:`forward_wavelet_2d` is the exact linear inverse, which for
    orthogonal filters equals the adjoint divided by 2.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidDimensionError, NumericalError

__all__ = [
    "WAVELET_GAIN",
    "HAAR_DC_GAIN",
    "FilterKind",
    "WaveletFilter",
    "BasisKind",
    "SpectralBasis",
    "build_wavelet_filter",
    "inverse_fourier_2d",
    "inverse_wavelet_2d",
    "forward_wavelet_2d",
    "transform",
    "adjoint_transform",
]

WAVELET_GAIN = math.sqrt(2.0)
HAAR_DC_GAIN = 1.0 / math.sqrt(2.0)


class FilterKind(str, enum.Enum):
    HAAR = "haar"
    DAUBECHIES4 = "db4"
    BIORTHOGONAL22 = "bior2.2"
    COIFLET1 = "coif1"


@dataclass(frozen=True)
class WaveletFilter:
    """Analysis/synthesis taps of a two-channel filter bank.

    Taps follow the convolution convention: synthesis upsamples and convolves
    with ``synthesis_*``; analysis convolves with ``analysis_*`` and keeps
    every other sample. For orthogonal kinds the analysis taps are the
    synthesis taps reversed.
    """

    kind: FilterKind
    synthesis_low: tuple[float, ...]
    synthesis_high: tuple[float, ...]
    analysis_low: tuple[float, ...]
    analysis_high: tuple[float, ...]

    @property
    def orthogonal(self) -> bool:
        return self.kind is not FilterKind.BIORTHOGONAL22

    @property
    def length(self) -> int:
        return len(self.synthesis_low)


def _orthogonal_filter(kind: FilterKind, low: np.ndarray) -> WaveletFilter:
    n = len(low)
    high = np.array([(-1) ** i * low[n - 1 - i] for i in range(n)])
    return WaveletFilter(
        kind=kind,
        synthesis_low=tuple(low),
        synthesis_high=tuple(high),
        analysis_low=tuple(low[::-1]),
        analysis_high=tuple(high[::-1]),
    )


@lru_cache(maxsize=None)
def build_wavelet_filter(kind: FilterKind | str) -> WaveletFilter:
    """Return the filter bank for ``kind``.

    ``db4`` is the 4-tap Daubechies filter (two vanishing moments), ``coif1``
    the 6-tap Coiflet and ``bior2.2`` the spline biorthogonal pair whose
    synthesis low-pass is the hat function ``[1, 2, 1] / (2 sqrt 2)``.
    """
    kind = FilterKind(kind)
    s2 = math.sqrt(2.0)
    if kind is FilterKind.HAAR:
        return _orthogonal_filter(kind, np.array([1.0, 1.0]) / s2)
    if kind is FilterKind.DAUBECHIES4:
        s3 = math.sqrt(3.0)
        low = np.array([1 + s3, 3 + s3, 3 - s3, 1 - s3]) / (4 * s2)
        return _orthogonal_filter(kind, low)
    if kind is FilterKind.COIFLET1:
        s7 = math.sqrt(7.0)
        low = np.array(
            [1 - s7, 5 + s7, 14 + 2 * s7, 14 - 2 * s7, 1 - s7, -3 + s7]
        ) * (s2 / 32)
        return _orthogonal_filter(kind, low)
    # Biorthogonal 2.2, zero-padded to a common length of 6.
    return WaveletFilter(
        kind=kind,
        synthesis_low=(0.0, s2 / 4, s2 / 2, s2 / 4, 0.0, 0.0),
        synthesis_high=(0.0, s2 / 8, s2 / 4, -3 * s2 / 4, s2 / 4, s2 / 8),
        analysis_low=(0.0, -s2 / 8, s2 / 4, 3 * s2 / 4, s2 / 4, -s2 / 8),
        analysis_high=(0.0, s2 / 4, -s2 / 2, s2 / 4, 0.0, 0.0),
    )


class BasisKind(str, enum.Enum):
    FOURIER = "fourier"
    WAVELET = "wavelet"
    IDENTITY = "identity"


@dataclass(frozen=True)
class SpectralBasis:
    """Choice of transform ``T``.

    ``IDENTITY`` is the plain spatial parameterization used by dense and
    masked LoRA baselines.
    """

    kind: BasisKind
    filter: WaveletFilter | None = None

    @classmethod
    def fourier(cls) -> "SpectralBasis":
        return cls(BasisKind.FOURIER)

    @classmethod
    def wavelet(cls, kind: FilterKind | str = FilterKind.HAAR) -> "SpectralBasis":
        return cls(BasisKind.WAVELET, build_wavelet_filter(kind))

    @classmethod
    def identity(cls) -> "SpectralBasis":
        return cls(BasisKind.IDENTITY)

    @classmethod
    def from_name(cls, name: str) -> "SpectralBasis":
        """Parse ``fourier``, ``identity``/``none`` or a wavelet filter name."""
        key = name.strip().lower()
        if key == "fourier":
            return cls.fourier()
        if key in ("identity", "none", "spatial"):
            return cls.identity()
        if key == "wavelet":
            return cls.wavelet(FilterKind.HAAR)
        try:
            return cls.wavelet(FilterKind(key))
        except ValueError:
            raise ValueError(f"unknown basis {name!r}") from None

    @property
    def name(self) -> str:
        if self.kind is BasisKind.WAVELET:
            return self.filter.kind.value
        return self.kind.value

    @property
    def is_spectral(self) -> bool:
        return self.kind is not BasisKind.IDENTITY

    @property
    def requires_even(self) -> bool:
        return self.kind is BasisKind.WAVELET


def _check_matrix(F, *, even: bool = False) -> np.ndarray:
    F = np.asarray(F, dtype=np.float64)
    if F.ndim != 2 or F.shape[0] == 0 or F.shape[1] == 0:
        raise InvalidDimensionError(f"expected a non-empty 2D matrix, got shape {F.shape}")
    if even and (F.shape[0] % 2 or F.shape[1] % 2):
        raise InvalidDimensionError(
            f"wavelet transforms need even dimensions, got {F.shape}"
        )
    if not np.all(np.isfinite(F)):
        raise NumericalError("matrix contains non-finite entries")
    return F


def inverse_fourier_2d(F) -> np.ndarray:
    """Real part of the unnormalized inverse 2D DFT of a real matrix."""
    F = _check_matrix(F)
    # For real F, Re sum F e^{+i theta} == Re sum F e^{-i theta}.
    return np.fft.fft2(F).real


# 1D periodic filter-bank primitives along an axis. Wrap-around of taps longer
# than the signal is handled by np.roll.


def _synthesize(lo, hi, g0, g1, axis):
    shape = list(lo.shape)
    shape[axis] *= 2
    up_lo = np.zeros(shape)
    up_hi = np.zeros(shape)
    sl = [slice(None)] * len(shape)
    sl[axis] = slice(0, None, 2)
    up_lo[tuple(sl)] = lo
    up_hi[tuple(sl)] = hi
    out = np.zeros(shape)
    for l, c in enumerate(g0):
        if c:
            out += c * np.roll(up_lo, l, axis=axis)
    for l, c in enumerate(g1):
        if c:
            out += c * np.roll(up_hi, l, axis=axis)
    return out


def _synthesize_adjoint(x, g0, g1, axis):
    lo = np.zeros_like(x)
    hi = np.zeros_like(x)
    for l, c in enumerate(g0):
        if c:
            lo += c * np.roll(x, -l, axis=axis)
    for l, c in enumerate(g1):
        if c:
            hi += c * np.roll(x, -l, axis=axis)
    return _decimate(lo, axis), _decimate(hi, axis)


def _analyze(x, h0, h1, axis):
    n = len(h0)
    lo = np.zeros_like(x)
    hi = np.zeros_like(x)
    for m, c in enumerate(h0):
        if c:
            lo += c * np.roll(x, -(n - 1 - m), axis=axis)
    for m, c in enumerate(h1):
        if c:
            hi += c * np.roll(x, -(n - 1 - m), axis=axis)
    return _decimate(lo, axis), _decimate(hi, axis)


def _decimate(x, axis):
    sl = [slice(None)] * x.ndim
    sl[axis] = slice(0, None, 2)
    return x[tuple(sl)]


def _split(F):
    r2, d2 = F.shape[0] // 2, F.shape[1] // 2
    return F[:r2, :d2], F[:r2, d2:], F[r2:, :d2], F[r2:, d2:]


def _join(a, h, v, d):
    return np.block([[a, h], [v, d]])


def inverse_wavelet_2d(F, filt: WaveletFilter) -> np.ndarray:
    """Single-level 2D wavelet synthesis of the quadrant matrix ``F``."""
    F = _check_matrix(F, even=True)
    g0, g1 = filt.synthesis_low, filt.synthesis_high
    a, h, v, d = _split(F)
    row_low = _synthesize(a, v, g0, g1, axis=1)
    row_high = _synthesize(h, d, g0, g1, axis=1)
    return WAVELET_GAIN * _synthesize(row_low, row_high, g0, g1, axis=0)


def forward_wavelet_2d(M, filt: WaveletFilter) -> np.ndarray:
    """Exact inverse of :func:`inverse_wavelet_2d`."""
    M = _check_matrix(M, even=True)
    h0, h1 = filt.analysis_low, filt.analysis_high
    row_low, row_high = _analyze(M / WAVELET_GAIN, h0, h1, axis=0)
    a, v = _analyze(row_low, h0, h1, axis=1)
    h, d = _analyze(row_high, h0, h1, axis=1)
    return _join(a, h, v, d)


def _wavelet_adjoint(G, filt: WaveletFilter) -> np.ndarray:
    g0, g1 = filt.synthesis_low, filt.synthesis_high
    row_low, row_high = _synthesize_adjoint(G, g0, g1, axis=0)
    a, v = _synthesize_adjoint(row_low, g0, g1, axis=1)
    h, d = _synthesize_adjoint(row_high, g0, g1, axis=1)
    return WAVELET_GAIN * _join(a, h, v, d)


def transform(F, basis: SpectralBasis) -> np.ndarray:
    """Apply ``T`` for the given basis."""
    if basis.kind is BasisKind.FOURIER:
        return inverse_fourier_2d(F)
    if basis.kind is BasisKind.WAVELET:
        return inverse_wavelet_2d(F, basis.filter)
    return _check_matrix(F).copy()


def adjoint_transform(G, basis: SpectralBasis, shape: tuple[int, int] | None = None) -> np.ndarray:
    """Apply ``T*``, satisfying ``<T(F), G> = <F, T*(G)>``.

    ``shape``, when given, is the expected shape of ``G``.
    """
    G = _check_matrix(G, even=basis.requires_even)
    if shape is not None and G.shape != tuple(shape):
        raise InvalidDimensionError(f"gradient shape {G.shape} != {tuple(shape)}")
    if basis.kind is BasisKind.FOURIER:
        return np.fft.fft2(G).real
    if basis.kind is BasisKind.WAVELET:
        return _wavelet_adjoint(G, basis.filter)
    return G.copy()
