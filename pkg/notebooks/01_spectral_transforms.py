# %% [markdown]
# # Spectral transforms
#
# Adapter factors are synthesized from coefficient matrices by a fixed 2D
# inverse transform. This walk-through looks at what each transform does to
# a single coefficient, checks that wavelets are invertible, and shows why
# the real-part Fourier map only reaches half of the matrix space.

# %%
import numpy as np

from selora.spectral import (
    FilterKind,
    SpectralBasis,
    adjoint_transform,
    build_wavelet_filter,
    forward_wavelet_2d,
    inverse_wavelet_2d,
    transform,
)

np.set_printoptions(precision=3, suppress=True)

# %% [markdown]
# A lone approximation coefficient under Haar fills one 2x2 block with
# `1/sqrt(2)`. A detail coefficient gives the same block with alternating signs.

# %%
F = np.zeros((4, 6))
F[0, 0] = 1.0
print(transform(F, SpectralBasis.wavelet("haar")))

F = np.zeros((4, 6))
F[2, 3] = 1.0  # diagonal detail quadrant
print(transform(F, SpectralBasis.wavelet("haar")))

# %% [markdown]
# Longer filters spread one coefficient over more samples, wrapping around
# the edges periodically.

# %%
for kind in FilterKind:
    F = np.zeros((8, 8))
    F[1, 1] = 1.0
    M = transform(F, SpectralBasis.wavelet(kind))
    print(f"{kind.value:8s} nonzeros={np.count_nonzero(np.abs(M) > 1e-14):3d}  sum={M.sum():+.4f}")

# %% [markdown]
# Synthesis and analysis are exact inverses for every filter bank.

# %%
rng = np.random.default_rng(0)
M = rng.standard_normal((16, 32))
for kind in FilterKind:
    filt = build_wavelet_filter(kind)
    err = np.abs(inverse_wavelet_2d(forward_wavelet_2d(M, filt), filt) - M).max()
    print(f"{kind.value:8s} round-trip error {err:.1e}")

# %% [markdown]
# The Fourier map keeps the real part of an unnormalized inverse DFT of a real
# matrix, i.e. a 2D cosine sum. Coefficients at `(u, v)` and `(-u, -v)` give
# the same output, so the map has rank about `rd/2`.

# %%
r, d = 4, 6
basis = SpectralBasis.fourier()
T = np.stack([transform(e.reshape(r, d), basis).ravel() for e in np.eye(r * d)], axis=1)
print("rank", np.linalg.matrix_rank(T), "of", r * d)

# %% [markdown]
# Gradients flow back through the adjoint. It satisfies `<T F, G> = <F, T* G>`.

# %%
for basis in [SpectralBasis.fourier(), SpectralBasis.wavelet("bior2.2")]:
    F, G = rng.standard_normal((2, 6, 8))
    print(basis.name, np.sum(transform(F, basis) * G) - np.sum(F * adjoint_transform(G, basis)))
