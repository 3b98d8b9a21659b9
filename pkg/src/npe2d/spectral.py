"""Fourier calculus on the 2*pi-periodic square.

Fields are stored as the non-redundant half of their Fourier coefficients
(the layout of a real-to-complex FFT): array shape ``(n, n//2 + 1)``, axis 0
holds k1 in FFT order, axis 1 holds k2 = 0..n/2. Coefficients are normalized
so that ``f(x) = sum_k fhat_k exp(i k.x)``; the collocation point ``[i, j]``
sits at ``(x, y) = (i h, j h)`` with ``h = 2 pi / n``.
"""

import functools
import math
import os
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.fft

from .errors import NonFinite, NonZeroMean

TWO_PI = 2.0 * math.pi


def fft_workers():
    """Thread cap for transforms, taken from NPE_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("NPE_THREADS", "1")))
    except ValueError:
        return 1


class _Wavenumbers(NamedTuple):
    k1: np.ndarray  # (n, 1)
    k2: np.ndarray  # (1, n//2+1)
    k1_odd: np.ndarray  # Nyquist row zeroed
    k2_odd: np.ndarray  # Nyquist column zeroed
    ksq: np.ndarray
    weights: np.ndarray  # multiplicity of each stored mode in the full spectrum
    dealias: np.ndarray


@functools.lru_cache(maxsize=None)
def _wavenumbers(n):
    k1 = np.fft.fftfreq(n, d=1.0 / n).reshape(n, 1)
    k2 = np.arange(n // 2 + 1, dtype=float).reshape(1, n // 2 + 1)
    k1_odd = k1.copy()
    k1_odd[n // 2, 0] = 0.0
    k2_odd = k2.copy()
    k2_odd[0, n // 2] = 0.0
    ksq = k1**2 + k2**2
    weights = np.full((n, n // 2 + 1), 2.0)
    weights[:, 0] = 1.0
    weights[:, n // 2] = 1.0
    cutoff = n / 3.0
    dealias = (np.abs(k1) <= cutoff) & (np.abs(k2) <= cutoff)
    for arr in (k1, k2, k1_odd, k2_odd, ksq, weights, dealias):
        arr.setflags(write=False)
    return _Wavenumbers(k1, k2, k1_odd, k2_odd, ksq, weights, dealias)


@dataclass(frozen=True)
class Grid:
    """Uniform n x n collocation grid on the torus of side 2*pi."""

    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 8 or self.n % 2:
            raise ValueError(f"grid size must be an even integer >= 8, got {self.n!r}")

    @property
    def h(self):
        return TWO_PI / self.n

    @property
    def shape(self):
        return (self.n, self.n)

    @property
    def spectral_shape(self):
        return (self.n, self.n // 2 + 1)

    @property
    def wavenumbers(self):
        return _wavenumbers(self.n)

    def coords(self):
        """Collocation coordinates ``(X, Y)``, each of shape ``(n, n)``."""
        x = np.arange(self.n) * self.h
        return np.meshgrid(x, x, indexing="ij")


@dataclass(frozen=True, eq=False)
class SpectralField2D:
    """A real scalar field on the torus, carried by its Fourier coefficients."""

    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        if self.coeffs.shape != self.grid.spectral_shape:
            raise ValueError(
                f"coefficient array shape {self.coeffs.shape} does not match "
                f"grid {self.grid.spectral_shape}"
            )

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.spectral_shape, dtype=complex))

    @classmethod
    def constant(cls, grid, value):
        c = np.zeros(grid.spectral_shape, dtype=complex)
        c[0, 0] = value
        return cls(grid, c)

    @classmethod
    def from_samples(cls, grid, samples):
        return forward(grid, samples)

    def samples(self):
        return inverse(self)

    @property
    def mean(self):
        return float(self.coeffs[0, 0].real)

    def coefficient(self, k1, k2):
        """Coefficient of exp(i(k1 x + k2 y)) for any integer pair in range."""
        n = self.grid.n
        if not -n // 2 <= k2 <= n // 2:
            raise IndexError(f"k2={k2} outside resolved range")
        if k2 == -n // 2:
            k2 = n // 2
        if k2 < 0:
            return complex(np.conj(self.coeffs[(-k1) % n, -k2]))
        return complex(self.coeffs[k1 % n, k2])

    def full_coeffs(self):
        """All n x n coefficients in FFT order, rebuilt by Hermitian symmetry."""
        n = self.grid.n
        full = np.empty((n, n), dtype=complex)
        full[:, : n // 2 + 1] = self.coeffs
        rows = (-np.arange(n)) % n
        cols = np.arange(n // 2 + 1, n)
        full[:, cols] = np.conj(self.coeffs[rows][:, n - cols])
        return full

    def copy(self):
        return SpectralField2D(self.grid, self.coeffs.copy())

    def _check(self, other):
        if other.grid != self.grid:
            raise ValueError(f"grid mismatch: {self.grid} vs {other.grid}")

    def __add__(self, other):
        if isinstance(other, SpectralField2D):
            self._check(other)
            return SpectralField2D(self.grid, self.coeffs + other.coeffs)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, SpectralField2D):
            self._check(other)
            return SpectralField2D(self.grid, self.coeffs - other.coeffs)
        return NotImplemented

    def __neg__(self):
        return SpectralField2D(self.grid, -self.coeffs)

    def __mul__(self, scalar):
        if isinstance(scalar, SpectralField2D):
            return NotImplemented
        return SpectralField2D(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return SpectralField2D(self.grid, self.coeffs / scalar)

    def __repr__(self):
        return f"SpectralField2D(n={self.grid.n}, mean={self.mean:.6g})"


def forward_array(samples):
    """Batched forward transform over the last two axes, normalized."""
    n = samples.shape[-1]
    return scipy.fft.rfft2(samples, workers=fft_workers()) / (n * n)


def inverse_array(coeffs, n):
    """Batched inverse transform over the last two axes."""
    return scipy.fft.irfft2(coeffs * (n * n), s=(n, n), workers=fft_workers())


def forward(grid, samples):
    samples = np.asarray(samples)
    if samples.shape != grid.shape:
        raise ValueError(f"samples have shape {samples.shape}, grid expects {grid.shape}")
    if np.iscomplexobj(samples):
        raise ValueError("forward transform expects real samples")
    return SpectralField2D(grid, forward_array(samples.astype(float, copy=False)))


def inverse(field):
    return inverse_array(field.coeffs, field.grid.n)


def transform(x, direction="forward", grid=None):
    """Physical <-> spectral conversion.

    ``transform(samples, "forward", grid)`` returns a field;
    ``transform(field, "inverse")`` returns the real sample array.
    """
    if direction == "forward":
        if grid is None:
            samples = np.asarray(x)
            if samples.ndim != 2 or samples.shape[0] != samples.shape[1]:
                raise ValueError(f"cannot infer a square grid from shape {samples.shape}")
            grid = Grid(samples.shape[0])
        return forward(grid, x)
    if direction == "inverse":
        if grid is not None and x.grid != grid:
            raise ValueError(f"grid mismatch: {x.grid} vs {grid}")
        return inverse(x)
    raise ValueError(f"unknown transform direction {direction!r}")


def derivative(f, kind):
    """Spectral dx, dy or laplacian; odd derivatives drop the Nyquist mode."""
    wn = f.grid.wavenumbers
    if kind == "dx":
        mult = 1j * wn.k1_odd
    elif kind == "dy":
        mult = 1j * wn.k2_odd
    elif kind == "laplacian":
        mult = -wn.ksq
    else:
        raise ValueError(f"unknown derivative kind {kind!r}")
    return SpectralField2D(f.grid, f.coeffs * mult)


def check_mean_zero(coeffs, what="field"):
    mean = abs(coeffs[0, 0])
    if mean == 0.0:
        return
    scale = np.max(np.abs(coeffs))
    if not math.isfinite(scale):
        raise NonFinite(f"{what} has non-finite coefficients")
    if mean > 1e-12 * max(scale, 1.0):
        raise NonZeroMean(f"{what} has nonzero mean {coeffs[0, 0].real:.3e}")


def inverse_laplacian_array(coeffs, n):
    ksq = _wavenumbers(n).ksq
    out = np.zeros_like(coeffs)
    out[..., 1:, :] = -coeffs[..., 1:, :] / ksq[1:, :]
    out[..., 0, 1:] = -coeffs[..., 0, 1:] / ksq[0, 1:]
    return out


def inverse_laplacian(f):
    check_mean_zero(f.coeffs)
    return SpectralField2D(f.grid, inverse_laplacian_array(f.coeffs, f.grid.n))


def dealias(f):
    """Two-thirds rule: zero every mode with max(|k1|, |k2|) > n/3."""
    return SpectralField2D(f.grid, f.coeffs * f.grid.wavenumbers.dealias)


def mollifier_multiplier(grid, ell):
    if ell < 0:
        raise ValueError(f"mollification scale must be nonnegative, got {ell!r}")
    return np.exp(-0.5 * ell * ell * grid.wavenumbers.ksq)


def mollify(f, ell):
    """Gaussian smoothing exp(-ell^2 |k|^2 / 2); positive kernel, unit mass."""
    return SpectralField2D(f.grid, f.coeffs * mollifier_multiplier(f.grid, ell))


@functools.lru_cache(maxsize=64)
def low_mode_mask(n, m):
    """Half-spectrum mask keeping the m lowest modes plus their conjugates.

    Modes are ordered by |k|^2, ties broken lexicographically on (k1, k2),
    with both wavenumbers in {-n/2, ..., n/2 - 1}.
    """
    if m < 1:
        raise ValueError(f"number of retained modes must be >= 1, got {m!r}")
    k = np.fft.fftfreq(n, d=1.0 / n).astype(int)
    K1, K2 = np.meshgrid(k, k, indexing="ij")
    order = np.lexsort((K2.ravel(), K1.ravel(), (K1**2 + K2**2).ravel()))
    keep = np.zeros(n * n, dtype=bool)
    keep[order[:m]] = True
    keep = keep.reshape(n, n)
    # conjugate partner of index (i, j) is ((-i) % n, (-j) % n)
    keep |= keep[(-np.arange(n)) % n][:, (-np.arange(n)) % n]
    mask = keep[:, : n // 2 + 1].copy()
    mask.setflags(write=False)
    return mask


def modes_within_radius(grid, radius):
    """Number of Fourier modes with |k| <= radius on this grid."""
    k = np.fft.fftfreq(grid.n, d=1.0 / grid.n)
    ksq = k[:, None] ** 2 + k[None, :] ** 2
    return int(np.count_nonzero(ksq <= radius * radius))


def project_low_modes(f, m):
    return SpectralField2D(f.grid, f.coeffs * low_mode_mask(f.grid.n, int(m)))


def product(a, b):
    """Dealiased pointwise product of two fields."""
    a._check(b)
    n = a.grid.n
    prod = inverse_array(a.coeffs, n) * inverse_array(b.coeffs, n)
    return SpectralField2D(a.grid, forward_array(prod) * a.grid.wavenumbers.dealias)
