"""Named initial conditions. All presets are neutral, band-limited to the
dealiased range and satisfy sigma >= |rho| on the grid."""

import numpy as np

from . import spectral
from .model import SimState
from .spectral import SpectralField2D


def _finish(grid, rho, sigma, omega):
    fields = []
    for samples in (rho, sigma, omega):
        f = spectral.dealias(spectral.forward(grid, samples))
        fields.append(f.coeffs)
    fields[0][0, 0] = 0.0
    fields[2][0, 0] = 0.0
    return SimState(*(SpectralField2D(grid, c) for c in fields), time=0.0)


def single_mode(grid, a=0.5, b=0.25, sigma_bar=1.0, omega_amplitude=0.0):
    """rho = a cos x, sigma = sigma_bar + b cos y, omega = w cos x cos y."""
    if sigma_bar < abs(a) + abs(b):
        raise ValueError(f"single-mode needs sigma_bar >= |a| + |b| ({sigma_bar} < {abs(a) + abs(b)})")
    X, Y = grid.coords()
    return _finish(grid, a * np.cos(X), sigma_bar + b * np.cos(Y),
                   omega_amplitude * np.cos(X) * np.cos(Y))


def _periodic_gaussian(grid, center, width):
    """Unit-mass heat kernel on the torus centered at ``center``."""
    wn = grid.wavenumbers
    shift = np.exp(-1j * (wn.k1 * center[0] + wn.k2 * center[1]))
    coeffs = np.exp(-0.5 * width**2 * wn.ksq) * shift / (4.0 * np.pi**2)
    return spectral.inverse_array(coeffs, grid.n)


def gaussian_blobs(grid, base=0.5, mass=1.0, width=0.5, omega_amplitude=0.5):
    """Two offset positive bumps for c1 and c2 over a uniform background, plus
    a counter-rotating vortex pair."""
    if base <= 0 or mass < 0 or width <= 0:
        raise ValueError("gaussian-blobs needs base > 0, mass >= 0, width > 0")
    pi = np.pi
    c1 = base + mass * _periodic_gaussian(grid, (pi - 0.8, pi), width)
    c2 = base + mass * _periodic_gaussian(grid, (pi + 0.8, pi), width)
    peak = _periodic_gaussian(grid, (0.0, 0.0), width).max()
    w = (_periodic_gaussian(grid, (pi, pi - 1.0), width)
         - _periodic_gaussian(grid, (pi, pi + 1.0), width)) * (omega_amplitude / peak)
    return _finish(grid, c1 - c2, c1 + c2, w)


def _random_trig(grid, rng, kmax):
    wn = grid.wavenumbers
    shape = grid.spectral_shape
    coeffs = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / (1.0 + wn.ksq)
    coeffs[(wn.ksq > kmax * kmax) | (wn.ksq == 0)] = 0.0
    f = spectral.inverse_array(coeffs, grid.n)
    return f / np.max(np.abs(f))


def random_smooth(grid, seed=0, base=1.0, amplitude=0.5, kmax=4, omega_amplitude=0.5):
    """c_i = base + amplitude * (random low-mode field with unit max), so
    c_i >= base - amplitude > 0 whenever amplitude < base."""
    if not 0 <= amplitude < base:
        raise ValueError(f"random-smooth needs 0 <= amplitude < base ({amplitude}, {base})")
    rng = np.random.default_rng(seed)
    c1 = base + amplitude * _random_trig(grid, rng, kmax)
    c2 = base + amplitude * _random_trig(grid, rng, kmax)
    w = omega_amplitude * _random_trig(grid, rng, kmax)
    return _finish(grid, c1 - c2, c1 + c2, w)


PRESETS = {
    "single-mode": single_mode,
    "gaussian-blobs": gaussian_blobs,
    "random-smooth": random_smooth,
}


def make_initial(grid, preset, **options):
    try:
        factory = PRESETS[preset]
    except KeyError:
        raise ValueError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}") from None
    return factory(grid, **options)
