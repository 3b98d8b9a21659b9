"""Monitored norms, invariant residuals and rate fits.

Integrals are over the torus of area 4 pi^2. L^p norms use collocation
quadrature; H^s norms use the inhomogeneous weight (1 + |k|^2)^s so that
H^0 coincides with L^2.
"""

import math
from dataclasses import dataclass, fields

import numpy as np

from .model import velocity_from_vorticity
from .spectral import SpectralField2D, inverse_array

AREA = 4.0 * math.pi**2

RECORD_P = (2, 3, 4, math.inf)
RECORD_R = (2, 4, math.inf)
RECORD_S = (1, 2, 3)


@dataclass(frozen=True)
class DiagnosticsRecord:
    """One row of monitored quantities; field order is the CSV column order."""

    time: float
    lp_rho_2: float
    lp_rho_3: float
    lp_rho_4: float
    lp_rho_inf: float
    lp_sigma_fluct_2: float
    lp_sigma_fluct_3: float
    lp_sigma_fluct_4: float
    lp_sigma_fluct_inf: float
    grad_phi_sup: float
    hs_rho_1: float
    hs_rho_2: float
    hs_rho_3: float
    hs_sigma_1: float
    hs_sigma_2: float
    hs_sigma_3: float
    lr_omega_2: float
    lr_omega_4: float
    lr_omega_inf: float
    hs_u_1: float
    hs_u_2: float
    hs_u_3: float
    min_c1: float
    min_c2: float
    mean_rho: float
    mean_sigma: float
    energy_l2: float
    dissipation: float

    @classmethod
    def columns(cls):
        return [f.name for f in fields(cls)]

    def values(self):
        return [getattr(self, name) for name in self.columns()]


@dataclass(frozen=True)
class RateFit:
    rate: float
    amplitude: float
    rms_residual: float
    window: tuple


@dataclass(frozen=True)
class InvariantCheck:
    name: str
    residual: float
    passed: bool


def _lp_samples(samples, h, p):
    if p < 1:
        raise ValueError(f"L^p norm needs p >= 1, got {p!r}")
    a = np.abs(samples)
    if math.isinf(p):
        return float(a.max())
    return float((h * h * np.sum(a**p)) ** (1.0 / p))


def lp_norm(f, p):
    return _lp_samples(f.samples(), f.grid.h, p)


def _sobolev_sq(coeffs, grid, s):
    wn = grid.wavenumbers
    weight = wn.weights * (1.0 + wn.ksq) ** s
    return AREA * float(np.sum(weight * np.abs(coeffs) ** 2))


def sobolev_norm(f, s):
    if s < 0:
        raise ValueError(f"Sobolev index must be >= 0, got {s!r}")
    return math.sqrt(_sobolev_sq(f.coeffs, f.grid, s))


def vector_sobolev_norm(components, s):
    return math.sqrt(sum(sobolev_norm(c, s) ** 2 for c in components))


def _grad_sq(coeffs, grid):
    wn = grid.wavenumbers
    return AREA * float(np.sum(wn.weights * wn.ksq * np.abs(coeffs) ** 2))


def energy_and_dissipation(state, params):
    """energy_l2 = (|rho|^2 + |sigma - mean|^2)/2 and the matching dissipation rate."""
    grid = state.grid
    rho_c = state.rho.coeffs
    sig_c = state.sigma.coeffs.copy()
    sig_c[0, 0] = 0.0
    energy = 0.5 * (_sobolev_sq(rho_c, grid, 0) + _sobolev_sq(sig_c, grid, 0))
    phys = inverse_array(np.stack([state.rho.coeffs, state.sigma.coeffs]), grid.n)
    sigma_rho2 = grid.h**2 * float(np.sum(phys[1] * phys[0] ** 2))
    diss = params.D * (_grad_sq(rho_c, grid) + _grad_sq(sig_c, grid)) + params.D / params.eps * sigma_rho2
    return energy, diss


def diagnose(state, params):
    grid = state.grid
    n, h = grid.n, grid.h
    wn = grid.wavenumbers
    dx, dy = 1j * wn.k1_odd, 1j * wn.k2_odd
    rho_c, sig_c, om_c = state.rho.coeffs, state.sigma.coeffs, state.omega.coeffs
    sigma_bar = float(sig_c[0, 0].real)
    phi_c = np.zeros_like(rho_c)
    nz = wn.ksq > 0
    phi_c[nz] = rho_c[nz] / (params.eps * wn.ksq[nz])
    phys = inverse_array(np.stack([rho_c, sig_c, om_c, dx * phi_c, dy * phi_c]), n)
    r, s, w, px, py = phys
    fluct = s - sigma_bar
    u1, u2 = velocity_from_vorticity(state.omega)
    energy, diss = energy_and_dissipation(state, params)
    values = dict(
        time=float(state.time),
        grad_phi_sup=float(np.sqrt(np.max(px**2 + py**2))),
        min_c1=float(np.min(0.5 * (s + r))),
        min_c2=float(np.min(0.5 * (s - r))),
        mean_rho=float(rho_c[0, 0].real),
        mean_sigma=sigma_bar,
        energy_l2=energy,
        dissipation=diss,
    )
    for p in RECORD_P:
        tag = "inf" if math.isinf(p) else str(p)
        values[f"lp_rho_{tag}"] = _lp_samples(r, h, p)
        values[f"lp_sigma_fluct_{tag}"] = _lp_samples(fluct, h, p)
    for q in RECORD_R:
        tag = "inf" if math.isinf(q) else str(q)
        values[f"lr_omega_{tag}"] = _lp_samples(w, h, q)
    for k in RECORD_S:
        values[f"hs_rho_{k}"] = sobolev_norm(state.rho, k)
        values[f"hs_sigma_{k}"] = sobolev_norm(state.sigma, k)
        values[f"hs_u_{k}"] = vector_sobolev_norm((u1, u2), k)
    return DiagnosticsRecord(**values)


def energy_identity_residual(records):
    """Centered d/dt(energy_l2) at the middle record plus its dissipation."""
    a, b, c = records
    dt1, dt2 = b.time - a.time, c.time - b.time
    if not dt1 > 0 or abs(dt1 - dt2) > 1e-9 * dt1:
        raise ValueError(f"records are not equally spaced: {dt1!r} vs {dt2!r}")
    return (c.energy_l2 - a.energy_l2) / (c.time - a.time) + b.dissipation


def energy_identity_residuals(records):
    return np.array([energy_identity_residual(records[i - 1:i + 2]) for i in range(1, len(records) - 1)])


def fit_exponential(times, values, window=None):
    """Least-squares fit of log(y) = log(A) - rate * t over the window.

    The default window is [0.2 T, T] with T the last sample time.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if window is None:
        window = (0.2 * t.max(), t.max())
    lo, hi = window
    sel = (t >= lo - 1e-12) & (t <= hi + 1e-12)
    if np.count_nonzero(sel) < 3:
        raise ValueError("exponential fit needs at least 3 points in the window")
    if np.any(y[sel] <= 0):
        raise ValueError("exponential fit needs strictly positive samples")
    slope, intercept = np.polyfit(t[sel], np.log(y[sel]), 1)
    resid = np.log(y[sel]) - (slope * t[sel] + intercept)
    return RateFit(
        rate=float(-slope),
        amplitude=float(math.exp(intercept)),
        rms_residual=float(np.sqrt(np.mean(resid**2))),
        window=(float(lo), float(hi)),
    )


def difference_norms(a, b, s_list=RECORD_S):
    """Map s -> (|rho_a - rho_b|_{H^s}, |sigma_a - sigma_b|_{H^s}, |u_a - u_b|_{H^s})."""
    if a.grid != b.grid:
        raise ValueError(f"grid mismatch: {a.grid} vs {b.grid}")
    d_rho = a.rho - b.rho
    d_sigma = a.sigma - b.sigma
    d_omega = a.omega - b.omega
    # Biot-Savart is linear; the mean of the vorticity difference does not move u
    d_omega = SpectralField2D(d_omega.grid, np.where(d_omega.grid.wavenumbers.ksq > 0, d_omega.coeffs, 0.0))
    u1, u2 = velocity_from_vorticity(d_omega)
    return {
        s: (sobolev_norm(d_rho, s), sobolev_norm(d_sigma, s), vector_sobolev_norm((u1, u2), s))
        for s in s_list
    }


def invariant_report(state, sigma_mean0=None, tol_neutral=1e-12, tol_salt=1e-10, tol_pos=1e-8):
    """Neutrality, salt-mean drift, positivity and finiteness checks."""
    stacked = state.stacked()
    finite = bool(np.all(np.isfinite(stacked)))
    checks = [InvariantCheck("finite", 0.0 if finite else math.inf, finite)]
    if not finite:
        return checks
    mean_rho = abs(state.rho.mean)
    checks.append(InvariantCheck("neutrality", mean_rho, mean_rho <= tol_neutral))
    if sigma_mean0 is not None:
        drift = abs(state.sigma.mean - sigma_mean0)
        if sigma_mean0 != 0:
            drift /= abs(sigma_mean0)
        checks.append(InvariantCheck("salt_mean", drift, drift <= tol_salt))
    r, s = inverse_array(stacked[:2], state.grid.n)
    for name, c in (("positivity_c1", 0.5 * (s + r)), ("positivity_c2", 0.5 * (s - r))):
        low = float(c.min())
        checks.append(InvariantCheck(name, max(0.0, -low), low >= -tol_pos))
    return checks
