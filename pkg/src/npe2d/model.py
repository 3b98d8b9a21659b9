"""State, parameters and right-hand sides in the (rho, sigma, omega) variables.

rho = c1 - c2 is the charge density, sigma = c1 + c2 the salt, omega the
scalar vorticity. Velocity and potential are always derived:
u = perp-grad of inverse-Laplacian(omega), and -eps * Laplacian(Phi) = rho.
"""

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from . import spectral
from .errors import NonFinite
from .spectral import SpectralField2D, check_mean_zero, inverse_array, forward_array


class Variant(str, Enum):
    NPE = "NPE"
    NPNS = "NPNS"
    REGULARIZED = "REGULARIZED"


@dataclass(frozen=True)
class PhysParams:
    """Physical constants and model selection.

    NPE is inviscid with the plain advecting velocity, NPNS adds nu * Lap(omega),
    REGULARIZED advects with the mollified velocity at scale ``ell``.
    """

    D: float = 1.0
    eps: float = 1.0
    kbtk: float = 1.0
    nu: float = 0.0
    ell: float = 0.0
    variant: Variant = Variant.NPE

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if not self.D > 0:
            raise ValueError(f"D must be > 0, got {self.D!r}")
        if not self.eps > 0:
            raise ValueError(f"eps must be > 0, got {self.eps!r}")
        if not self.kbtk >= 0:
            raise ValueError(f"kbtk must be >= 0, got {self.kbtk!r}")
        if not self.nu >= 0:
            raise ValueError(f"nu must be >= 0, got {self.nu!r}")
        if not self.ell >= 0:
            raise ValueError(f"ell must be >= 0, got {self.ell!r}")
        if self.variant is Variant.NPE and self.nu != 0:
            raise ValueError("variant NPE requires nu = 0")
        if self.variant is Variant.NPNS and self.ell != 0:
            raise ValueError("variant NPNS requires ell = 0")
        if self.variant is Variant.REGULARIZED:
            if not self.ell > 0:
                raise ValueError("variant REGULARIZED requires ell > 0")
            if self.nu != 0:
                raise ValueError("variant REGULARIZED is inviscid; nu must be 0")

    @classmethod
    def infer(cls, **kwargs):
        """Build params, picking the variant from nu/ell when not given."""
        if kwargs.get("variant") is None:
            kwargs.pop("variant", None)
            if kwargs.get("ell", 0.0) > 0:
                kwargs["variant"] = Variant.REGULARIZED
            elif kwargs.get("nu", 0.0) > 0:
                kwargs["variant"] = Variant.NPNS
            else:
                kwargs["variant"] = Variant.NPE
        return cls(**kwargs)

    def with_(self, **changes):
        return replace(self, **changes)

    @property
    def viscosity(self):
        return self.nu if self.variant is Variant.NPNS else 0.0

    @property
    def advection_scale(self):
        return self.ell if self.variant is Variant.REGULARIZED else 0.0


@dataclass(frozen=True, eq=False)
class SimState:
    rho: SpectralField2D
    sigma: SpectralField2D
    omega: SpectralField2D
    time: float = 0.0

    def __post_init__(self):
        self.rho._check(self.sigma)
        self.rho._check(self.omega)

    @property
    def grid(self):
        return self.rho.grid

    def stacked(self):
        return np.stack([self.rho.coeffs, self.sigma.coeffs, self.omega.coeffs])

    @classmethod
    def from_stacked(cls, grid, coeffs, time=0.0):
        return cls(
            SpectralField2D(grid, coeffs[0]),
            SpectralField2D(grid, coeffs[1]),
            SpectralField2D(grid, coeffs[2]),
            float(time),
        )

    @classmethod
    def from_samples(cls, grid, rho, sigma, omega, time=0.0):
        return cls(
            spectral.forward(grid, rho),
            spectral.forward(grid, sigma),
            spectral.forward(grid, omega),
            float(time),
        )

    def with_time(self, time):
        return replace(self, time=float(time))


@dataclass(frozen=True, eq=False)
class Tendency:
    d_rho: SpectralField2D
    d_sigma: SpectralField2D
    d_omega: SpectralField2D


def poisson_potential(rho, eps):
    """Solve -eps * Lap(Phi) = rho for the mean-zero potential."""
    return spectral.inverse_laplacian(rho) * (-1.0 / eps)


def velocity_from_vorticity(omega):
    """Biot-Savart: u = (-d_y psi, d_x psi) with Lap(psi) = omega."""
    psi = spectral.inverse_laplacian(omega)
    return -spectral.derivative(psi, "dy"), spectral.derivative(psi, "dx")


def concentrations(state):
    return (state.sigma + state.rho) * 0.5, (state.sigma - state.rho) * 0.5


def combine(c1, c2):
    return c1 - c2, c1 + c2


def linear_rates(grid, params):
    """Diagonal diffusion operator per field, shape (3, n, n//2+1)."""
    ksq = grid.wavenumbers.ksq
    lin = np.empty((3,) + grid.spectral_shape)
    lin[0] = -params.D * ksq
    lin[1] = -params.D * ksq
    lin[2] = -params.viscosity * ksq
    return lin


def _potential_and_velocity(coef, n, params):
    wn = spectral._wavenumbers(n)
    check_mean_zero(coef[0], "charge density")
    check_mean_zero(coef[2], "vorticity")
    phi = spectral.inverse_laplacian_array(coef[0], n) * (-1.0 / params.eps)
    psi = spectral.inverse_laplacian_array(coef[2], n)
    if params.advection_scale > 0:
        psi = psi * np.exp(-0.5 * params.advection_scale**2 * wn.ksq)
    return phi, -1j * wn.k2_odd * psi, 1j * wn.k1_odd * psi


def nonlinear_rhs(y, n, params, coef=None):
    """Non-diffusive part of the tendency on stacked coefficients.

    ``coef`` supplies the state that sets the potential and the advecting
    velocity; by default it is ``y`` itself. Passing a different state gives
    the frozen-coefficient linear operator used by the Picard iteration.
    """
    frozen = coef is not None
    if coef is None:
        coef = y
    wn = spectral._wavenumbers(n)
    dx, dy = 1j * wn.k1_odd, 1j * wn.k2_odd
    phi, u1, u2 = _potential_and_velocity(coef, n, params)
    rho, sig, om = y
    parts = [rho, sig, dx * rho, dy * rho, dx * sig, dy * sig, dx * om, dy * om,
             dx * phi, dy * phi, u1, u2]
    if frozen:
        parts.append(coef[0])
    phys = inverse_array(np.stack(parts), n)
    r, s, rx, ry, sx, sy, wx, wy, px, py, v1, v2 = phys[:12]
    # Lap(Phi) = -rho/eps, with rho taken from the coefficient state
    lap_phi = -(phys[12] if frozen else r) / params.eps
    out = np.empty((3, n, n))
    out[0] = -(v1 * rx + v2 * ry) + params.D * (sx * px + sy * py + s * lap_phi)
    out[1] = -(v1 * sx + v2 * sy) + params.D * (rx * px + ry * py + r * lap_phi)
    out[2] = -(v1 * wx + v2 * wy) - params.kbtk * (rx * py - ry * px)
    result = forward_array(out) * wn.dealias
    if not np.all(np.isfinite(result)):
        raise NonFinite("non-finite tendency")
    return result


def full_rhs(y, n, params, coef=None):
    grid = spectral.Grid(n)
    return nonlinear_rhs(y, n, params, coef) + linear_rates(grid, params) * y


def _as_tendency(grid, arr):
    return Tendency(*(SpectralField2D(grid, a) for a in arr))


def tendency(state, params):
    """Time derivative of (rho, sigma, omega), diffusion included."""
    return _as_tendency(state.grid, full_rhs(state.stacked(), state.grid.n, params))


def frozen_tendency(state, coefficient_state, params):
    """Tendency that is linear in ``state``, with potential and velocity frozen
    from ``coefficient_state``."""
    n = state.grid.n
    y = state.stacked()
    arr = full_rhs(y, n, params, coef=coefficient_state.stacked())
    return _as_tendency(state.grid, arr)


def velocity_form_tendency(state, params):
    """Leray-projected right-hand side of the velocity-form vortex method.

    du/dt = -P[ [u].grad u + (grad [u])^T u + kbtk rho grad Phi ] (+ nu Lap u for NPNS),
    where [u] is the mollified velocity. Its curl reproduces the omega tendency.
    """
    grid = state.grid
    n = grid.n
    wn = grid.wavenumbers
    dx, dy = 1j * wn.k1_odd, 1j * wn.k2_odd
    coef = state.stacked()
    phi, v1, v2 = _potential_and_velocity(coef, n, params)
    psi = spectral.inverse_laplacian_array(coef[2], n)
    u1, u2 = -dy * psi, dx * psi
    phys = inverse_array(
        np.stack([u1, u2, dx * u1, dy * u1, dx * u2, dy * u2,
                  v1, v2, dx * v1, dy * v1, dx * v2, dy * v2,
                  coef[0], dx * phi, dy * phi]),
        n,
    )
    U1, U2, U1x, U1y, U2x, U2y, V1, V2, V1x, V1y, V2x, V2y, R, Px, Py = phys
    g = np.empty((2, n, n))
    g[0] = V1 * U1x + V2 * U1y + U1 * V1x + U2 * V2x + params.kbtk * R * Px
    g[1] = V1 * U2x + V2 * U2y + U1 * V1y + U2 * V2y + params.kbtk * R * Py
    gh = forward_array(g) * wn.dealias
    kk = wn.k1_odd**2 + wn.k2_odd**2
    safe = np.where(kk > 0, kk, 1.0)
    kdotg = (wn.k1_odd * gh[0] + wn.k2_odd * gh[1]) / safe
    du1 = -(gh[0] - wn.k1_odd * kdotg)
    du2 = -(gh[1] - wn.k2_odd * kdotg)
    if params.viscosity > 0:
        du1 = du1 - params.viscosity * wn.ksq * u1
        du2 = du2 - params.viscosity * wn.ksq * u2
    if not (np.all(np.isfinite(du1)) and np.all(np.isfinite(du2))):
        raise NonFinite("non-finite velocity tendency")
    return SpectralField2D(grid, du1), SpectralField2D(grid, du2)
