import math

import numpy as np
import pytest

from npe2d import spectral
from npe2d.diagnostics import difference_norms, sobolev_norm
from npe2d.errors import NoContraction
from npe2d.experiments import (PicardConfig, inviscid_sweep, mollification_sweep, picard_solve,
                               regularize_initial_data, trajectory_state)
from npe2d.model import PhysParams, SimState, Variant
from npe2d.presets import gaussian_blobs, make_initial, random_smooth, single_mode
from npe2d.spectral import Grid, SpectralField2D
from npe2d.timestep import StepperConfig, integrate

NPE = PhysParams()
REG = PhysParams(ell=0.1, variant=Variant.REGULARIZED)


def admissible(state, tol=0.0):
    r, s = state.rho.samples(), state.sigma.samples()
    return np.all(s - np.abs(r) >= -tol)


class TestPresets:
    @pytest.mark.parametrize("name", ["single-mode", "gaussian-blobs", "random-smooth"])
    def test_neutral_and_admissible(self, name):
        s = make_initial(Grid(32), name)
        assert s.rho.coeffs[0, 0] == 0 and s.omega.coeffs[0, 0] == 0
        assert admissible(s)
        np.testing.assert_array_equal(spectral.dealias(s.rho).coeffs, s.rho.coeffs)

    def test_single_mode_values(self):
        s = single_mode(Grid(16), a=0.5, b=0.25, sigma_bar=1.0)
        X, Y = Grid(16).coords()
        np.testing.assert_allclose(s.rho.samples(), 0.5 * np.cos(X), atol=1e-15)
        np.testing.assert_allclose(s.sigma.samples(), 1.0 + 0.25 * np.cos(Y), atol=1e-15)

    def test_single_mode_rejects_inadmissible(self):
        with pytest.raises(ValueError):
            single_mode(Grid(16), a=0.8, b=0.5, sigma_bar=1.0)

    def test_random_smooth_is_seeded(self):
        a, b = random_smooth(Grid(16), seed=3), random_smooth(Grid(16), seed=3)
        np.testing.assert_array_equal(a.stacked(), b.stacked())
        assert not np.array_equal(a.stacked(), random_smooth(Grid(16), seed=4).stacked())

    def test_unknown_preset(self):
        with pytest.raises(ValueError):
            make_initial(Grid(16), "vortex-street")

    def test_blobs_bounds(self):
        with pytest.raises(ValueError):
            gaussian_blobs(Grid(16), base=0.0)


class TestRegularize:
    def test_tiny_kappa_is_identity(self):
        s = random_smooth(Grid(64), seed=1)
        out = regularize_initial_data(s, 1e-6)
        for a, b in zip((s.rho, s.sigma, s.omega), (out.rho, out.sigma, out.omega)):
            for k in (0, 1, 2, 3):
                assert abs(sobolev_norm(a, k) - sobolev_norm(b, k)) <= 1e-10 * max(1.0, sobolev_norm(a, k))

    def test_salt_mean_bit_exact(self):
        s = random_smooth(Grid(32), seed=2)
        assert regularize_initial_data(s, 0.3).sigma.coeffs[0, 0] == s.sigma.coeffs[0, 0]

    def test_monotone_in_kappa(self):
        s = random_smooth(Grid(64), seed=3, kmax=10)
        for k in (0, 1, 2):
            d = [sobolev_norm(regularize_initial_data(s, kappa).rho - s.rho, k) for kappa in (0.5, 0.25, 0.125)]
            assert d[0] >= d[1] >= d[2]

    def test_vorticity_band_limited(self):
        s = random_smooth(Grid(32), seed=4, kmax=8)
        out = regularize_initial_data(s, 0.25)
        ksq = Grid(32).wavenumbers.ksq
        assert np.all(out.omega.coeffs[ksq > 16] == 0)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            regularize_initial_data(random_smooth(Grid(16)), 0.0)


class TestSweeps:
    def test_zero_viscosity_matches_reference(self):
        s = random_smooth(Grid(16), seed=5)
        rep = inviscid_sweep(s, NPE, [0.0], [0.1], 0.01)
        assert np.all(rep.table == 0.0)

    def test_zero_ell_matches_reference(self):
        s = random_smooth(Grid(16), seed=6)
        rep = mollification_sweep(s, NPE, [0.0, 0.1], [0.1], 0.01)
        assert np.all(rep.table[0] == 0.0)
        assert np.all(rep.table[1, :, 0] > 0)

    def test_difference_shrinks_with_viscosity(self):
        s = random_smooth(Grid(32), seed=7)
        rep = inviscid_sweep(s, NPE, [1e-1, 1e-2, 1e-3], [0.2], 0.005)
        tot = rep.totals(1)
        assert tot[0] > tot[1] > tot[2] > 0
        assert 0.8 < rep.slopes[0, -1] < 1.2

    def test_table_agrees_with_direct_runs(self):
        s = random_smooth(Grid(16), seed=8)
        rep = inviscid_sweep(s, NPE, [0.05], [0.1], 0.01, s_list=(1,), fit_s=())
        ref = integrate(s, NPE, StepperConfig(dt=0.01, t_end=0.1))
        visc = integrate(s, PhysParams(nu=0.05, variant=Variant.NPNS), StepperConfig(dt=0.01, t_end=0.1))
        np.testing.assert_allclose(rep.table[0, 0, 0], difference_norms(visc, ref, (1,))[1], rtol=1e-12)

    def test_regularized_mode(self):
        s = random_smooth(Grid(16), seed=9)
        rep = inviscid_sweep(s, NPE, [1e-3], [0.05], 0.01, mode="regularized")
        assert np.all(rep.table > 0) and "mode=regularized" in rep.notes

    def test_bad_arguments(self):
        s = random_smooth(Grid(16))
        with pytest.raises(ValueError):
            inviscid_sweep(s, NPE, [0.1], [0.1], 0.01, mode="other")
        with pytest.raises(ValueError):
            mollification_sweep(s, NPE, [-0.1], [0.1], 0.01)


class TestPicard:
    def test_zero_data_is_fixed_point(self):
        g = Grid(16)
        zero = SimState(*(SpectralField2D.zeros(g) for _ in range(3)))
        rep = picard_solve(PicardConfig(zero, n_iters=3, T0=0.01), REG)
        assert rep.deltas == [0.0] * 3 and rep.upsilons == [0.0] * 3
        assert all(math.isnan(q) for q in rep.ratios)

    def test_converges_to_direct_solve(self):
        s = random_smooth(Grid(16), seed=10, amplitude=0.2, omega_amplitude=0.2)
        rep = picard_solve(PicardConfig(s, n_iters=10, T0=0.05, dt=0.005), REG)
        assert rep.n_steps == 10 and rep.dt == pytest.approx(0.005)
        finite = [q for q in rep.ratios if math.isfinite(q)]
        assert finite and max(finite) < 0.5
        assert rep.direct_distance < 1e-12
        direct = integrate(s, REG, StepperConfig(dt=0.005, t_end=0.05))
        last = trajectory_state(rep, -1, -1, s.grid)
        assert np.max(np.abs(last.stacked() - direct.stacked())) < 1e-12

    def test_first_iterate_is_linear_solve_with_frozen_data(self):
        s = random_smooth(Grid(16), seed=11)
        rep = picard_solve(PicardConfig(s, n_iters=2, T0=0.01, dt=0.01), REG, compare_direct=False)
        assert rep.direct_distance is None
        np.testing.assert_array_equal(rep.trajectories[0][-1], s.stacked())

    def test_default_t0_heuristic(self):
        s = random_smooth(Grid(16), seed=12)
        cfg = PicardConfig(s)
        assert cfg.resolved_T0() == pytest.approx(min(0.1, 0.05 / cfg.m_r**2))
        rep = picard_solve(PicardConfig(s, n_iters=2), REG, compare_direct=False)
        assert rep.t0_heuristic and rep.notes

    def test_no_contraction(self):
        s = random_smooth(Grid(16), seed=1, amplitude=0.9, omega_amplitude=5.0)
        with pytest.raises(NoContraction) as info:
            picard_solve(PicardConfig(s, n_iters=5, T0=5.0, dt=0.25), PhysParams(ell=0.05, variant=Variant.REGULARIZED),
                         compare_direct=False)
        assert info.value.report.ratios

    def test_needs_two_iterates(self):
        with pytest.raises(ValueError):
            PicardConfig(random_smooth(Grid(16)), n_iters=1)
