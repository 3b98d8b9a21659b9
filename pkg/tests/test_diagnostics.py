import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles as O
from npe2d import spectral
from npe2d.diagnostics import (DiagnosticsRecord, diagnose, difference_norms, energy_and_dissipation,
                               energy_identity_residual, energy_identity_residuals, fit_exponential,
                               invariant_report, lp_norm, sobolev_norm)
from npe2d.model import PhysParams, SimState
from npe2d.spectral import Grid
from npe2d.timestep import StepperConfig, integrate

NPE = PhysParams()


def field(n, samples):
    return spectral.forward(Grid(n), samples)


def state_from(n, rho, sigma, omega, time=0.0):
    return SimState.from_samples(Grid(n), rho, sigma, omega, time)


def random_state(seed, n=32, **kw):
    return state_from(n, *O.random_admissible(np.random.default_rng(seed), n, **kw))


class TestLp:
    def test_constant(self):
        assert lp_norm(field(16, np.full((16, 16), -3.0)), 2) == pytest.approx(6 * np.pi, rel=1e-14)

    def test_cos_l2(self):
        X, _ = O.grid_xy(32)
        assert lp_norm(field(32, np.cos(X)), 2) == pytest.approx(np.pi * np.sqrt(2), rel=1e-14)

    def test_sin_sup(self):
        X, _ = O.grid_xy(32)
        assert lp_norm(field(32, np.sin(X)), math.inf) == pytest.approx(1.0, rel=1e-14)

    def test_p_below_one_rejected(self):
        with pytest.raises(ValueError):
            lp_norm(field(8, np.ones((8, 8))), 0.5)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from([1, 2, 3, 4, math.inf]))
    def test_matches_quadrature_oracle(self, seed, p):
        a = np.random.default_rng(seed).standard_normal((16, 16))
        assert lp_norm(field(16, a), p) == pytest.approx(O.lp(a, p), rel=1e-12)


class TestSobolev:
    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_s0_is_l2(self, seed):
        a = np.random.default_rng(seed).standard_normal((16, 16))
        assert sobolev_norm(field(16, a), 0) == pytest.approx(O.lp(a, 2), rel=1e-12)

    def test_cos_h1(self):
        X, _ = O.grid_xy(32)
        assert sobolev_norm(field(32, np.cos(X)), 1) == pytest.approx(2 * np.pi, rel=1e-14)

    @pytest.mark.parametrize("s", [0, 1, 2.5, 3])
    def test_constant(self, s):
        assert sobolev_norm(field(16, np.full((16, 16), 1.5)), s) == pytest.approx(3 * np.pi, rel=1e-14)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from([0, 1, 2, 3]))
    def test_matches_complex_fft_oracle(self, seed, s):
        a = np.random.default_rng(seed).standard_normal((16, 16))
        assert sobolev_norm(field(16, a), s) == pytest.approx(O.sobolev(a, s), rel=1e-12)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            sobolev_norm(field(8, np.ones((8, 8))), -1)


class TestDiagnose:
    def test_record_columns_follow_field_order(self):
        cols = DiagnosticsRecord.columns()
        assert cols[0] == "time" and cols[-1] == "dissipation"
        assert len(cols) == len(set(cols)) == 28

    def test_against_oracle(self):
        r, s, w = O.random_admissible(np.random.default_rng(3), 32)
        rec = diagnose(state_from(32, r, s, w, time=0.25), NPE)
        assert rec.time == 0.25
        assert rec.lp_rho_3 == pytest.approx(O.lp(r, 3), rel=1e-12)
        assert rec.lp_sigma_fluct_inf == pytest.approx(O.lp(s - s.mean(), math.inf), rel=1e-12)
        assert rec.lr_omega_4 == pytest.approx(O.lp(w, 4), rel=1e-12)
        assert rec.hs_sigma_2 == pytest.approx(O.sobolev(s, 2), rel=1e-12)
        phi = -O.inverse_laplacian(r)
        grad = np.hypot(O.deriv(phi, 1, 0), O.deriv(phi, 0, 1))
        assert rec.grad_phi_sup == pytest.approx(grad.max(), rel=1e-12)
        psi = O.inverse_laplacian(w)
        u1, u2 = -O.deriv(psi, 0, 1), O.deriv(psi, 1, 0)
        assert rec.hs_u_1 == pytest.approx(math.hypot(O.sobolev(u1, 1), O.sobolev(u2, 1)), rel=1e-12)
        assert rec.min_c1 == pytest.approx(np.min((s + r) / 2), rel=1e-12)
        assert rec.min_c2 == pytest.approx(np.min((s - r) / 2), rel=1e-12)
        assert rec.mean_sigma == pytest.approx(s.mean(), rel=1e-14)
        energy = 0.5 * (O.lp(r, 2) ** 2 + O.lp(s - s.mean(), 2) ** 2)
        assert rec.energy_l2 == pytest.approx(energy, rel=1e-12)
        grads = sum(O.lp(O.deriv(f, *o), 2) ** 2 for f in (r, s) for o in ((1, 0), (0, 1)))
        quad = (2 * np.pi / 32) ** 2 * np.sum(s * r * r)
        assert rec.dissipation == pytest.approx(grads + quad, rel=1e-11)


class TestEnergyIdentity:
    def test_equilibrium_zero(self):
        n = 16
        s = state_from(n, np.zeros((n, n)), np.full((n, n), 2.0), np.zeros((n, n)))
        recs = []
        integrate(s, NPE, StepperConfig(dt=0.01, t_end=0.03), sinks=[lambda x: recs.append(diagnose(x, NPE))])
        assert np.all(energy_identity_residuals(recs) == 0.0)

    def test_semi_discrete_identity(self):
        # d/dt E = <rho, d_rho> + <sigma', d_sigma> equals -dissipation exactly for band-limited data
        from npe2d.model import tendency
        st_ = random_state(4, 32)
        t = tendency(st_, NPE)
        w = st_.grid.wavenumbers.weights
        dE = 4 * np.pi**2 * float(np.sum(w * np.real(np.conj(st_.rho.coeffs) * t.d_rho.coeffs)))
        sig = st_.sigma.coeffs.copy()
        sig[0, 0] = 0
        dE += 4 * np.pi**2 * float(np.sum(w * np.real(np.conj(sig) * t.d_sigma.coeffs)))
        _, diss = energy_and_dissipation(st_, NPE)
        assert dE == pytest.approx(-diss, rel=1e-12)

    def test_uneven_spacing_rejected(self):
        r = [diagnose(random_state(1, 16).with_time(t), NPE) for t in (0.0, 0.1, 0.3)]
        with pytest.raises(ValueError):
            energy_identity_residual(r)


class TestFitExponential:
    def test_exact_decay(self):
        t = np.linspace(0, 2, 10)
        fit = fit_exponential(t, 5 * np.exp(-2 * t), window=(0, 2))
        assert fit.rate == pytest.approx(2.0, abs=1e-10)
        assert fit.amplitude == pytest.approx(5.0, rel=1e-10)
        assert fit.rms_residual < 1e-12

    def test_constant(self):
        t = np.linspace(0, 1, 10)
        assert fit_exponential(t, np.full(10, 3.0)).rate == pytest.approx(0.0, abs=1e-12)

    def test_perturbed_decay(self):
        t = np.linspace(0, 5, 200)
        y = 5 * np.exp(-2 * t) * (1 + 0.01 * np.sin(10 * t))
        assert 1.9 <= fit_exponential(t, y, window=(0, 5)).rate <= 2.1

    def test_default_window(self):
        t = np.linspace(0, 10, 11)
        assert fit_exponential(t, np.exp(-t)).window == (2.0, 10.0)

    def test_rejects_nonpositive_and_short(self):
        with pytest.raises(ValueError):
            fit_exponential([0, 1, 2], [1.0, 0.0, 1.0])
        with pytest.raises(ValueError):
            fit_exponential([0, 1], [1.0, 0.5])


class TestDifferenceNorms:
    def test_identical(self):
        s = random_state(5, 16)
        d = difference_norms(s, s)
        assert all(v == (0.0, 0.0, 0.0) for v in d.values())

    def test_cos_h1(self):
        n = 32
        X, _ = O.grid_xy(n)
        z = np.zeros((n, n))
        a = state_from(n, np.cos(X), np.ones((n, n)), z)
        b = state_from(n, z, np.ones((n, n)), z)
        assert difference_norms(a, b, (1,))[1][0] == pytest.approx(2 * np.pi, rel=1e-14)

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_symmetric(self, seed):
        a, b = random_state(seed, 16), random_state(seed + 1, 16)
        assert difference_norms(a, b) == difference_norms(b, a)

    def test_grid_mismatch(self):
        with pytest.raises(ValueError):
            difference_norms(random_state(1, 16), random_state(1, 32))


class TestInvariants:
    def test_equilibrium_passes(self):
        n = 16
        s = state_from(n, np.zeros((n, n)), np.full((n, n), 1.0), np.zeros((n, n)))
        assert all(c.passed for c in invariant_report(s, sigma_mean0=1.0))

    def test_charged_state_fails_neutrality(self):
        n = 16
        s = state_from(n, np.full((n, n), 0.1), np.full((n, n), 1.0), np.zeros((n, n)))
        check = {c.name: c for c in invariant_report(s)}["neutrality"]
        assert not check.passed and check.residual == pytest.approx(0.1, rel=1e-14)

    def test_negative_concentration_fails_positivity(self):
        n = 16
        X, Y = O.grid_xy(n)
        c1 = 0.5 + 0.3 * np.cos(Y)
        c2 = 0.5 + 0.501 * np.cos(X)  # dips to -1e-3 at x = pi
        s = state_from(n, c1 - c2, c1 + c2, np.zeros((n, n)))
        checks = {c.name: c for c in invariant_report(s)}
        assert not checks["positivity_c2"].passed
        assert checks["positivity_c2"].residual == pytest.approx(1e-3, rel=1e-10)
        assert checks["positivity_c1"].passed

    def test_salt_drift(self):
        s = random_state(2, 16)
        checks = {c.name: c for c in invariant_report(s, sigma_mean0=s.sigma.mean * (1 + 1e-6))}
        assert not checks["salt_mean"].passed
