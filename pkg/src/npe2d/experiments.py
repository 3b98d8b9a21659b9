"""Verification campaigns: inviscid-limit and mollification sweeps, initial
data regularization, and the frozen-coefficient Picard iteration."""

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import spectral
from .diagnostics import AREA, diagnose, difference_norms, sobolev_norm, vector_sobolev_norm
from .errors import NoContraction, NonFinite
from .model import SimState, Variant, linear_rates, nonlinear_rhs, velocity_from_vorticity
from .timestep import StepperConfig, integrate, lawson_rk4, reproject_means

log = logging.getLogger(__name__)


def regularize_initial_data(state0, kappa):
    """Smooth concentrations at scale kappa and keep only the vorticity modes
    with |k| <= floor(1/kappa)."""
    if not kappa > 0:
        raise ValueError(f"kappa must be > 0, got {kappa!r}")
    grid = state0.grid
    radius = math.floor(1.0 / kappa)
    m = spectral.modes_within_radius(grid, radius)
    return SimState(
        spectral.mollify(state0.rho, kappa),
        spectral.mollify(state0.sigma, kappa),
        spectral.project_low_modes(state0.omega, m),
        state0.time,
    )


def _worker_count(n_tasks):
    cap = os.environ.get("NPE_THREADS")
    workers = os.cpu_count() or 1
    if cap:
        try:
            workers = min(workers, max(1, int(cap)))
        except ValueError:
            pass
    return max(1, min(workers, n_tasks))


def _parallel_map(fn, tasks):
    workers = _worker_count(len(tasks))
    if workers == 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def _run_member(task):
    """Integrate one sweep member; returns states at the sample times and
    (optionally) diagnostics records. Errors are returned, not raised, so the
    parent can build a partial report."""
    state, params, dt, times, record_interval = task
    states, records = [], []
    sinks = (lambda s: records.append(diagnose(s, params)),) if record_interval else ()
    try:
        for t in times:
            cfg = StepperConfig(dt=dt, t_end=t)
            state = integrate(state, params, cfg, sinks=sinks, output_interval=record_interval)
            if records:
                records.pop()  # the next segment re-emits its start state
            states.append(state)
        if record_interval:
            records.append(diagnose(state, params))
    except NonFinite as exc:
        return states, records, exc
    return states, records, None


@dataclass
class SweepReport:
    """Difference norms per parameter value and sample time.

    ``table[i, j, k]`` holds (rho, sigma, u) H^s differences for value i,
    time j and s = s_list[k]. ``slopes[k, j]`` is the log-log slope of the
    summed difference against the parameter for s = fit_s[k].
    """

    parameter: str
    values: list
    sample_times: list
    s_list: tuple
    table: np.ndarray
    fit_s: tuple = ()
    slopes: np.ndarray = None
    slope_rms: np.ndarray = None
    sup_norms: dict = field(default_factory=dict)
    energy_series: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    partial: bool = False

    def total(self, value_index, time_index, s):
        return float(self.table[value_index, time_index, self.s_list.index(s)].sum())

    def totals(self, s, time_index=-1):
        k = self.s_list.index(s)
        return self.table[:, time_index, k, :].sum(axis=-1)

    def to_dict(self):
        out = {
            "parameter": self.parameter,
            "values": list(map(float, self.values)),
            "sample_times": list(map(float, self.sample_times)),
            "s_list": list(self.s_list),
            "columns": ["rho", "sigma", "u"],
            "table": self.table.tolist(),
            "fit_s": list(self.fit_s),
            "slopes": None if self.slopes is None else self.slopes.tolist(),
            "slope_rms": None if self.slope_rms is None else self.slope_rms.tolist(),
            "sup_norms": {repr(float(k)): v for k, v in self.sup_norms.items()},
            "notes": list(self.notes),
            "partial": self.partial,
        }
        return out


def _fit_slopes(values, table, s_list, fit_s):
    x = np.asarray(values, dtype=float)
    slopes = np.full((len(fit_s), table.shape[1]), np.nan)
    rms = np.full_like(slopes, np.nan)
    for a, s in enumerate(fit_s):
        k = s_list.index(s)
        for j in range(table.shape[1]):
            y = table[:, j, k, :].sum(axis=-1)
            ok = (x > 0) & (y > 0) & np.isfinite(y)
            if np.count_nonzero(ok) < 2:
                continue
            coef = np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)
            slopes[a, j] = coef[0]
            rms[a, j] = float(np.sqrt(np.mean((np.polyval(coef, np.log(x[ok])) - np.log(y[ok])) ** 2)))
    return slopes, rms


def _sweep(parameter, state0, values, member_inputs, reference_input, sample_times, dt,
           s_list, fit_s, record_interval):
    times = sorted(float(t) for t in sample_times)
    tasks = [(s, p, dt, times, record_interval) for s, p in [reference_input] + member_inputs]
    results = _parallel_map(_run_member, tasks)
    ref_states, ref_records, ref_err = results[0]
    table = np.full((len(values), len(times), len(s_list), 3), np.nan)
    report = SweepReport(parameter, list(values), times, tuple(s_list), table, tuple(fit_s))
    failure = ref_err
    for i, (states, records, err) in enumerate(results[1:]):
        for j, st in enumerate(states[: len(ref_states)]):
            d = difference_norms(st, ref_states[j], s_list)
            table[i, j] = [d[s] for s in s_list]
        if records:
            report.sup_norms[values[i]] = {
                name: float(max(getattr(r, name) for r in records))
                for name in ("energy_l2", "lp_rho_2", "lp_rho_inf", "lp_sigma_fluct_2",
                             "lp_sigma_fluct_inf", "grad_phi_sup", "lr_omega_2", "hs_rho_1",
                             "hs_sigma_1", "hs_u_1")
            }
            report.energy_series[values[i]] = (
                np.array([r.time for r in records]),
                np.array([r.energy_l2 for r in records]),
            )
        if err is not None and failure is None:
            failure = err
    report.slopes, report.slope_rms = _fit_slopes(values, table, report.s_list, report.fit_s)
    if failure is not None:
        report.partial = True
        report.notes.append(f"aborted: {failure}")
        exc = NonFinite(f"{parameter} sweep aborted: {failure}", time=getattr(failure, "time", None))
        exc.partial_report = report
        raise exc
    return report


def inviscid_sweep(state0, base_params, nu_list, sample_times, dt, mode="matched",
                   s_list=(1, 2, 3), fit_s=(1, 2)):
    """NPNS runs at each viscosity against the NPE run from the same data.

    In ``regularized`` mode each NPNS member starts from the data regularized
    at kappa = nu**(1/3).
    """
    if mode not in ("matched", "regularized"):
        raise ValueError(f"unknown sweep mode {mode!r}")
    if any(nu < 0 for nu in nu_list):
        raise ValueError("viscosities must be >= 0")
    npe = base_params.with_(nu=0.0, ell=0.0, variant=Variant.NPE)
    members = []
    for nu in nu_list:
        start = state0
        if mode == "regularized" and nu > 0:
            start = regularize_initial_data(state0, nu ** (1.0 / 3.0))
        members.append((start, npe.with_(nu=float(nu), variant=Variant.NPNS)))
    report = _sweep("nu", state0, list(nu_list), members, (state0, npe), sample_times, dt,
                    s_list, fit_s, record_interval=None)
    report.notes.append(f"mode={mode}")
    return report


def mollification_sweep(state0, base_params, ell_list, sample_times, dt, record_interval=None,
                        s_list=(0, 1, 2), fit_s=(0, 1)):
    """Regularized-advection runs at each ell against the ell = 0 (NPE) run."""
    if any(ell < 0 for ell in ell_list):
        raise ValueError("mollification scales must be >= 0")
    npe = base_params.with_(nu=0.0, ell=0.0, variant=Variant.NPE)
    members = []
    for ell in ell_list:
        params = npe if ell == 0 else npe.with_(ell=float(ell), variant=Variant.REGULARIZED)
        members.append((state0, params))
    if record_interval is None:
        record_interval = dt * max(1, round(0.01 / dt))
    return _sweep("ell", state0, list(ell_list), members, (state0, npe), sample_times, dt,
                  s_list, fit_s, record_interval)


@dataclass
class PicardConfig:
    initial: SimState
    n_iters: int = 10
    dt: float | None = None
    T0: float | None = None

    def __post_init__(self):
        if self.n_iters < 2:
            raise ValueError(f"n_iters must be >= 2, got {self.n_iters!r}")
        if self.T0 is not None and not self.T0 > 0:
            raise ValueError(f"T0 must be > 0, got {self.T0!r}")

    @property
    def m_r(self):
        """|u0|_{H^1} + |rho0|_{H^1} + |sigma0|_{H^1}."""
        s = self.initial
        return (vector_sobolev_norm(velocity_from_vorticity(s.omega), 1)
                + sobolev_norm(s.rho, 1) + sobolev_norm(s.sigma, 1))

    def resolved_T0(self):
        if self.T0 is not None:
            return self.T0
        m = self.m_r
        return 0.1 if m == 0 else min(0.1, 0.05 / m**2)


@dataclass
class PicardReport:
    T0: float
    dt: float
    n_steps: int
    m_r: float
    t0_heuristic: bool
    times: np.ndarray
    deltas: list
    upsilons: list
    ratios: list
    residual: float
    direct_distance: float | None
    trajectories: list
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {
            "T0": self.T0, "dt": self.dt, "n_steps": self.n_steps, "m_r": self.m_r,
            "t0_heuristic": self.t0_heuristic,
            "deltas": self.deltas, "upsilons": self.upsilons,
            "ratios": [None if not math.isfinite(q) else q for q in self.ratios],
            "residual": self.residual, "direct_distance": self.direct_distance,
            "notes": self.notes,
        }


def _l2(coeffs, grid):
    return math.sqrt(AREA * float(np.sum(grid.wavenumbers.weights * np.abs(coeffs) ** 2)))


def _velocity_l2(omega_coeffs, grid):
    # |u|_{L^2}^2 = sum |omega_k|^2 / |k|^2 (Nyquist modes carry no velocity)
    wn = grid.wavenumbers
    kk = wn.k1_odd**2 + wn.k2_odd**2
    w = np.where(kk > 0, wn.weights / np.where(kk > 0, kk, 1.0), 0.0)
    return math.sqrt(AREA * float(np.sum(w * np.abs(omega_coeffs) ** 2)))


def picard_solve(cfg, params, keep_trajectories=True, compare_direct=True):
    """Frozen-coefficient iteration on [0, T0].

    Iterate n+1 solves the linear system whose potential and advecting
    velocity come from iterate n. Every iterate uses the same IF-RK4 step, and
    the coefficients for each RK stage are the matching stage states of the
    previous iterate, so the fixed point is exactly the direct nonlinear
    solution on the same step grid.
    """
    state0 = cfg.initial
    grid = state0.grid
    n = grid.n
    T0 = cfg.resolved_T0()
    dt = cfg.dt if cfg.dt is not None else T0 / 50.0
    n_steps = max(1, math.ceil(T0 / dt - 1e-9))
    h = T0 / n_steps
    lin = linear_rates(grid, params)
    y0 = state0.stacked()
    times = state0.time + h * np.arange(n_steps + 1)

    prev_stages = np.broadcast_to(y0, (n_steps, 4) + y0.shape)
    prev_traj = np.broadcast_to(y0, (n_steps + 1,) + y0.shape)
    trajectories = [np.array(prev_traj)] if keep_trajectories else []
    deltas, upsilons = [], []
    for it in range(cfg.n_iters):
        stages = np.empty((n_steps, 4) + y0.shape, dtype=complex)
        traj = np.empty((n_steps + 1,) + y0.shape, dtype=complex)
        traj[0] = y0
        y = y0
        for m in range(n_steps):
            coef = prev_stages[m]
            try:
                y, st = lawson_rk4(y, h, lin, lambda i, ys: nonlinear_rhs(ys, n, params, coef=coef[i]))
            except NonFinite as exc:
                raise NonFinite(f"Picard iterate {it + 1}: {exc}", time=float(times[m])) from exc
            if not np.all(np.isfinite(y)):
                raise NonFinite(f"Picard iterate {it + 1}: non-finite state", time=float(times[m]))
            y = reproject_means(y)
            stages[m] = st
            traj[m + 1] = y
        diff = traj - prev_traj
        deltas.append(max(math.hypot(_l2(d[0], grid), _l2(d[1], grid)) for d in diff))
        upsilons.append(max(_velocity_l2(d[2], grid) for d in diff))
        log.debug("picard iterate %d: delta=%.3e upsilon=%.3e", it + 1, deltas[-1], upsilons[-1])
        if keep_trajectories:
            trajectories.append(traj)
        final_prev, prev_stages, prev_traj = prev_traj, stages, traj

    scale = max(math.hypot(_l2(y[0], grid), _l2(y[1], grid)) + _velocity_l2(y[2], grid)
                for y in prev_traj)
    floor = 1e-12 * max(scale, 1.0)
    ratios = []
    for k in range(len(deltas) - 1):
        den = deltas[k] + upsilons[k]
        num = deltas[k + 1] + upsilons[k + 1]
        ratios.append(num / den if den > floor else math.nan)

    residual = 0.0
    for y, c in zip(prev_traj, final_prev):
        r = nonlinear_rhs(y, n, params, coef=c) - nonlinear_rhs(y, n, params)
        residual = max(residual, math.sqrt(sum(_l2(comp, grid) ** 2 for comp in r)))

    direct_distance = None
    if compare_direct:
        traj_direct = [y0]
        y = y0
        for m in range(n_steps):
            y, _ = lawson_rk4(y, h, lin, lambda i, ys: nonlinear_rhs(ys, n, params))
            y = reproject_means(y)
            traj_direct.append(y)
        direct_distance = max(
            math.sqrt(sum(_l2(comp, grid) ** 2 for comp in (a - b)))
            for a, b in zip(prev_traj, traj_direct)
        )

    report = PicardReport(
        T0=T0, dt=h, n_steps=n_steps, m_r=cfg.m_r, t0_heuristic=cfg.T0 is None,
        times=times, deltas=deltas, upsilons=upsilons, ratios=ratios, residual=residual,
        direct_distance=direct_distance, trajectories=trajectories,
    )
    if report.t0_heuristic:
        report.notes.append("T0 from heuristic min(0.1, 0.05 / M_r^2); smallness constants are not computable")
    finite = [q for q in ratios if math.isfinite(q)]
    if len(finite) >= 3 and all(q >= 1 for q in finite[-3:]):
        exc = NoContraction(f"contraction ratios {finite[-3:]} >= 1; reduce T0")
        exc.report = report
        raise exc
    return report


def trajectory_state(report, iterate, step, grid):
    y = report.trajectories[iterate][step]
    return SimState.from_stacked(grid, y, report.times[step])
