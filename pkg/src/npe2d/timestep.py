"""Integrating-factor (Lawson) RK4 time stepping.

Diffusion D*Lap on rho and sigma (and nu*Lap on omega for NPNS) is
integrated exactly through exp(L h) factors; everything else goes through
classical RK4 in the transformed variable.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonFinite
from .model import SimState, linear_rates, nonlinear_rhs, _potential_and_velocity
from .spectral import Grid, inverse_array

U_FLOOR = 1e-8


@dataclass(frozen=True)
class StepperConfig:
    dt: float = 1e-3
    t_end: float = 0.0
    cfl_safety: float = 0.5
    dt_max: float | None = None
    adaptive: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt!r}")
        if not self.t_end >= 0:
            raise ValueError(f"t_end must be >= 0, got {self.t_end!r}")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError(f"cfl_safety must lie in (0, 1], got {self.cfl_safety!r}")
        if self.dt_max is None:
            object.__setattr__(self, "dt_max", self.dt)
        if self.dt > self.dt_max:
            raise ValueError(f"dt={self.dt} exceeds dt_max={self.dt_max}")


def lawson_rk4(y, h, lin, rhs):
    """One IF-RK4 step of y' = lin*y + N(y).

    ``rhs(stage, y_stage)`` returns N at stage 0..3. Returns the new state and
    the four stage states (the arguments N was evaluated at).
    """
    e_half = np.exp(0.5 * h * lin)
    e_full = np.exp(h * lin)
    y1 = y
    k1 = rhs(0, y1)
    y2 = e_half * (y + 0.5 * h * k1)
    k2 = rhs(1, y2)
    y3 = e_half * y + 0.5 * h * k2
    k3 = rhs(2, y3)
    y4 = e_full * y + h * (e_half * k3)
    k4 = rhs(3, y4)
    y_new = e_full * y + (h / 6.0) * (e_full * k1 + 2.0 * e_half * (k2 + k3) + k4)
    return y_new, (y1, y2, y3, y4)


def reproject_means(y):
    """Pin mean(rho) and mean(omega) to exactly zero, in place."""
    y[0, 0, 0] = 0.0
    y[2, 0, 0] = 0.0
    return y


def advance(y, n, params, h, lin=None):
    if lin is None:
        lin = linear_rates(Grid(n), params)
    y_new, _ = lawson_rk4(y, h, lin, lambda _, ys: nonlinear_rhs(ys, n, params))
    if not np.all(np.isfinite(y_new)):
        raise NonFinite("non-finite state after step")
    return reproject_means(y_new)


def step(state, params, dt):
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    grid = state.grid
    y = advance(state.stacked(), grid.n, params, dt)
    return SimState.from_stacked(grid, y, state.time + dt)


def max_speed(state, params):
    """Grid maximum of |u_adv|, the velocity that actually advects."""
    n = state.grid.n
    _, u1, u2 = _potential_and_velocity(state.stacked(), n, params)
    u = inverse_array(np.stack([u1, u2]), n)
    return float(np.sqrt(np.max(u[0] ** 2 + u[1] ** 2)))


def stable_dt(state, params, grid, cfg):
    speed = max(max_speed(state, params), U_FLOOR)
    return min(cfg.dt_max, cfg.cfl_safety * grid.h / speed)


def event_times(t0, t_end, interval):
    """Output times t0, t0+interval, ..., t_end (last one possibly closer)."""
    span = t_end - t0
    if span <= 0:
        return [t0]
    count = math.ceil(span / interval - 1e-9)
    return [t0 + j * interval for j in range(count)] + [t_end]


def _fixed_segment(y, n, params, lin, ta, tb, dt, per_step):
    span = tb - ta
    m = max(1, math.ceil(span / dt - 1e-9))
    for i in range(m):
        t = ta + i * dt
        h = dt if i < m - 1 else span - (m - 1) * dt
        if abs(h - dt) <= 1e-9 * dt:
            h = dt
        try:
            y = advance(y, n, params, h, lin)
        except NonFinite as exc:
            raise NonFinite(str(exc), time=t) from exc
        if per_step is not None and i < m - 1:
            per_step(y, ta + (i + 1) * dt)
    return y


def _adaptive_segment(y, grid, params, lin, ta, tb, cfg, per_step):
    t = ta
    while t < tb:
        state = SimState.from_stacked(grid, y, t)
        h = min(stable_dt(state, params, grid, cfg), tb - t)
        last = tb - (t + h) <= 1e-9 * h
        if last:
            h = tb - t
        try:
            y = advance(y, grid.n, params, h, lin)
        except NonFinite as exc:
            raise NonFinite(str(exc), time=t) from exc
        t = tb if last else t + h
        if per_step is not None and not last:
            per_step(y, t)
    return y


def integrate(state, params, cfg, sinks=(), output_interval=None):
    """Advance ``state`` to ``cfg.t_end``.

    Each sink is called with the current SimState at the start time, at every
    output time t0 + j*output_interval and at t_end. Without an interval the
    sinks see every step. The final time equals t_end exactly.
    """
    t0 = state.time
    if cfg.t_end < t0 - 1e-12 * max(1.0, abs(t0)):
        raise ValueError(f"t_end={cfg.t_end} precedes state time {t0}")
    grid = state.grid
    n = grid.n
    lin = linear_rates(grid, params)

    def emit(y, t):
        s = SimState.from_stacked(grid, y, t)
        for sink in sinks:
            sink(s)

    per_step = emit if (output_interval is None and sinks) else None
    for sink in sinks:
        sink(state)
    if cfg.t_end <= t0:
        return state
    if output_interval is None:
        times = [t0, cfg.t_end]
    else:
        if not output_interval > 0:
            raise ValueError(f"output_interval must be > 0, got {output_interval!r}")
        times = event_times(t0, cfg.t_end, output_interval)
    y = state.stacked()
    for ta, tb in zip(times[:-1], times[1:]):
        if cfg.adaptive:
            y = _adaptive_segment(y, grid, params, lin, ta, tb, cfg, per_step)
        else:
            y = _fixed_segment(y, n, params, lin, ta, tb, cfg.dt, per_step)
        if sinks:
            emit(y, tb)
    return SimState.from_stacked(grid, y, cfg.t_end)
