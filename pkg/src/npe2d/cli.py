"""Command-line entry point.

    npe2d run <config> [--strict-invariants] [--resume <snapshot>] [--override key=value ...]
    npe2d sweep <config> [--override key=value ...]
    npe2d picard <config> [--override key=value ...]
    npe2d inspect <snapshot>

Exit codes: 0 ok, 2 configuration error, 3 numerical failure, 4 I/O error.
"""

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import replace

import numpy as np

from . import config as config_mod
from .diagnostics import diagnose, invariant_report
from .errors import (NoContraction, NonFinite, NonZeroMean, NPEError, ParseError, SnapshotError,
                     ValidationError)
from .experiments import PicardConfig, inviscid_sweep, mollification_sweep, picard_solve
from .model import Variant
from .persistence import append_series_row, read_snapshot, write_snapshot
from .presets import make_initial
from .spectral import Grid
from .timestep import event_times, integrate

log = logging.getLogger("npe2d")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


class InvariantViolation(NPEError, ArithmeticError):
    """A monitored invariant failed while --strict-invariants was set."""


def initial_state(cfg):
    """Initial SimState from the configured snapshot or preset."""
    if cfg.initial.snapshot is not None:
        state, _ = read_snapshot(cfg.initial.snapshot)
        if state.grid.n != cfg.n:
            raise ValidationError(
                f"initial.snapshot has n={state.grid.n} but grid.n={cfg.n}")
        return state
    options = dict(cfg.initial.options)
    if cfg.initial.preset == "random-smooth":
        options["seed"] = cfg.initial.seed
    try:
        return make_initial(Grid(cfg.n), cfg.initial.preset, **options)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"initial: {exc}") from None


def _merge_times(*lists):
    merged = []
    for t in sorted(t for lst in lists for t in lst):
        if merged and abs(t - merged[-1]) <= 1e-9 * max(1.0, abs(t)):
            continue
        merged.append(t)
    return merged


def _contains(times, t):
    return any(abs(t - s) <= 1e-9 * max(1.0, abs(t)) for s in times)


def _check_invariants(state, sigma_mean0):
    failed = [c for c in invariant_report(state, sigma_mean0) if not c.passed]
    if failed:
        desc = ", ".join(f"{c.name} (residual {c.residual:.3e})" for c in failed)
        raise InvariantViolation(f"invariant check failed at t = {state.time!r}: {desc}")


def run_simulation(cfg, strict_invariants=False, resume=None):
    """Integrate to time.t_end, writing the series and snapshots.

    With ``resume`` the run restarts from that snapshot and appends to the
    existing series file, skipping the row for the restart time that is
    already there. Returns the final SimState.
    """
    if resume is not None:
        state, saved = read_snapshot(resume)
        if state.grid.n != cfg.n:
            raise ValidationError(f"resume snapshot has n={state.grid.n} but grid.n={cfg.n}")
        if saved != cfg.params:
            log.warning("resume snapshot params %s differ from config %s; using config", saved, cfg.params)
    else:
        state = initial_state(cfg)
    params, out = cfg.params, cfg.output
    t0, t_end = state.time, cfg.stepper.t_end
    if t_end < t0:
        raise ValidationError(f"time.t_end={t_end} precedes the start time {t0}")

    series_times = event_times(t0, t_end, out.series_interval)
    snapshot_times = []
    if out.snapshot_path is not None:
        if out.snapshot_interval is not None:
            snapshot_times = event_times(t0, t_end, out.snapshot_interval)[1:]
        else:
            snapshot_times = [t_end]
    times = _merge_times(series_times, snapshot_times, [t0])

    sigma_mean0 = state.sigma.mean
    fresh = resume is None or not os.path.exists(out.series_path) or os.path.getsize(out.series_path) == 0
    if resume is None:
        open(out.series_path, "w").close()
    snapshot_index = 0

    def record(s):
        nonlocal snapshot_index
        if strict_invariants:
            _check_invariants(s, sigma_mean0)
        if _contains(series_times, s.time) and (fresh or s.time != t0):
            append_series_row(diagnose(s, params), out.series_path)
        if _contains(snapshot_times, s.time):
            path = out.snapshot_path.format(index=snapshot_index, time=s.time)
            write_snapshot(s, params, path)
            snapshot_index += 1

    record(state)
    for tb in times[1:]:
        state = integrate(state, params, replace(cfg.stepper, t_end=tb))
        record(state)
    return state


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _write_report(data, path):
    with open(path, "w") as fh:
        json.dump(_jsonable(data), fh, indent=2)
        fh.write("\n")


def run_sweep(cfg):
    exp = cfg.experiment
    if exp.kind not in ("inviscid_sweep", "mollification_sweep"):
        raise ValidationError(f"sweep needs experiment.kind inviscid_sweep or mollification_sweep, got {exp.kind!r}")
    state0 = initial_state(cfg)
    times = exp.sample_times or (cfg.stepper.t_end,)
    dt = exp.dt or cfg.stepper.dt
    try:
        if exp.kind == "inviscid_sweep":
            report = inviscid_sweep(state0, cfg.params, exp.nu_list, times, dt, mode=exp.mode)
        else:
            report = mollification_sweep(state0, cfg.params, exp.ell_list, times, dt,
                                         record_interval=cfg.output.series_interval)
    except NonFinite as exc:
        partial = getattr(exc, "partial_report", None)
        if partial is not None:
            _write_report(partial.to_dict(), cfg.output.report_path)
        raise
    _write_report(report.to_dict(), cfg.output.report_path)
    for k, s in enumerate(report.fit_s):
        log.info("%s sweep: H^%d slope %.4f", report.parameter, s, report.slopes[k, -1])
    return report


def run_picard(cfg):
    if cfg.params.variant is not Variant.REGULARIZED:
        raise ValidationError("picard needs the REGULARIZED variant (params.ell > 0)")
    exp = cfg.experiment
    try:
        pc = PicardConfig(initial_state(cfg), n_iters=exp.n_iters, dt=exp.dt, T0=exp.T0)
    except ValueError as exc:
        raise ValidationError(f"experiment: {exc}") from None
    try:
        report = picard_solve(pc, cfg.params, keep_trajectories=False)
    except NoContraction as exc:
        partial = getattr(exc, "report", None)
        if partial is not None:
            _write_report(partial.to_dict(), cfg.output.report_path)
        raise
    _write_report(report.to_dict(), cfg.output.report_path)
    log.info("picard: T0=%.4g, final delta %.3e, distance to direct solve %s",
             report.T0, report.deltas[-1], report.direct_distance)
    return report


def inspect_snapshot(path, stream=None):
    stream = stream or sys.stdout
    state, params = read_snapshot(path)
    print(f"file:     {path}", file=stream)
    print(f"n:        {state.grid.n}", file=stream)
    print(f"time:     {state.time!r}", file=stream)
    print(f"variant:  {params.variant.value}", file=stream)
    for name in ("D", "eps", "kbtk", "nu", "ell"):
        print(f"{name + ':':<9} {getattr(params, name)!r}", file=stream)
    rec = diagnose(state, params)
    for name, value in zip(rec.columns()[1:], rec.values()[1:]):
        print(f"{name + ':':<21} {value:.12e}", file=stream)


def build_parser():
    parser = argparse.ArgumentParser(prog="npe2d", description="2D Nernst-Planck-Euler spectral solver")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("config", help="YAML run configuration")
        p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key, e.g. grid.n=64 (repeatable)")
        return p

    run = with_config(sub.add_parser("run", help="integrate and write series/snapshots"))
    run.add_argument("--strict-invariants", action="store_true",
                     help="fail with exit 3 when a monitored invariant is violated")
    run.add_argument("--resume", metavar="SNAPSHOT", help="continue from a snapshot")
    with_config(sub.add_parser("sweep", help="inviscid-limit or mollification sweep"))
    with_config(sub.add_parser("picard", help="frozen-coefficient Picard iteration"))
    insp = sub.add_parser("inspect", help="print a snapshot header and its norms")
    insp.add_argument("snapshot")
    return parser


def _dispatch(args):
    if args.command == "inspect":
        inspect_snapshot(args.snapshot)
        return
    cfg = config_mod.load_config(args.config, args.override)
    if args.command == "run":
        kind = cfg.experiment.kind
        if kind in ("inviscid_sweep", "mollification_sweep"):
            run_sweep(cfg)
        elif kind == "picard":
            run_picard(cfg)
        else:
            run_simulation(cfg, strict_invariants=args.strict_invariants, resume=args.resume)
    elif args.command == "sweep":
        run_sweep(cfg)
    else:
        run_picard(cfg)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _dispatch(args)
    except (ParseError, ValidationError) as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except (NonFinite, NonZeroMean, NoContraction, InvariantViolation) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    except (SnapshotError, OSError) as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
