"""Run configuration: a YAML document parsed strictly into a RunConfig.

Keys may be nested mappings or dotted names; both ``grid: {n: 64}`` and
``grid.n: 64`` address the same setting. Unknown keys are rejected.

Defaults:

    grid.n                  128
    params.D / eps / kbtk   1.0
    params.nu / ell         0.0
    params.variant          inferred from nu and ell
    time.t_end              1.0
    time.dt                 1e-3
    time.cfl_safety         0.5
    time.dt_max             dt
    time.adaptive           false
    initial.preset          random-smooth
    initial.snapshot        none (takes precedence over the preset)
    initial.seed            0 (used by random-smooth)
    initial.options         {} (extra keyword arguments for the preset)
    output.series_path      series.csv
    output.series_interval  0.01
    output.snapshot_path    none; may contain {index} and {time} fields
    output.snapshot_interval none (only a final snapshot)
    output.report_path      report.json
    experiment.kind         none | inviscid_sweep | mollification_sweep | picard
    experiment.nu_list      [1e-2, 3e-3, 1e-3, 3e-4]
    experiment.mode         matched | regularized
    experiment.ell_list     [0.2, 0.1, 0.05]
    experiment.sample_times [t_end]
    experiment.T0           none (heuristic)
    experiment.n_iters      10
    experiment.dt           none (T0 / 50 for picard)
"""

import inspect
from dataclasses import asdict, dataclass, field

import yaml

from .errors import ParseError, ValidationError
from .model import PhysParams, Variant
from .presets import PRESETS
from .timestep import StepperConfig

EXPERIMENT_KINDS = ("none", "inviscid_sweep", "mollification_sweep", "picard")

DEFAULTS = {
    "grid.n": 128,
    "params.D": 1.0,
    "params.eps": 1.0,
    "params.kbtk": 1.0,
    "params.nu": 0.0,
    "params.ell": 0.0,
    "params.variant": None,
    "time.t_end": 1.0,
    "time.dt": 1e-3,
    "time.cfl_safety": 0.5,
    "time.dt_max": None,
    "time.adaptive": False,
    "initial.preset": "random-smooth",
    "initial.snapshot": None,
    "initial.seed": 0,
    "initial.options": {},
    "output.series_path": "series.csv",
    "output.series_interval": 0.01,
    "output.snapshot_path": None,
    "output.snapshot_interval": None,
    "output.report_path": "report.json",
    "experiment.kind": "none",
    "experiment.nu_list": [1e-2, 3e-3, 1e-3, 3e-4],
    "experiment.mode": "matched",
    "experiment.ell_list": [0.2, 0.1, 0.05],
    "experiment.sample_times": None,
    "experiment.T0": None,
    "experiment.n_iters": 10,
    "experiment.dt": None,
}

@dataclass(frozen=True)
class InitialSpec:
    preset: str = "random-smooth"
    snapshot: str | None = None
    seed: int = 0
    options: dict = field(default_factory=dict)


@dataclass(frozen=True)
class OutputSpec:
    series_path: str = "series.csv"
    series_interval: float = 0.01
    snapshot_path: str | None = None
    snapshot_interval: float | None = None
    report_path: str = "report.json"


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str = "none"
    nu_list: tuple = (1e-2, 3e-3, 1e-3, 3e-4)
    mode: str = "matched"
    ell_list: tuple = (0.2, 0.1, 0.05)
    sample_times: tuple | None = None
    T0: float | None = None
    n_iters: int = 10
    dt: float | None = None


@dataclass(frozen=True)
class RunConfig:
    n: int
    params: PhysParams
    stepper: StepperConfig
    initial: InitialSpec
    output: OutputSpec
    experiment: ExperimentSpec


def _flatten(node, prefix, out, lines):
    """Walk a composed YAML mapping node, collecting dotted keys and lines."""
    if not isinstance(node, yaml.MappingNode):
        raise ParseError(f"expected a mapping at {prefix or 'top level'}",
                         key=prefix or None, line=node.start_mark.line + 1)
    for key_node, value_node in node.value:
        if not isinstance(key_node, yaml.ScalarNode):
            raise ParseError("mapping keys must be scalars", line=key_node.start_mark.line + 1)
        key = f"{prefix}.{key_node.value}" if prefix else key_node.value
        line = key_node.start_mark.line + 1
        if key in out:
            raise ParseError(f"duplicate key {key!r}", key=key, line=line)
        if key in DEFAULTS:
            out[key] = yaml.safe_load(yaml.serialize(value_node))
            lines[key] = line
        elif isinstance(value_node, yaml.MappingNode) and any(k.startswith(key + ".") for k in DEFAULTS):
            _flatten(value_node, key, out, lines)
        else:
            raise ParseError(f"unknown key {key!r}", key=key, line=line)


def _parse_document(text):
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ParseError(f"malformed document: {exc}", line=mark.line + 1 if mark else None) from None
    values, lines = {}, {}
    if root is not None:
        _flatten(root, "", values, lines)
    return values, lines


def _parse_override(item):
    key, sep, raw = item.partition("=")
    key = key.strip()
    if not sep or not key:
        raise ParseError(f"override must look like key=value, got {item!r}")
    if key not in DEFAULTS:
        raise ParseError(f"unknown key {key!r} in override", key=key)
    try:
        return key, yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ParseError(f"bad override value for {key!r}: {exc}", key=key) from None


def _number(value):
    """Float from a YAML scalar. PyYAML reads ``1e-3`` (no dot) as a string."""
    if isinstance(value, bool):
        raise TypeError
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        return float(value)
    raise TypeError


def _typed(values, lines, key, kind, optional=False):
    value = values[key]
    if value is None and optional:
        return None
    line = lines.get(key)
    if kind is bool:
        if isinstance(value, bool):
            return value
    elif kind is int:
        if isinstance(value, int) and not isinstance(value, bool):
            return value
    elif kind is float:
        try:
            return _number(value)
        except (TypeError, ValueError):
            pass
    elif kind is str:
        if isinstance(value, str):
            return value
    elif kind is list:
        if isinstance(value, (list, tuple)):
            try:
                return tuple(_number(v) for v in value)
            except (TypeError, ValueError):
                pass
    elif kind is dict:
        if isinstance(value, dict):
            return dict(value)
    raise ParseError(f"{key} must be {kind.__name__}, got {value!r}", key=key, line=line)


def _check_positive(name, value, optional=False):
    if value is None and optional:
        return
    if not value > 0:
        raise ValidationError(f"{name} must be > 0, got {value!r}")


def _build(values, lines):
    n = _typed(values, lines, "grid.n", int)
    if n < 8 or n % 2:
        raise ValidationError(f"grid.n must be an even integer >= 8, got {n}")

    variant = _typed(values, lines, "params.variant", str, optional=True)
    phys = {k: _typed(values, lines, f"params.{k}", float) for k in ("D", "eps", "kbtk", "nu", "ell")}
    try:
        params = PhysParams(**phys, variant=Variant(variant.upper())) if variant else PhysParams.infer(**phys)
    except ValueError as exc:
        raise ValidationError(f"params: {exc}") from None

    t_end = _typed(values, lines, "time.t_end", float)
    try:
        stepper = StepperConfig(
            dt=_typed(values, lines, "time.dt", float),
            t_end=t_end,
            cfl_safety=_typed(values, lines, "time.cfl_safety", float),
            dt_max=_typed(values, lines, "time.dt_max", float, optional=True),
            adaptive=_typed(values, lines, "time.adaptive", bool),
        )
    except ValueError as exc:
        raise ValidationError(f"time: {exc}") from None

    preset = _typed(values, lines, "initial.preset", str)
    if preset not in PRESETS:
        raise ValidationError(f"initial.preset must be one of {sorted(PRESETS)}, got {preset!r}")
    options = _typed(values, lines, "initial.options", dict)
    accepted = set(inspect.signature(PRESETS[preset]).parameters) - {"grid"}
    for name in options:
        if name not in accepted or name == "seed":
            key = f"initial.options.{name}"
            raise ParseError(f"unknown key {key!r} for preset {preset!r}", key=key,
                             line=lines.get("initial.options"))
    initial = InitialSpec(
        preset=preset,
        snapshot=_typed(values, lines, "initial.snapshot", str, optional=True),
        seed=_typed(values, lines, "initial.seed", int),
        options=options,
    )

    output = OutputSpec(
        series_path=_typed(values, lines, "output.series_path", str),
        series_interval=_typed(values, lines, "output.series_interval", float),
        snapshot_path=_typed(values, lines, "output.snapshot_path", str, optional=True),
        snapshot_interval=_typed(values, lines, "output.snapshot_interval", float, optional=True),
        report_path=_typed(values, lines, "output.report_path", str),
    )
    _check_positive("output.series_interval", output.series_interval)
    _check_positive("output.snapshot_interval", output.snapshot_interval, optional=True)

    kind = _typed(values, lines, "experiment.kind", str)
    if kind not in EXPERIMENT_KINDS:
        raise ValidationError(f"experiment.kind must be one of {EXPERIMENT_KINDS}, got {kind!r}")
    mode = _typed(values, lines, "experiment.mode", str)
    if mode not in ("matched", "regularized"):
        raise ValidationError(f"experiment.mode must be matched or regularized, got {mode!r}")
    experiment = ExperimentSpec(
        kind=kind,
        nu_list=_typed(values, lines, "experiment.nu_list", list),
        mode=mode,
        ell_list=_typed(values, lines, "experiment.ell_list", list),
        sample_times=_typed(values, lines, "experiment.sample_times", list, optional=True),
        T0=_typed(values, lines, "experiment.T0", float, optional=True),
        n_iters=_typed(values, lines, "experiment.n_iters", int),
        dt=_typed(values, lines, "experiment.dt", float, optional=True),
    )
    for v in experiment.nu_list:
        _check_positive("experiment.nu_list entries", v)
    for v in experiment.ell_list:
        if v < 0:
            raise ValidationError(f"experiment.ell_list entries must be >= 0, got {v!r}")
    for v in experiment.sample_times or ():
        _check_positive("experiment.sample_times entries", v)
    _check_positive("experiment.T0", experiment.T0, optional=True)
    _check_positive("experiment.dt", experiment.dt, optional=True)
    if experiment.n_iters < 2:
        raise ValidationError(f"experiment.n_iters must be >= 2, got {experiment.n_iters}")
    if kind == "picard" and params.variant is not Variant.REGULARIZED:
        raise ValidationError("picard experiments need the REGULARIZED variant (params.ell > 0)")

    return RunConfig(n=n, params=params, stepper=stepper, initial=initial, output=output,
                     experiment=experiment)


def parse_config(text, overrides=()):
    """Parse a YAML document (plus ``key=value`` overrides) into a RunConfig."""
    values, lines = _parse_document(text)
    for item in overrides:
        key, value = _parse_override(item)
        values[key] = value
        lines.pop(key, None)
    merged = dict(DEFAULTS)
    merged.update(values)
    return _build(merged, lines)


def load_config(path, overrides=()):
    with open(path) as fh:
        return parse_config(fh.read(), overrides)


def to_dict(cfg):
    """Nested plain-data form of ``cfg``; parse_config(serialize(cfg)) == cfg."""
    p, s = cfg.params, cfg.stepper
    e = asdict(cfg.experiment)
    for key in ("nu_list", "ell_list", "sample_times"):
        if e[key] is not None:
            e[key] = list(e[key])
    return {
        "grid": {"n": cfg.n},
        "params": {"D": p.D, "eps": p.eps, "kbtk": p.kbtk, "nu": p.nu, "ell": p.ell,
                   "variant": p.variant.value},
        "time": {"t_end": s.t_end, "dt": s.dt, "cfl_safety": s.cfl_safety, "dt_max": s.dt_max,
                 "adaptive": s.adaptive},
        "initial": asdict(cfg.initial),
        "output": asdict(cfg.output),
        "experiment": e,
    }


def serialize(cfg):
    return yaml.safe_dump(to_dict(cfg), sort_keys=False)
