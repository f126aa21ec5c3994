"""Scenario configuration: strict JSON with dotted overrides."""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass

from .errors import ConfigError, ValidationError
from .fields import Grid1D
from .mixtures import (MixtureSpec, NumericSettings, PureCoherent, PureEigenstate, ThermalCoherent,
                       ThermalEigenstates, TwoLevelWell, allocate, thermal_weights)
from .oscillator import OscillatorParams, check_coverage
from .propagator import PropagationPlan
from .well import TwoLevelWellState

DEFAULTS = {
    "oscillator": {"m": 1.0, "omega": 1.0, "A": 1.0, "hbar": 1.0, "tau": math.pi},
    "grid": {"x_min": -12.0, "x_max": 12.0, "n_points": 2048},
    "propagation": {"n_steps": 4096, "snapshot_stride": 4},
    "trajectories": {"n_samples": 10000, "ode_dt": None, "seed": 0, "record_stride": 64,
                     "failure_budget": 0, "stratum_floor": 100},
    "engine": "analytic",
    "tmp": False,
    "betas": [],
    "outputs": {"directory": "results", "formats": ["json", "csv"]},
}
REQUIRED = ("oscillator", "mixture")
MIXTURE_KEYS = {
    "PureEigenstate": {"n"},
    "PureCoherent": {"eta"},
    "ThermalEigenstates": {"beta", "n_max"},
    "ThermalCoherent": {"beta", "n_eta_samples"},
    "TwoLevelWell": {"c0", "c1", "L", "m", "hbar", "t_end", "n_points", "n_steps"},
}
MIXTURE_REQUIRED = {"PureEigenstate": {"n"}, "PureCoherent": {"eta"},
                    "ThermalEigenstates": {"beta"}, "ThermalCoherent": {"beta"},
                    "TwoLevelWell": set()}


def _merge(base: dict, raw: dict, path: str) -> dict:
    out = copy.deepcopy(base)
    for key, value in raw.items():
        where = f"{path}.{key}" if path else key
        if key not in base and path != "mixture":
            raise ConfigError(f"unknown key '{where}'")
        if isinstance(base.get(key), dict):
            if not isinstance(value, dict):
                raise ConfigError(f"'{where}' must be an object")
            out[key] = _merge(base[key], value, where)
        else:
            out[key] = value
    return out


def parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(raw: dict, sets) -> dict:
    """Apply ``key.sub=value`` overrides; values are parsed as JSON when possible."""
    raw = copy.deepcopy(raw)
    for item in sets or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, text = item.split("=", 1)
        parts = key.strip().split(".")
        node = raw
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override path '{key}' crosses a non-object")
        node[parts[-1]] = parse_value(text)
    return raw


def _complex(value, where):
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, list) and len(value) == 2 and all(isinstance(v, (int, float)) for v in value):
        return complex(value[0], value[1])
    raise ConfigError(f"'{where}' must be a number or [re, im]")


def _number(d, key, where, kind=float, positive=False, allow_none=False):
    v = d[key]
    if v is None and allow_none:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)) or (kind is int and not float(v).is_integer()):
        raise ConfigError(f"'{where}.{key}' must be {'an integer' if kind is int else 'a number'}")
    v = kind(v)
    if not math.isfinite(v) or (positive and v <= 0):
        raise ConfigError(f"'{where}.{key}' must be {'positive' if positive else 'finite'}")
    return v


@dataclass
class Scenario:
    raw: dict
    params: OscillatorParams
    spec: MixtureSpec
    settings: NumericSettings
    engines: tuple
    budget: int
    seed: int
    floor: int
    tmp: bool
    betas: list
    out_dir: str
    formats: list


def build(raw: dict) -> Scenario:
    """Validate a raw config dict and build every object the run needs.

    All module preconditions are checked here, before any computation.
    """
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    for key in raw:
        if key not in DEFAULTS and key not in REQUIRED:
            raise ConfigError(f"unknown key '{key}'")
    missing = [k for k in REQUIRED if k not in raw]
    if missing:
        raise ConfigError("missing required key(s): " + ", ".join(f"'{k}'" for k in missing))
    base = dict(DEFAULTS)
    base["mixture"] = {}
    cfg = _merge(base, raw, "")
    try:
        return _build(cfg)
    except ConfigError:
        raise
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def _build(cfg: dict) -> Scenario:
    o = cfg["oscillator"]
    for k in ("m", "omega", "A", "hbar", "tau"):
        _number(o, k, "oscillator")
    params = OscillatorParams(**{k: float(o[k]) for k in ("m", "omega", "A", "hbar", "tau")}) \
        if o["A"] >= 0 else None
    if params is None:
        raise ConfigError("'oscillator.A' must be non-negative")

    g = cfg["grid"]
    grid = Grid1D(_number(g, "x_min", "grid"), _number(g, "x_max", "grid"),
                  _number(g, "n_points", "grid", int))
    pr = cfg["propagation"]
    n_steps = _number(pr, "n_steps", "propagation", int, True)
    stride = _number(pr, "snapshot_stride", "propagation", int, True)
    PropagationPlan(params.hamiltonian(), 0.0, params.tau, n_steps, stride)

    tr = cfg["trajectories"]
    budget = _number(tr, "n_samples", "trajectories", int, True)
    seed = _number(tr, "seed", "trajectories", int)
    if seed < 0:
        raise ConfigError("'trajectories.seed' must be non-negative")
    ode_dt = _number(tr, "ode_dt", "trajectories", float, True, allow_none=True)
    spacing = params.tau / n_steps * stride
    if ode_dt is not None and not (ode_dt <= spacing * (1 + 1e-12) and spacing <= 4 * ode_dt * (1 + 1e-12)):
        raise ConfigError("'trajectories.ode_dt' must lie in [spacing/4, spacing]")
    record_stride = _number(tr, "record_stride", "trajectories", int, True)
    failure_budget = _number(tr, "failure_budget", "trajectories", int)
    floor = _number(tr, "stratum_floor", "trajectories", int, True)

    mix = cfg["mixture"]
    kind_name = mix.get("kind")
    if kind_name not in MIXTURE_KEYS:
        raise ConfigError(f"'mixture.kind' must be one of {sorted(MIXTURE_KEYS)}")
    extra = set(mix) - MIXTURE_KEYS[kind_name] - {"kind"}
    if extra:
        raise ConfigError(f"unknown key(s) for {kind_name}: " + ", ".join(f"'mixture.{k}'" for k in sorted(extra)))
    need = MIXTURE_REQUIRED[kind_name] - set(mix)
    if need:
        raise ConfigError("missing required key(s): " + ", ".join(f"'mixture.{k}'" for k in sorted(need)))

    well_points, well_steps = 256, 16384
    if kind_name == "PureEigenstate":
        kind = PureEigenstate(_number(mix, "n", "mixture", int))
        spec = MixtureSpec(kind, params)
    elif kind_name == "PureCoherent":
        spec = MixtureSpec(PureCoherent(_complex(mix["eta"], "mixture.eta")), params)
    elif kind_name == "ThermalEigenstates":
        n_max = _number(mix, "n_max", "mixture", int, allow_none=True) if "n_max" in mix else None
        spec = MixtureSpec(ThermalEigenstates(_number(mix, "beta", "mixture", positive=True), n_max), params)
    elif kind_name == "ThermalCoherent":
        n_eta = _number(mix, "n_eta_samples", "mixture", int, True) if "n_eta_samples" in mix else budget
        spec = MixtureSpec(ThermalCoherent(_number(mix, "beta", "mixture", positive=True), n_eta), params)
    else:
        state = TwoLevelWellState(
            L=_number(mix, "L", "mixture", positive=True) if "L" in mix else 1.0,
            c0=_complex(mix.get("c0", 2 ** -0.5), "mixture.c0"),
            c1=_complex(mix.get("c1", 2 ** -0.5), "mixture.c1"),
            m=_number(mix, "m", "mixture", positive=True) if "m" in mix else 1.0,
            hbar=_number(mix, "hbar", "mixture", positive=True) if "hbar" in mix else 1.0)
        t_end = _number(mix, "t_end", "mixture", positive=True, allow_none=True) if "t_end" in mix else None
        well_points = _number(mix, "n_points", "mixture", int, True) if "n_points" in mix else 256
        well_steps = _number(mix, "n_steps", "mixture", int, True) if "n_steps" in mix else 16384
        Grid1D(0.0, state.L, well_points)
        spec = MixtureSpec(TwoLevelWell(state.c0, state.c1, t_end), state)

    engine = cfg["engine"]
    engines = {"analytic": ("analytic",), "numeric": ("numeric",),
               "both": ("analytic", "numeric")}.get(engine)
    if engines is None:
        raise ConfigError("'engine' must be analytic, numeric or both")

    kind = spec.kind
    if isinstance(kind, ThermalEigenstates):
        probs = thermal_weights(params, kind.beta, kind.n_max)
        allocate(probs, budget, floor)
        if "numeric" in engines:
            check_coverage(params, grid, len(probs) - 1)
    elif isinstance(kind, PureEigenstate) and "numeric" in engines:
        check_coverage(params, grid, kind.n)
    elif isinstance(kind, PureCoherent) and "numeric" in engines:
        check_coverage(params, grid, 0, [kind.eta])
    elif isinstance(kind, ThermalCoherent):
        if budget < kind.n_eta_samples:
            raise ConfigError("'trajectories.n_samples' must be at least 'mixture.n_eta_samples'")
        if "numeric" in engines:
            # labels are drawn at run time; cover the 5-sigma label disc
            from .mixtures import coherent_label_sigma
            r = abs(params.alpha) + 5 * coherent_label_sigma(params, kind.beta)
            check_coverage(params, grid, 0, [r, -r, 1j * r, -1j * r])

    tmp = cfg["tmp"]
    if not isinstance(tmp, bool):
        raise ConfigError("'tmp' must be true or false")
    betas = cfg["betas"]
    if not isinstance(betas, list) or not all(
            isinstance(b, (int, float)) and not isinstance(b, bool) and b > 0 for b in betas):
        raise ConfigError("'betas' must be a list of positive numbers")

    out = cfg["outputs"]
    if not isinstance(out["directory"], str):
        raise ConfigError("'outputs.directory' must be a string")
    formats = out["formats"]
    if not isinstance(formats, list) or not set(formats) <= {"json", "csv", "svg"}:
        raise ConfigError("'outputs.formats' must be a list drawn from json, csv, svg")

    settings = NumericSettings(grid=grid, n_steps=n_steps, snapshot_stride=stride, ode_dt=ode_dt,
                               record_stride=record_stride, failure_budget=failure_budget,
                               well_points=well_points, well_steps=well_steps)
    return Scenario(cfg, params, spec, settings, engines, budget, seed, floor, tmp,
                    [float(b) for b in betas], out["directory"], formats)


def load(path, sets=()) -> Scenario:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc}") from exc
    return build(apply_overrides(raw, sets))


def compare_betas(scn: Scenario, text: str | None) -> list:
    if text:
        try:
            betas = [float(b) for b in text.split(",") if b.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad --betas list: {text!r}") from exc
    else:
        betas = scn.betas
    if not betas or any(not (b > 0 and math.isfinite(b)) for b in betas):
        raise ConfigError("compare needs a list of positive betas")
    for b in betas:
        allocate(thermal_weights(scn.params, b), scn.budget, scn.floor)
    return betas
