"""Run configuration: strict JSON parsing with recorded defaults."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from decolab.errors import DomainError, ParseError, ValidationError
from decolab.model import BoundaryData, ModelParams

__all__ = ["COMMANDS", "TimeGrid", "StateSpec", "BathSpec", "RunConfig", "parse_config"]

COMMANDS = ("harmonic", "brownian", "wavepacket", "saddle", "sweep-g", "drude", "figures")

MODEL_DEFAULTS = {
    "m": 1.0, "hbar": 1.0, "omega": 0.1, "nu": 1.0, "d0": 1.0, "d2": 1.0,
    "g": 0.0, "g_d": 0.0, "coupling_scale": 1.0,
}
BOUNDARY_DEFAULTS = {"t_i": 0.0, "t_f": 6.0, "x_i": 0.0, "xd_i": 0.5, "x_f": 2.0, "xd_f": 0.0}
TIME_GRID_DEFAULTS = {"t_min": 0.01, "t_max": 50.0, "n_points": 100, "spacing": "log"}
STATE_DEFAULTS = {"q2": 1.0, "kappa": 0.5, "s2": 0.0}
BATH_DEFAULTS = {
    "kind": "drude", "lam": 1.0, "OmegaD": 2.0, "m_B": 1.0, "T": 1.0, "omega_B": None,
    "table": None, "omega_grid": None,
}
TOLERANCE_DEFAULTS = {
    "pole_tol": 1e-8, "boundary_tol": 1e-10, "residual_tol": 1e-8, "newton_tol": 1e-12,
    "n_nodes": 513, "n_segments": 8,
}
FIGURE_DEFAULTS = {
    "only": ["fig1", "fig2", "fig3", "fig4"],
    "fig1": {"n_points": 121, "t_min": 1e-3, "t_max": 1e3, "linear_t_max": 1000.0},
    "fig2": {"n_points": 121, "t_min": 1e-2, "t_max": 1e4},
    "fig3": {"omega": 1.0, "nu": 1.0, "d0": 1.0, "d2": 1.0, "t": 6.0, "g_max": 0.01, "n_g": 6},
    "fig4": {"omega": 0.48, "nu": 1.0, "d0": 1.0, "d2": 1.0, "g_max": 0.024, "n_g": 7,
             "t_min": 2.0, "t_max": 38.0, "n_t": 19},
}
TOP_LEVEL = (
    "command", "model", "boundary", "time_grid", "state", "g_grid", "output_dir",
    "tolerances", "bath", "figures",
)


@dataclass(frozen=True)
class TimeGrid:
    t_min: float
    t_max: float
    n_points: int
    spacing: str

    def values(self) -> np.ndarray:
        if self.spacing == "log":
            return np.geomspace(self.t_min, self.t_max, self.n_points)
        return np.linspace(self.t_min, self.t_max, self.n_points)


@dataclass(frozen=True)
class StateSpec:
    q2: float
    r2: float
    s2: float


@dataclass(frozen=True)
class BathSpec:
    kind: str
    lam: float
    OmegaD: float
    m_B: float
    T: float
    omega_B: float | None
    table: str | None
    omega_grid: tuple[float, ...]


@dataclass
class RunConfig:
    command: str | None
    model: ModelParams
    boundary: BoundaryData
    time_grid: TimeGrid
    state: StateSpec
    g_grid: tuple[float, ...]
    output_dir: str
    tolerances: dict[str, Any]
    bath: BathSpec
    figures: dict[str, Any]
    coupling_scale: float = 1.0
    defaults: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    resolved: dict[str, Any] = field(default_factory=dict)


class _Resolver:
    def __init__(self, strict: bool):
        self.strict = strict
        self.defaults: list[str] = []
        self.warnings: list[str] = []

    def block(self, raw, defaults: dict, path: str) -> dict:
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            raise ParseError(f"'{path}' must be an object")
        self.check_keys(raw, defaults, path)
        out = {}
        for key, default in defaults.items():
            if key in raw:
                out[key] = raw[key]
            else:
                out[key] = default
                if default is not None:
                    self.defaults.append(f"{path}.{key}={default!r}")
        return out

    def check_keys(self, raw: dict, allowed, path: str):
        for key in raw:
            if key not in allowed:
                where = f"{path}.{key}" if path else key
                msg = f"unknown configuration key '{where}'"
                if self.strict:
                    raise ParseError(msg)
                self.warnings.append(msg)


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"'{path}' must be a number, got {value!r}")
    if not math.isfinite(value):
        raise ValidationError(f"'{path}' must be finite")
    return float(value)


def _complex(value, path: str) -> complex:
    if isinstance(value, list) and len(value) == 2:
        return complex(_number(value[0], path), _number(value[1], path))
    return complex(_number(value, path))


def _grid_list(raw, path: str) -> tuple[float, ...]:
    if isinstance(raw, dict):
        unknown = set(raw) - {"start", "stop", "num"}
        if unknown:
            raise ParseError(f"unknown configuration key '{path}.{sorted(unknown)[0]}'")
        try:
            start, stop, num = raw["start"], raw["stop"], raw["num"]
        except KeyError as exc:
            raise ValidationError(f"'{path}' needs start, stop and num (missing {exc})") from None
        num = int(_number(num, f"{path}.num"))
        if num < 1:
            raise ValidationError(f"'{path}.num' must be >= 1")
        return tuple(np.linspace(_number(start, path), _number(stop, path), num).tolist())
    if not isinstance(raw, list) or not raw:
        raise ValidationError(f"'{path}' must be a nonempty list or a start/stop/num object")
    return tuple(_number(v, path) for v in raw)


def parse_config(text: str, strict: bool = True, command: str | None = None) -> RunConfig:
    """Parse JSON configuration text.

    Every value not given is filled from the defaults and listed in
    ``RunConfig.defaults``.  Unknown keys raise :class:`ParseError` when
    ``strict``, otherwise they are collected in ``RunConfig.warnings``.
    """
    try:
        raw = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ParseError("configuration must be a JSON object")
    r = _Resolver(strict)
    r.check_keys(raw, TOP_LEVEL, "")

    cmd = raw.get("command")
    if cmd is not None and cmd not in COMMANDS:
        raise ValidationError(f"unknown command {cmd!r}; expected one of {', '.join(COMMANDS)}")
    if command is not None:
        if cmd is not None and cmd != command:
            raise ValidationError(f"config command {cmd!r} does not match requested command {command!r}")
        cmd = command

    model_defaults = dict(MODEL_DEFAULTS)
    if cmd == "brownian":
        model_defaults["omega"] = 0.0
    mb = r.block(raw.get("model"), model_defaults, "model")
    scale = _number(mb["coupling_scale"], "model.coupling_scale")
    try:
        model = ModelParams(
            m=_number(mb["m"], "model.m"),
            omega=_number(mb["omega"], "model.omega"),
            nu=scale**2 * _number(mb["nu"], "model.nu"),
            d0=scale**2 * _number(mb["d0"], "model.d0"),
            d2=scale**2 * _number(mb["d2"], "model.d2"),
            g=_number(mb["g"], "model.g"),
            g_d=_number(mb["g_d"], "model.g_d"),
            hbar=_number(mb["hbar"], "model.hbar"),
        )
    except DomainError as exc:
        raise ValidationError(f"model: {exc}") from None
    if cmd == "brownian" and model.omega != 0.0:
        raise ValidationError("brownian command needs model.omega = 0")

    bb = r.block(raw.get("boundary"), BOUNDARY_DEFAULTS, "boundary")
    try:
        boundary = BoundaryData(
            t_i=_number(bb["t_i"], "boundary.t_i"),
            t_f=_number(bb["t_f"], "boundary.t_f"),
            x_i=_complex(bb["x_i"], "boundary.x_i"),
            xd_i=_complex(bb["xd_i"], "boundary.xd_i"),
            x_f=_complex(bb["x_f"], "boundary.x_f"),
            xd_f=_complex(bb["xd_f"], "boundary.xd_f"),
        )
    except DomainError as exc:
        raise ValidationError(f"boundary: {exc}") from None

    tb = r.block(raw.get("time_grid"), TIME_GRID_DEFAULTS, "time_grid")
    t_min = _number(tb["t_min"], "time_grid.t_min")
    t_max = _number(tb["t_max"], "time_grid.t_max")
    n_points = tb["n_points"]
    if isinstance(n_points, bool) or not isinstance(n_points, int) or n_points < 1:
        raise ValidationError("time_grid.n_points must be a positive integer")
    if t_min > t_max:
        raise ValidationError(f"time_grid.t_min ({t_min}) exceeds time_grid.t_max ({t_max})")
    if tb["spacing"] not in ("linear", "log"):
        raise ValidationError("time_grid.spacing must be 'linear' or 'log'")
    if tb["spacing"] == "log" and t_min <= 0:
        raise ValidationError("log spacing needs time_grid.t_min > 0")
    if t_min < 0:
        raise ValidationError("time_grid.t_min must be non-negative")
    time_grid = TimeGrid(t_min, t_max, n_points, tb["spacing"])

    sraw = raw.get("state") or {}
    if isinstance(sraw, dict) and "r2" in sraw and "kappa" in sraw:
        raise ValidationError("state: give either kappa or r2, not both")
    allowed_state = dict(STATE_DEFAULTS)
    if isinstance(sraw, dict) and "r2" in sraw:
        allowed_state = {"q2": 1.0, "r2": None, "s2": 0.0}
    sb = r.block(sraw, allowed_state, "state")
    q2 = _number(sb["q2"], "state.q2")
    r2 = _number(sb["r2"], "state.r2") if "r2" in sb else _number(sb["kappa"], "state.kappa") ** 2 * q2
    if q2 <= 0 or r2 <= 0:
        raise ValidationError("state needs q2 > 0 and r2 > 0")
    state = StateSpec(q2, r2, _number(sb["s2"], "state.s2"))

    if "g_grid" in raw:
        g_grid = _grid_list(raw["g_grid"], "g_grid")
    else:
        g_grid = tuple(np.linspace(0.0, 0.01, 6).tolist())
        r.defaults.append("g_grid=0..0.01 (6 values)")
    if any(b < a for a, b in zip(g_grid, g_grid[1:])):
        raise ValidationError("g_grid must be ascending")

    output_dir = raw.get("output_dir", "out")
    if "output_dir" not in raw:
        r.defaults.append("output_dir='out'")
    if not isinstance(output_dir, str) or not output_dir:
        raise ValidationError("output_dir must be a nonempty string")

    tol = r.block(raw.get("tolerances"), TOLERANCE_DEFAULTS, "tolerances")
    for key in ("pole_tol", "boundary_tol", "residual_tol", "newton_tol"):
        if not _number(tol[key], f"tolerances.{key}") > 0:
            raise ValidationError(f"tolerances.{key} must be positive")
    for key, low in (("n_nodes", 16), ("n_segments", 1)):
        if isinstance(tol[key], bool) or not isinstance(tol[key], int) or tol[key] < low:
            raise ValidationError(f"tolerances.{key} must be an integer >= {low}")

    ba = r.block(raw.get("bath"), BATH_DEFAULTS, "bath")
    if ba["kind"] not in ("drude", "tabulated"):
        raise ValidationError(f"bath.kind must be 'drude' or 'tabulated', got {ba['kind']!r}")
    if ba["kind"] == "tabulated" and not ba["table"]:
        raise ValidationError("tabulated bath needs bath.table (path to an omega,rho CSV)")
    omega_grid = (
        _grid_list(ba["omega_grid"], "bath.omega_grid") if ba["omega_grid"] is not None
        else tuple(np.linspace(0.0, 5.0, 51).tolist())
    )
    bath = BathSpec(
        kind=ba["kind"], lam=_number(ba["lam"], "bath.lam"), OmegaD=_number(ba["OmegaD"], "bath.OmegaD"),
        m_B=_number(ba["m_B"], "bath.m_B"), T=_number(ba["T"], "bath.T"),
        omega_B=None if ba["omega_B"] is None else _number(ba["omega_B"], "bath.omega_B"),
        table=ba["table"], omega_grid=omega_grid,
    )

    figures = _figures_block(raw.get("figures"), r)

    resolved = {
        "command": cmd,
        "model": {k: float(mb[k]) for k in MODEL_DEFAULTS},
        "boundary": {k: (bb[k] if not isinstance(bb[k], complex) else [bb[k].real, bb[k].imag]) for k in bb},
        "time_grid": dict(tb),
        "state": {"q2": state.q2, "r2": state.r2, "s2": state.s2},
        "g_grid": list(g_grid),
        "output_dir": output_dir,
        "tolerances": dict(tol),
        "bath": {**ba, "omega_grid": list(omega_grid)},
        "figures": figures,
    }
    return RunConfig(
        command=cmd, model=model, boundary=boundary, time_grid=time_grid, state=state, g_grid=g_grid,
        output_dir=output_dir, tolerances=dict(tol), bath=bath, figures=figures, coupling_scale=scale,
        defaults=r.defaults, warnings=r.warnings, resolved=resolved,
    )


def _figures_block(raw, r: _Resolver) -> dict:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ParseError("'figures' must be an object")
    r.check_keys(raw, FIGURE_DEFAULTS, "figures")
    out: dict[str, Any] = {}
    only = raw.get("only", FIGURE_DEFAULTS["only"])
    if not isinstance(only, list) or not only or any(f not in FIGURE_DEFAULTS["only"] for f in only):
        raise ValidationError(f"figures.only must be a nonempty subset of {FIGURE_DEFAULTS['only']}")
    out["only"] = list(only)
    for name in ("fig1", "fig2", "fig3", "fig4"):
        block = r.block(raw.get(name), FIGURE_DEFAULTS[name], f"figures.{name}")
        for key, value in block.items():
            _number(value, f"figures.{name}.{key}")
        out[name] = block
    return out
