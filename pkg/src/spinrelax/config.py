"""
Scenario configuration files.

A config is TOML with one table per concern::

    [run]       mode, name, q_convention, units
    [cell]      edge_length
    [spin]      diffusion, gyro, base_rate, pump_rate, slow_down
    [gradient]  g | gx, gy, gz | direction, b_y
    [sweep]     axis, start, stop, count, spacing | values; series, series_values
    [solver]    method, mode_truncation, grid_points, n_steps, table_max_m
    [output]    csv, plot, log_x, log_y

Parsing is strict: unknown tables or keys, wrong types and physically
invalid values raise ``ConfigError`` carrying the file and line.  A run
manifest (JSON with a ``config`` entry) is accepted wherever a config is.
"""

from __future__ import annotations

import copy
import json
import math
import re
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import numpy as np

from .core import CellGeometry, GradientField, SpinParams

MODES = ("fid", "fid-sweep", "serf-sweep", "symmetry", "perturbation-table")
FID_AXES = ("gamma_g", "gamma0", "L", "D")
SERF_AXES = ("g",)
SERF_SERIES = ("gamma0", "direction")
DIRECTIONS = ("x", "y", "z", "case1", "case2", "case3")


class ConfigError(ValueError):
    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)
        self.path = path
        self.line = line


_number = (int, float)
_T_FLOAT = ("float", lambda v: isinstance(v, _number) and not isinstance(v, bool))
_T_INT = ("integer", lambda v: isinstance(v, int) and not isinstance(v, bool))
_T_STR = ("string", lambda v: isinstance(v, str))
_T_BOOL = ("boolean", lambda v: isinstance(v, bool))
_T_LIST = ("array", lambda v: isinstance(v, list))


def _choice(*options):
    return (f"one of {', '.join(options)}", lambda v: v in options)


SCHEMA: dict[str, dict[str, tuple]] = {
    "run": {
        "mode": _choice(*MODES),
        "name": _T_STR,
        "q_convention": _choice("literal-q", "scaled-q"),
        "units": _choice("rate", "angular"),
    },
    "cell": {"edge_length": _T_FLOAT},
    "spin": {
        "diffusion": _T_FLOAT,
        "gyro": _T_FLOAT,
        "base_rate": _T_FLOAT,
        "pump_rate": _T_FLOAT,
        "slow_down": _T_FLOAT,
    },
    "gradient": {
        "g": _T_FLOAT,
        "gx": _T_FLOAT,
        "gy": _T_FLOAT,
        "gz": _T_FLOAT,
        "direction": _choice(*DIRECTIONS),
        "b_y": _T_FLOAT,
    },
    "sweep": {
        "axis": _T_STR,
        "start": _T_FLOAT,
        "stop": _T_FLOAT,
        "count": _T_INT,
        "spacing": _choice("linear", "log"),
        "values": _T_LIST,
        "series": _T_STR,
        "series_values": _T_LIST,
    },
    "solver": {
        "method": _choice("spectral", "fd"),
        "mode_truncation": _T_INT,
        "grid_points": _T_INT,
        "n_steps": _T_INT,
        "table_max_m": _T_INT,
    },
    "output": {
        "csv": _T_STR,
        "plot": _T_BOOL,
        "log_x": _T_BOOL,
        "log_y": _T_BOOL,
    },
}

DEFAULTS: dict[str, dict[str, Any]] = {
    "run": {"q_convention": "literal-q", "units": "rate"},
    "cell": {},
    "spin": {"gyro": 1.0, "base_rate": 20.0, "pump_rate": 1.0, "slow_down": 1.0},
    "gradient": {"g": 0.0, "gx": 0.0, "gy": 0.0, "gz": 0.0, "b_y": 0.0},
    "sweep": {"spacing": "linear"},
    "solver": {"method": "spectral", "mode_truncation": 15, "grid_points": 48, "n_steps": 2000,
               "table_max_m": 5},
    "output": {"plot": True, "log_x": False, "log_y": False},
}

REQUIRED = {"run": ("mode",), "cell": ("edge_length",), "spin": ("diffusion",)}


@dataclass(frozen=True)
class ScenarioConfig:
    """Resolved configuration: every table filled in with defaults."""

    data: dict
    path: Path

    def __getitem__(self, section):
        return self.data[section]

    @property
    def mode(self) -> str:
        return self.data["run"]["mode"]

    @property
    def name(self) -> str:
        return self.data["run"]["name"]

    def geometry(self) -> CellGeometry:
        s = self.data["solver"]
        return CellGeometry(self.data["cell"]["edge_length"], s["mode_truncation"], s["grid_points"])

    def spin(self) -> SpinParams:
        s = self.data["spin"]
        gyro = s["gyro"] * (2 * math.pi if self.data["run"]["units"] == "angular" else 1.0)
        return SpinParams(s["diffusion"], gyro, s["base_rate"], s["pump_rate"], s["slow_down"])

    def sweep_values(self) -> list[float]:
        return _grid(self.data["sweep"])

    def to_json(self) -> dict:
        return copy.deepcopy(self.data)


def _grid(sweep: dict) -> list[float]:
    if "values" in sweep:
        return [float(v) for v in sweep["values"]]
    start, stop, count = sweep["start"], sweep["stop"], sweep["count"]
    if sweep["spacing"] == "log":
        return [float(v) for v in np.geomspace(start, stop, count)]
    return [float(v) for v in np.linspace(start, stop, count)]


class _Locator:
    """Maps (table, key) to the line it was written on."""

    def __init__(self, text: str | None):
        self.lines: dict[tuple[str, str | None], int] = {}
        if text is None:
            return
        section = None
        for no, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            m = re.match(r"^\[\s*([^\]]+?)\s*\]$", line)
            if m:
                section = m.group(1)
                self.lines.setdefault((section, None), no)
                continue
            m = re.match(r"^([A-Za-z0-9_\-\"']+)\s*=", line)
            if m:
                self.lines.setdefault((section, m.group(1).strip("\"'")), no)

    def __call__(self, section, key=None):
        return self.lines.get((section, key), self.lines.get((section, None)))


def load_config(path: str | Path, overrides: dict | None = None) -> ScenarioConfig:
    """Read, validate and resolve a config or run manifest."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", path) from exc
    if path.suffix == ".json":
        try:
            raw = json.loads(text)["config"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ConfigError(f"not a run manifest: {exc}", path) from exc
        locate = _Locator(None)
    else:
        try:
            raw = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML: {exc}", path) from exc
        locate = _Locator(text)
    return resolve(raw, path, locate, overrides or {})


def resolve(raw: dict, path: Path, locate=None, overrides: dict | None = None) -> ScenarioConfig:
    locate = locate or _Locator(None)

    def fail(msg, section=None, key=None):
        raise ConfigError(msg, path, locate(section, key) if section else None)

    if not isinstance(raw, dict):
        fail("config must be a table")
    data = {}
    for section, body in raw.items():
        if section not in SCHEMA:
            fail(f"unknown table [{section}]", section)
        if not isinstance(body, dict):
            fail(f"[{section}] must be a table", section)
        for key, value in body.items():
            if key not in SCHEMA[section]:
                fail(f"unknown key {section}.{key}", section, key)
            kind, check = SCHEMA[section][key]
            if not check(value):
                fail(f"{section}.{key} must be {kind}, got {value!r}", section, key)
        data[section] = dict(body)
    for section, keys in REQUIRED.items():
        for key in keys:
            if key not in data.get(section, {}):
                fail(f"missing required key {section}.{key}", section if section in data else None)

    for section in SCHEMA:
        merged = dict(DEFAULTS.get(section, {}))
        merged.update(data.get(section, {}))
        data[section] = merged
    for (section, key), value in (overrides or {}).items():
        data[section][key] = value
    data["run"].setdefault("name", path.stem)
    data["output"].setdefault("csv", f"{data['run']['name']}.csv")

    cfg = ScenarioConfig(data, path)
    _validate(cfg, fail)
    return cfg


_PHYSICAL_KEYS = {
    "edge_length": ("cell", "edge_length"),
    "mode_truncation": ("solver", "mode_truncation"),
    "grid_points": ("solver", "grid_points"),
    "diffusion": ("spin", "diffusion"),
    "base_rate": ("spin", "base_rate"),
    "pump_rate": ("spin", "pump_rate"),
    "slow_down": ("spin", "slow_down"),
    "gyro": ("spin", "gyro"),
}


def _validate(cfg: ScenarioConfig, fail):
    data = cfg.data
    try:
        geom = cfg.geometry()
        spin = cfg.spin()
    except ValueError as exc:
        field = next((f for f in _PHYSICAL_KEYS if str(exc).startswith(f)), None)
        section, key = _PHYSICAL_KEYS.get(field, (None, None))
        fail(str(exc), section, key)
    if 3 * spin.D / geom.L >= 1e4:
        fail("3D/L must stay below 1e4 cm/s for the diffusion description", "spin", "diffusion")
    if data["solver"]["n_steps"] < 10:
        fail("solver.n_steps must be >= 10", "solver", "n_steps")
    if data["solver"]["table_max_m"] < 1:
        fail("solver.table_max_m must be >= 1", "solver", "table_max_m")

    mode = cfg.mode
    if mode in ("fid-sweep", "serf-sweep"):
        sweep = data["sweep"]
        axes = FID_AXES if mode == "fid-sweep" else SERF_AXES
        if "axis" not in sweep:
            fail("missing required key sweep.axis", "sweep")
        if sweep["axis"] not in axes:
            fail(f"sweep.axis must be one of {', '.join(axes)}", "sweep", "axis")
        if "values" in sweep:
            if not sweep["values"]:
                fail("sweep.values is empty", "sweep", "values")
            if not all(_T_FLOAT[1](v) for v in sweep["values"]):
                fail("sweep.values must hold numbers", "sweep", "values")
        else:
            for key in ("start", "stop", "count"):
                if key not in sweep:
                    fail(f"sweep needs either values or start/stop/count (missing {key})", "sweep")
            if sweep["count"] < 1:
                fail("sweep.count must be >= 1 (empty sweep grid)", "sweep", "count")
            if sweep["spacing"] == "log" and (sweep["start"] <= 0 or sweep["stop"] <= 0):
                fail("log spacing needs positive start and stop", "sweep", "spacing")
        series = sweep.get("series")
        if series is not None:
            allowed = FID_AXES if mode == "fid-sweep" else SERF_SERIES
            if series not in allowed or series == sweep["axis"]:
                fail(f"sweep.series must be one of {', '.join(allowed)} and differ from the axis",
                     "sweep", "series")
            values = sweep.get("series_values")
            if not values:
                fail("sweep.series_values must be a non-empty array", "sweep",
                     "series_values" if "series_values" in sweep else "series")
            if series == "direction":
                if not all(v in DIRECTIONS for v in values):
                    fail(f"direction series values must be among {', '.join(DIRECTIONS)}",
                         "sweep", "series_values")
            elif not all(_T_FLOAT[1](v) for v in values):
                fail("sweep.series_values must hold numbers", "sweep", "series_values")
        elif "series_values" in sweep:
            fail("sweep.series_values given without sweep.series", "sweep", "series_values")
        _validate_points(cfg, fail)
    if mode in ("serf-sweep",) and "direction" not in data["gradient"] \
            and data["sweep"].get("series") != "direction":
        fail("serf-sweep needs gradient.direction or a direction series", "gradient")
    if mode in ("symmetry",):
        try:
            GradientField(data["gradient"]["gx"], data["gradient"]["gy"], data["gradient"]["gz"])
        except ValueError as exc:
            fail(str(exc), "gradient")


def _validate_points(cfg: ScenarioConfig, fail):
    """Re-validate the physical types at every sweep point."""
    sweep = cfg.data["sweep"]
    axis_values = cfg.sweep_values()
    series_values = sweep.get("series_values") or [None]
    for series_value in series_values:
        for value in axis_values:
            changes = {sweep["axis"]: value}
            if sweep.get("series") and sweep["series"] != "direction":
                changes[sweep["series"]] = series_value
            try:
                point_physics(cfg, changes)
            except ValueError as exc:
                fail(f"invalid sweep point {changes}: {exc}", "sweep",
                     "values" if "values" in sweep else "start")


def point_physics(cfg: ScenarioConfig, changes: dict):
    """Geometry and spin parameters at one sweep point (axis names as in FID_AXES)."""
    geom = cfg.geometry()
    spin = cfg.spin()
    if "L" in changes:
        geom = CellGeometry(changes["L"], geom.M, geom.N)
    if "D" in changes:
        spin = spin.replace(diffusion=changes["D"])
    if "gamma0" in changes:
        spin = spin.replace(base_rate=changes["gamma0"])
    if 3 * spin.D / geom.L >= 1e4:
        raise ValueError("3D/L reaches 1e4 cm/s")
    return geom, spin
