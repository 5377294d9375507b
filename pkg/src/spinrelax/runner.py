"""
Execution of scenario configs: sweep points, CSV/SVG output and run manifests.

Each mode has a fixed column order.  Sweep points are independent and may
be farmed out to a process pool; results are collected in submission
order so the CSV does not depend on the worker count.
"""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import ScenarioConfig, point_physics
from .core import GradientField
from .errors import (
    DegenerateParametersError,
    InsufficientHorizonError,
    SolverError,
    SweepRangeError,
)
from .evolution import base_horizon, evolve_fid_fd, evolve_fid_spectral, relaxation
from .perturbation import (
    CLOSED_FORM_COEFFICIENTS,
    closed_form_second_order_rate,
    second_order_rate,
    upper_bound_rate,
)
from .serf import (
    SerfScenario,
    divergence_free_config,
    mean_sx,
    sweep_by,
    swap_residual,
)

COLUMNS = {
    "fid": ("t", "re", "im", "abs"),
    "fid-sweep": ("gamma_g", "gamma0", "L", "D", "Gamma2", "DeltaGamma2", "T2", "omega_fit",
                  "Gamma2_upper_bound", "error"),
    "serf-sweep": ("direction", "g", "gx", "gy", "gz", "gamma0", "w", "Delta_w", "b_min", "b_max",
                   "error"),
    "symmetry": ("gx", "gy", "gz", "b_y", "Sx", "Sx_swapped", "residual", "control_residual", "error"),
    "perturbation-table": ("m", "closed_form", "summed", "rel_diff"),
}

#: truncation used for the numeric second-order sums in the table
TABLE_TRUNCATION = 50

POINT_ERRORS = (SolverError, InsufficientHorizonError, SweepRangeError, DegenerateParametersError,
                ValueError, ArithmeticError)


@dataclass
class RunResult:
    rows: list[dict]
    columns: tuple[str, ...]
    failed: int


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value) + 0.0, ".17g")  # folds -0.0 into 0
    return str(value)


def to_csv(rows: list[dict], columns) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(row.get(c)) for c in columns])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# per-point work (top level so the process pool can pickle it)
# ---------------------------------------------------------------------------

def _fid_point(task):
    geom, spin, gamma_g, solver, n_steps = task
    row = {"gamma_g": gamma_g, "gamma0": spin.gamma0, "L": geom.L, "D": spin.D}
    g = gamma_g / spin.gyro
    try:
        res = relaxation(geom, spin, g, solver=solver, n_steps=n_steps)
    except POINT_ERRORS as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
        return row
    row.update(Gamma2=res.gamma2, DeltaGamma2=res.delta_gamma2, T2=res.T2, omega_fit=res.phase_rate,
               Gamma2_upper_bound=upper_bound_rate(geom, spin, g))
    return row


def _serf_point(task):
    scenario, direction, g, method, convention = task
    gx, gy, gz = scenario.gradient.g
    row = {"direction": direction, "g": g, "gx": gx, "gy": gy, "gz": gz,
           "gamma0": scenario.spin.gamma0}
    try:
        sweep = sweep_by(scenario, method=method, convention=convention)
    except POINT_ERRORS as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
        return row
    row.update(w=sweep.w, b_min=sweep.b_min, b_max=sweep.b_max)
    return row


def _run_tasks(fn, tasks, workers):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


# ---------------------------------------------------------------------------
# modes
# ---------------------------------------------------------------------------

def _series(cfg: ScenarioConfig):
    sweep = cfg["sweep"]
    if sweep.get("series"):
        return sweep["series"], list(sweep["series_values"])
    return None, [None]


def run_fid(cfg: ScenarioConfig, workers: int = 1) -> RunResult:
    geom, spin = cfg.geometry(), cfg.spin()
    solver = cfg["solver"]
    g = cfg["gradient"]["g"]
    t_end = 2 * base_horizon(geom, spin)
    evolve = evolve_fid_spectral if solver["method"] == "spectral" else evolve_fid_fd
    trace = evolve(geom, spin, g, t_end, solver["n_steps"])
    rows = [{"t": t, "re": v.real, "im": v.imag, "abs": abs(v)}
            for t, v in zip(trace.times, trace.values)]
    return RunResult(rows, COLUMNS["fid"], 0)


def run_fid_sweep(cfg: ScenarioConfig, workers: int = 1) -> RunResult:
    axis = cfg["sweep"]["axis"]
    series, series_values = _series(cfg)
    solver = cfg["solver"]
    base_gamma_g = cfg["gradient"]["g"] * cfg.spin().gyro
    tasks = []
    for s in series_values:
        for value in cfg.sweep_values():
            changes = {axis: value}
            if series:
                changes[series] = float(s)
            geom, spin = point_physics(cfg, changes)
            gamma_g = changes.get("gamma_g", base_gamma_g)
            tasks.append((geom, spin, gamma_g, solver["method"], solver["n_steps"]))
    rows = _run_tasks(_fid_point, tasks, workers)
    return RunResult(rows, COLUMNS["fid-sweep"], sum(1 for r in rows if r.get("error")))


def serf_gradient(direction: str, g: float) -> GradientField:
    if direction.startswith("case"):
        return divergence_free_config(int(direction[4:]), g)
    triple = [0.0, 0.0, 0.0]
    triple["xyz".index(direction)] = g
    return GradientField(*triple)


def run_serf_sweep(cfg: ScenarioConfig, workers: int = 1) -> RunResult:
    series, series_values = _series(cfg)
    method = cfg["solver"]["method"]
    convention = cfg["run"]["q_convention"]
    geom, spin = cfg.geometry(), cfg.spin()
    tasks, keys = [], []
    for s in series_values:
        direction = s if series == "direction" else cfg["gradient"]["direction"]
        point_spin = spin.replace(base_rate=float(s)) if series == "gamma0" else spin
        for g in cfg.sweep_values():
            scenario = SerfScenario(geom, point_spin, serf_gradient(direction, g))
            tasks.append((scenario, direction, g, method, convention))
            keys.append(point_spin.gamma0)
    # gradient-free baselines, one per relaxation rate
    baseline_rates = sorted(set(keys))
    base_tasks = [(SerfScenario(geom, spin.replace(base_rate=r)), "none", 0.0, method, convention)
                  for r in baseline_rates]
    results = _run_tasks(_serf_point, base_tasks + tasks, workers)
    baselines = dict(zip(baseline_rates, results[: len(base_tasks)]))
    rows = results[len(base_tasks):]
    for row in rows:
        base = baselines[row["gamma0"]]
        if not row.get("error") and not base.get("error"):
            row["Delta_w"] = 0.0 if row["g"] == 0 else row["w"] - base["w"]
        elif not row.get("error"):
            row["error"] = f"baseline failed: {base['error']}"
    return RunResult(rows, COLUMNS["serf-sweep"], sum(1 for r in rows if r.get("error")))


def run_symmetry(cfg: ScenarioConfig, workers: int = 1) -> RunResult:
    grad = cfg["gradient"]
    geom, spin = cfg.geometry(), cfg.spin()
    kwargs = {"method": cfg["solver"]["method"], "convention": cfg["run"]["q_convention"]}
    row = {"gx": grad["gx"], "gy": grad["gy"], "gz": grad["gz"], "b_y": grad["b_y"]}
    try:
        scenario = SerfScenario(geom, spin, GradientField(grad["gx"], grad["gy"], grad["gz"]), grad["b_y"])
        row["Sx"] = mean_sx(scenario, **kwargs)
        row["Sx_swapped"] = mean_sx(scenario.with_gradient(scenario.gradient.swapped("x", "z")), **kwargs)
        row["residual"] = swap_residual(scenario, "x", "z", **kwargs)
        row["control_residual"] = swap_residual(scenario, "y", "z", **kwargs)
    except POINT_ERRORS as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return RunResult([row], COLUMNS["symmetry"], 1 if row.get("error") else 0)


def perturbation_table(cfg: ScenarioConfig, workers: int = 1) -> RunResult:
    """Closed-form versus summed second-order rates for m = 1 .. table_max_m."""
    geom = cfg.geometry().with_truncation(max(TABLE_TRUNCATION, cfg["solver"]["table_max_m"] + 1))
    spin = cfg.spin()
    g = cfg["gradient"]["g"]
    rows = []
    for m in range(1, cfg["solver"]["table_max_m"] + 1):
        summed = second_order_rate(geom, spin, g, (m, 1, 1), check=False)
        row = {"m": m, "summed": summed}
        if m in CLOSED_FORM_COEFFICIENTS:
            closed = closed_form_second_order_rate(geom, spin, g, m)
            row["closed_form"] = closed
            row["rel_diff"] = 0.0 if closed == 0 else abs(summed - closed) / abs(closed)
        rows.append(row)
    return RunResult(rows, COLUMNS["perturbation-table"], 0)


RUNNERS = {
    "fid": run_fid,
    "fid-sweep": run_fid_sweep,
    "serf-sweep": run_serf_sweep,
    "symmetry": run_symmetry,
    "perturbation-table": perturbation_table,
}

PLOTS = {
    "fid": ("t", "abs"),
    "fid-sweep": ("AXIS", "Gamma2"),
    "serf-sweep": ("g", "w"),
}


def plot_svg(cfg: ScenarioConfig, result: RunResult, path: Path) -> None:
    """Static line chart of the main output; one line per series."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    x_col, y_col = PLOTS[cfg.mode]
    if x_col == "AXIS":
        x_col = cfg["sweep"]["axis"]
    series_col = None
    if cfg.mode in ("fid-sweep", "serf-sweep") and cfg["sweep"].get("series"):
        series_col = cfg["sweep"]["series"]

    groups: dict = {}
    for row in result.rows:
        if row.get("error") or row.get(y_col) is None:
            continue
        groups.setdefault(row.get(series_col) if series_col else None, []).append((row[x_col], row[y_col]))

    with plt.rc_context({"svg.hashsalt": "spinrelax", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4))
        for key, pts in groups.items():
            xs, ys = zip(*pts)
            label = None if key is None else f"{series_col} = {format_value(key)}"
            ax.plot(xs, ys, marker="o", ms=3, label=label)
        ax.set_xlabel(x_col)
        ax.set_ylabel(y_col)
        if cfg["output"]["log_x"]:
            ax.set_xscale("log")
        if cfg["output"]["log_y"]:
            ax.set_yscale("log")
        if series_col:
            ax.legend()
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)


def run_config(cfg: ScenarioConfig, out_dir: Path, workers: int = 1, table: bool = False) -> RunResult:
    """Run a resolved config and write CSV, SVG and manifest into ``out_dir``.

    I/O failures propagate as OSError.
    """
    started = time.perf_counter()
    mode = "perturbation-table" if table else cfg.mode
    result = RUNNERS[mode](cfg, workers)

    out_dir.mkdir(parents=True, exist_ok=True)
    stem = cfg.name + ("-table" if table and cfg.mode != "perturbation-table" else "")
    csv_name = cfg["output"]["csv"] if not table or cfg.mode == "perturbation-table" else f"{stem}.csv"
    csv_path = out_dir / csv_name
    csv_path.write_text(to_csv(result.rows, result.columns))
    outputs = [csv_path.name]
    if cfg["output"]["plot"] and mode in PLOTS:
        svg_path = csv_path.with_suffix(".svg")
        plot_svg(cfg, result, svg_path)
        outputs.append(svg_path.name)

    manifest = {
        "config": cfg.to_json(),
        "mode": mode,
        "version": __version__,
        "outputs": outputs,
        "rows": len(result.rows),
        "failed_points": result.failed,
        "workers": workers,
        "wall_time_s": round(time.perf_counter() - started, 3),
    }
    manifest_path = out_dir / f"{stem}.manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return result

