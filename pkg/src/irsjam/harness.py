"""Single runs, parameter sweeps and result files."""
from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from . import baselines
from .alternating import INFEASIBLE
from .channel import channels_to_dict, generate_channels
from .perfect import algorithm1
from .robust import algorithm2
from .scenario import (ConfigErrors, InvalidConfig, Scenario, config_violations, dbm_to_watt, load_scenario,
                       scenario_to_dict)

METHODS = {
    "efficiency-irs": algorithm1,
    "robust-irs": algorithm2,
    "rate-irs": baselines.solve_rate_max,
    "power-irs": baselines.solve_power_min,
    "efficiency-noirs": baselines.solve_no_irs,
    "efficiency-noangle": baselines.solve_no_angle,
    "mrt-irs": baselines.solve_mrt,
}

SWEEP_PARAMS = ("p_max_dbm", "r_th", "user_irs_distance", "m_elements")

CSV_HEADER = ("method", "seed", "swept_param", "swept_value", "ee", "rs", "ptot_w", "status", "iters", "wall_s")


class UnknownMethod(ValueError):
    pass


def resolve_method(name):
    try:
        return METHODS[name]
    except KeyError:
        raise UnknownMethod(f"unknown method {name!r}; choose from {', '.join(METHODS)}") from None


@dataclass(frozen=True)
class ResultRow:
    method: str
    seed: int
    swept_param: str
    swept_value: float | None
    ee: float | None
    rs: float | None
    ptot_w: float | None
    status: str
    iters: int
    wall_s: float

    def cells(self, timing=True):
        def num(x):
            return "" if x is None else repr(float(x))

        return [self.method, str(self.seed), self.swept_param, num(self.swept_value), num(self.ee),
                num(self.rs), num(self.ptot_w), self.status, str(self.iters),
                num(self.wall_s) if timing else ""]

    @classmethod
    def from_cells(cls, cells):
        def num(x):
            return None if x == "" else float(x)

        m, seed, param, val, ee, rs, p, status, iters, wall = cells
        return cls(m, int(seed), param, num(val), num(ee), num(rs), num(p), status, int(iters),
                   num(wall) if wall != "" else float("nan"))


def row_from_solution(method, seed, param, value, sol) -> ResultRow:
    empty = sol.status == INFEASIBLE
    return ResultRow(
        method, int(seed), param, value,
        None if empty else float(sol.ee), None if empty else float(sol.r_s),
        None if empty else float(sol.p_tot), sol.status, int(sol.iterations), float(sol.wall_time),
    )


# -- scenario edits for sweeps --------------------------------------------------

def apply_param(sc: Scenario, param, value) -> Scenario:
    """Scenario with one swept parameter set; raises ConfigErrors on bad values."""
    if param == "p_max_dbm":
        p = dbm_to_watt(float(value))
        out = sc.with_system(p1_max=p, p2_max=p)
    elif param == "r_th":
        out = sc.with_system(r_th=float(value))
    elif param == "m_elements":
        if float(value) != int(value):
            raise ConfigErrors([InvalidConfig("m_elements", "must be an integer")])
        out = sc.with_system(n_irs_elements=int(value))
    elif param == "user_irs_distance":
        # move the user along y so that its distance to the IRS equals value
        irs, user = np.asarray(sc.geometry.irs), np.asarray(sc.geometry.user)
        dx, dz = user[0] - irs[0], user[2] - irs[2]
        rest = float(value) ** 2 - dx * dx - dz * dz
        if rest < 0:
            raise ConfigErrors([InvalidConfig(
                "user_irs_distance", f"must be at least {math.hypot(dx, dz):.3f} m for this layout")])
        new_user = (float(user[0]), float(irs[1] + math.sqrt(rest)), float(user[2]))
        out = replace(sc, geometry=replace(sc.geometry, user=new_user))
    else:
        raise ConfigErrors([InvalidConfig("swept_param", f"must be one of {', '.join(SWEEP_PARAMS)}")])
    errs = config_violations(out.system, out.geometry, out.pathloss, out.uncertainty, out.solver)
    if errs:
        raise ConfigErrors(errs)
    return out


# -- single runs ------------------------------------------------------------------

def _jsonable(x):
    if isinstance(x, np.ndarray):
        if np.iscomplexobj(x):
            return np.stack([x.real, x.imag], axis=-1).tolist()
        return x.tolist()
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def solution_dump(sol, scenario: Scenario, method, seed, channels=None) -> dict:
    doc = {
        "method": method,
        "seed": seed,
        "status": sol.status,
        "ee": sol.ee,
        "r_s": sol.r_s,
        "p_tot": sol.p_tot,
        "iterations": sol.iterations,
        "f1": sol.f1,
        "f2": sol.f2,
        "theta": sol.theta,
        "trace": sol.trace,
        "steps": sol.steps,
        "report": sol.report,
        "scenario": scenario_to_dict(scenario),
    }
    if channels is not None:
        doc["channels"] = channels_to_dict(channels)
    return _jsonable(doc)


def solve_cell(sc: Scenario, method, seed, param="", value=None):
    """Run one (scenario, method, seed) cell; returns (row, solution or None)."""
    fn = resolve_method(method)
    t0 = time.perf_counter()
    try:
        ch = generate_channels(sc, seed)
        sol = fn(sc, ch)
    except Exception as exc:  # one bad cell must not sink a sweep
        return ResultRow(method, int(seed), param, value, None, None, None,
                         f"error: {type(exc).__name__}: {exc}", 0, time.perf_counter() - t0), None
    return row_from_solution(method, seed, param, value, sol), sol


def run_single(scenario_path, method, seed, out=None):
    """Solve one instance from a scenario file; optionally write the solution dump."""
    resolve_method(method)
    sc = load_scenario(scenario_path) if not isinstance(scenario_path, Scenario) else scenario_path
    row, sol = solve_cell(sc, method, seed)
    if out is not None and sol is not None:
        Path(out).write_text(json.dumps(solution_dump(sol, sc, method, seed), indent=1) + "\n")
    return row, sol


# -- sweeps -------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    swept_param: str
    grid: tuple
    methods: tuple
    n_seeds: int = 20
    scenario: object = None  # path or Scenario
    first_seed: int = 0

    def __post_init__(self):
        errs = []
        if self.swept_param not in SWEEP_PARAMS:
            errs.append(InvalidConfig("swept_param", f"must be one of {', '.join(SWEEP_PARAMS)}"))
        g = [float(v) for v in self.grid]
        if not g:
            errs.append(InvalidConfig("grid", "must not be empty"))
        elif not (all(b > a for a, b in zip(g, g[1:])) or all(b < a for a, b in zip(g, g[1:]))):
            errs.append(InvalidConfig("grid", "must be strictly monotone"))
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            errs.append(InvalidConfig("methods", f"unknown or empty: {bad}"))
        if self.n_seeds < 1:
            errs.append(InvalidConfig("n_seeds", "must be >= 1"))
        if errs:
            raise ConfigErrors(errs)

    def base(self) -> Scenario:
        if isinstance(self.scenario, Scenario):
            return self.scenario
        if self.scenario is None:
            from .scenario import default_scenario
            return default_scenario()
        return load_scenario(self.scenario)

    def cells(self):
        for v in self.grid:
            for m in self.methods:
                for s in range(self.first_seed, self.first_seed + self.n_seeds):
                    yield m, s, v


def _sweep_cell(args):
    base, param, method, seed, value = args
    try:
        sc = apply_param(base, param, value)
    except ConfigErrors as exc:
        return ResultRow(method, seed, param, value, None, None, None, f"error: {exc}", 0, 0.0)
    return solve_cell(sc, method, seed, param, value)[0]


def run_sweep(spec: SweepSpec, jobs=1, progress=None) -> list:
    """Every (grid value, method, seed) cell, in that nested order.

    ``jobs > 1`` spreads cells over worker processes; rows come back in the
    same order either way.  ``progress(row)`` is called as each row lands.
    """
    base = spec.base()
    tasks = [(base, spec.swept_param, m, s, float(v)) for m, s, v in spec.cells()]
    rows = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for row in pool.map(_sweep_cell, tasks):
                rows.append(row)
                if progress:
                    progress(row)
    else:
        for t in tasks:
            row = _sweep_cell(t)
            rows.append(row)
            if progress:
                progress(row)
    return rows


def summarize(rows) -> dict:
    """Per-method series over the grid: mean and std across seeds.

    Infeasible and failed cells count as zero efficiency and zero rate (no
    secure transmission); power averages use feasible cells only.
    """
    grid = []
    for r in rows:
        if r.swept_value not in grid:
            grid.append(r.swept_value)
    methods = []
    for r in rows:
        if r.method not in methods:
            methods.append(r.method)
    series = {}
    for m in methods:
        s = {k: [] for k in ("ee_mean", "ee_std", "rs_mean", "rs_std", "ptot_mean", "ptot_std", "n_feasible", "n")}
        for v in grid:
            cell = [r for r in rows if r.method == m and r.swept_value == v]
            ee = np.array([r.ee if r.ee is not None else 0.0 for r in cell])
            rs = np.array([r.rs if r.rs is not None else 0.0 for r in cell])
            pw = np.array([r.ptot_w for r in cell if r.ptot_w is not None])
            s["ee_mean"].append(float(ee.mean()) if len(ee) else None)
            s["ee_std"].append(float(ee.std()) if len(ee) else None)
            s["rs_mean"].append(float(rs.mean()) if len(rs) else None)
            s["rs_std"].append(float(rs.std()) if len(rs) else None)
            s["ptot_mean"].append(float(pw.mean()) if len(pw) else None)
            s["ptot_std"].append(float(pw.std()) if len(pw) else None)
            s["n_feasible"].append(sum(r.ee is not None for r in cell))
            s["n"].append(len(cell))
        series[m] = s
    param = rows[0].swept_param if rows else ""
    return {"swept_param": param, "grid": grid, "methods": series}


def emit(results, fmt, path, timing=True):
    """Write rows as CSV or as the JSON plot bundle.

    ``timing=False`` leaves the wall-time column empty so that repeated runs
    give byte-identical files.
    """
    path = Path(path)
    if fmt == "csv":
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_HEADER)
            for r in results:
                w.writerow(r.cells(timing))
    elif fmt == "json":
        path.write_text(json.dumps(summarize(results), indent=2) + "\n")
    else:
        raise ValueError(f"format must be 'csv' or 'json', got {fmt!r}")
    return path


def read_csv(path) -> list:
    with Path(path).open(newline="") as fh:
        rd = csv.reader(fh)
        header = tuple(next(rd))
        if header != CSV_HEADER:
            raise ValueError(f"unexpected header {header}")
        return [ResultRow.from_cells(c) for c in rd]


def row_dict(row: ResultRow) -> dict:
    return asdict(row)
