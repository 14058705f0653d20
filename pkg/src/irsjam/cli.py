"""Command-line entry point: ``python -m irsjam <command> ...``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import harness
from .alternating import BeamformingSolution, Problem
from .channel import dump_channels, generate_channels
from .metrics import evaluate
from .scenario import ConfigErrors, Scenario, default_scenario, load_scenario, scenario_from_dict


def _scenario(path) -> Scenario:
    return default_scenario() if path is None else load_scenario(path)


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _write(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def cmd_solve(args):
    sc = _scenario(args.scenario)
    harness.resolve_method(args.method)
    row, sol = harness.solve_cell(sc, args.method, args.seed)
    if args.format == "json":
        doc = harness.solution_dump(sol, sc, args.method, args.seed) if sol is not None else harness.row_dict(row)
        _write(json.dumps(doc, indent=1) + "\n", args.out)
    else:
        tmp = Path(args.out) if args.out else None
        if tmp is None:
            sys.stdout.write(",".join(harness.CSV_HEADER) + "\n" + ",".join(row.cells()) + "\n")
        else:
            harness.emit([row], "csv", tmp)
    return 0


def _sweep_spec(args):
    doc = {}
    if args.spec:
        p = Path(args.spec)
        if p.suffix.lower() == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:  # python < 3.11
                import tomli as tomllib
            doc = tomllib.loads(p.read_text())
        else:
            doc = json.loads(p.read_text())
    param = args.param or doc.get("swept_param")
    grid = _floats(args.grid) if args.grid else doc.get("grid", [])
    methods = args.methods.split(",") if args.methods else doc.get("methods", list(harness.METHODS))
    n_seeds = args.seeds if args.seeds is not None else int(doc.get("n_seeds", 20))
    scenario = args.scenario or doc.get("scenario")
    return harness.SweepSpec(param, tuple(grid), tuple(methods), n_seeds, scenario, args.first_seed)


def cmd_sweep(args):
    spec = _sweep_spec(args)

    def progress(row):
        if args.verbose:
            print(",".join(row.cells()), file=sys.stderr)

    rows = harness.run_sweep(spec, jobs=args.jobs, progress=progress)
    if args.out is None:
        if args.format == "csv":
            sys.stdout.write(",".join(harness.CSV_HEADER) + "\n")
            for r in rows:
                sys.stdout.write(",".join(r.cells(not args.no_timing)) + "\n")
        else:
            sys.stdout.write(json.dumps(harness.summarize(rows), indent=2) + "\n")
    else:
        harness.emit(rows, args.format, args.out, timing=not args.no_timing)
    return 0


def _pairs(x):
    a = np.asarray(x, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


def check_solution(doc, mc_samples=None):
    """Re-derive a stored solution's figures and constraints; returns (ok, report)."""
    from .robust import validate_robust

    sc = scenario_from_dict(doc["scenario"])
    if mc_samples is not None:
        sc = sc.with_solver(mc_samples=mc_samples)
    ch = generate_channels(sc, doc["seed"])
    f1, f2 = _pairs(doc["f1"]), _pairs(doc["f2"])
    theta = np.asarray(doc["theta"], dtype=float)
    refl = np.exp(1j * theta)
    cfg = sc.system
    method = doc["method"]
    no_irs = method == "efficiency-noirs"
    m = evaluate(f1, f2, refl, ch.without_irs() if no_irs else ch, cfg, with_irs=not no_irs)
    rep = {
        "p1": float(np.linalg.norm(f1) ** 2), "p2": float(np.linalg.norm(f2) ** 2),
        "budget_ok": bool(np.linalg.norm(f1) ** 2 <= cfg.p1_max + 1e-8 and np.linalg.norm(f2) ** 2 <= cfg.p2_max + 1e-8),
        "r_s": m.r_s, "ee": m.ee,
    }
    ok = rep["budget_ok"]
    if doc["status"] in ("optimal", "iteration-limit") and method != "rate-irs" and method != "robust-irs":
        rep["rate_ok"] = bool(m.r_s >= cfg.r_th - 1e-6)
        rep["ee_matches"] = bool(abs(m.ee - doc["ee"]) <= 1e-9 * max(1.0, abs(doc["ee"])))
        ok = ok and rep["rate_ok"] and rep["ee_matches"]
    if method == "robust-irs" and doc["status"] != "infeasible":
        prob = Problem(sc, ch, robust=True)
        sol = BeamformingSolution(f1, f2, theta, doc["ee"], doc["r_s"], doc["p_tot"], doc["status"])
        rob_ok, rob = validate_robust(prob, sol, seed=sc.solver.rng_seed)
        rep["robust"] = harness._jsonable(rob)
        ok = ok and rob_ok
    return bool(ok), rep


def cmd_validate(args):
    if args.gamma_report:
        from .validation import gamma_oracle_report

        rep = gamma_oracle_report(n_instances=args.instances)
        _write(json.dumps(harness._jsonable(rep.to_dict()), indent=1) + "\n", args.out)
        print(json.dumps(rep.summary(), indent=1), file=sys.stderr)
        return 0 if rep.all_bounds_hold else 1
    if not args.solution:
        raise SystemExit("validate needs --solution FILE or --gamma-report")
    doc = json.loads(Path(args.solution).read_text())
    ok, rep = check_solution(doc, args.mc_samples)
    rep["ok"] = ok
    _write(json.dumps(harness._jsonable(rep), indent=1) + "\n", args.out)
    return 0 if ok else 1


def cmd_dump_channels(args):
    sc = _scenario(args.scenario)
    ch = generate_channels(sc, args.seed)
    if args.out is None:
        from .channel import channels_to_dict

        sys.stdout.write(json.dumps(channels_to_dict(ch)) + "\n")
    else:
        dump_channels(ch, args.out)
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="irsjam", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, fmt_default="csv"):
        sp.add_argument("--scenario", help="scenario file (JSON or TOML); default layout if omitted")
        sp.add_argument("--out", help="output file; stdout if omitted")
        sp.add_argument("--format", choices=("csv", "json"), default=fmt_default)

    s = sub.add_parser("solve", help="solve one instance")
    common(s, "json")
    s.add_argument("--method", default="efficiency-irs", help=", ".join(harness.METHODS))
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("sweep", help="sweep one parameter across methods and seeds")
    common(s)
    s.add_argument("--spec", help="sweep file with swept_param, grid, methods, n_seeds, scenario")
    s.add_argument("--param", choices=harness.SWEEP_PARAMS)
    s.add_argument("--grid", help="comma-separated grid values")
    s.add_argument("--methods", "--method", dest="methods", help="comma-separated method names")
    s.add_argument("--seeds", type=int, help="number of seeds (default 20)")
    s.add_argument("--first-seed", type=int, default=0)
    s.add_argument("--seed", dest="first_seed", type=int, help="alias of --first-seed")
    s.add_argument("--jobs", type=int, default=1, help="worker processes")
    s.add_argument("--no-timing", action="store_true", help="leave wall_s empty for reproducible files")
    s.add_argument("-v", "--verbose", action="store_true")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("validate", help="re-check a stored solution, or run the bound-oracle report")
    s.add_argument("--solution", help="solution file written by 'solve --format json'")
    s.add_argument("--mc-samples", type=int)
    s.add_argument("--gamma-report", action="store_true")
    s.add_argument("--instances", type=int, default=50)
    s.add_argument("--out")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("dump-channels", help="write the channel draw for a seed")
    s.add_argument("--scenario")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_dump_channels)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigErrors, harness.UnknownMethod, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
