"""Command-line entry point: ``gvebarrier <command> <scenario> ...``.

Exit codes: 0 success, 1 constraint violation detected, 2 configuration
error, 3 numerical failure.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError, GveBarrierError, InfeasibleInitialState
from .harness import grid_values, run_c0_sweep, run_closed_loop, run_governor_comparison, run_grid_study
from .scenario import HOUR, load_scenario
from .telemetry import write_csv

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _violations(log, cfg):
    """Names of the constraints the log breaks (thrust checked per mode)."""
    found = []
    if log.c1_slack.min() < 0.0:
        found.append("periapsis")
    if log.c3_slack.min() < 0.0:
        found.append("eccentricity")
    mode = cfg.saturation
    if hasattr(mode, "u_max") and log.u_norm.max() > mode.u_max + 1e-12:
        found.append("thrust")
    if hasattr(mode, "bounds") and mode.kernel_code is not None and getattr(mode, "radius", 0.0) == 0.0:
        if np.any(np.abs(log.u) > np.asarray(mode.bounds)):
            found.append("thrust")
    return found


def _print_summary(label, log):
    s = log.summary()
    conv = "never" if s["convergence_time"] is None else f"{s['convergence_time'] / HOUR:.3f} h"
    print(f"{label}: {s['samples']} samples to {s['t_final'] / HOUR:.2f} h, "
          f"min c1 {s['min_c1_slack']:.6g} km, min c3 {s['min_c3_slack']:.6g}, "
          f"max |u| {s['max_u_norm']:.6g} km/s^2, converged {conv}")


def cmd_simulate(args):
    cfg = load_scenario(args.scenario)
    if args.hours is not None:
        cfg = cfg.replace(t_final=args.hours * HOUR)
    log = run_closed_loop(cfg, use_governor=not args.no_governor)
    if args.out:
        write_csv(log, args.out)
    _print_summary(cfg.name, log)
    bad = _violations(log, cfg)
    if bad:
        print(f"constraint violation: {', '.join(bad)}")
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_grid(args):
    cfg = load_scenario(args.scenario)
    a_vals = grid_values(*args.a_range) if args.a_range else None
    e_vals = grid_values(*args.e_range) if args.e_range else None
    result = run_grid_study(cfg, a_vals, e_vals, args.horizon * HOUR, args.workers)
    if args.out:
        write_csv(result, args.out)
    feas = result.feasible
    errors = [c for c in feas if c.error]
    print(f"{len(result.cells)} cells, {len(feas)} feasible, "
          f"{sum(c.converged for c in feas)} converged ({100.0 * result.converged_fraction:.1f}%), "
          f"{len(errors)} numerical failures")
    violated = [c for c in feas if c.min_c1_slack is not None
                and (c.min_c1_slack < 0.0 or c.min_c3_slack < 0.0)]
    if violated:
        print(f"constraint violation in {len(violated)} cells")
        return EXIT_VIOLATION
    return EXIT_NUMERICAL if errors else EXIT_OK


def cmd_c0_sweep(args):
    cfg = load_scenario(args.scenario)
    points = run_c0_sweep(cfg.x0, cfg.x_des, args.points, cfg.P, cfg.constraints)
    if args.out:
        write_csv(points, args.out)
    for p in points:
        c0 = "infeasible" if p.c0 is None else f"{p.c0:.6e}"
        print(f"s = {p.s:.4f}  a = {p.elements[0]:.3f} km  c0 = {c0}")
    return EXIT_OK


def cmd_governor(args):
    cfg = load_scenario(args.scenario)
    if cfg.governor is None:
        raise ConfigError(f"{args.scenario}: scenario has no [governor] section")
    horizons = args.horizons if args.horizons is not None else [cfg.governor.t_hor / HOUR]
    result = run_governor_comparison(cfg, [h * HOUR for h in horizons])
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(result.baseline, out / "baseline.csv")
        for h, log in result.runs.items():
            write_csv(log, out / f"governor_{h / HOUR:g}h.csv")
        write_csv(result.summary, out / "summary.csv")
    _print_summary("baseline", result.baseline)
    for h, log in result.runs.items():
        _print_summary(f"t_hor = {h / HOUR:g} h", log)
    logs = [result.baseline, *result.runs.values()]
    if any(_violations(log, cfg) for log in logs):
        print("constraint violation detected")
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_validate(args):
    cfg = load_scenario(args.scenario)
    w = cfg.initial_weights()
    print(f"{cfg.name}: ok")
    print(f"  x0    = {cfg.x0.as_array().tolist()}, theta0 = {cfg.theta0}")
    print(f"  x_des = {cfg.x_des.as_array().tolist()}")
    print(f"  P     = {list(cfg.p_diag)}, q1 = {w.q1:.6g}, q2 = {w.q2:.6g}")
    print(f"  saturation = {type(cfg.saturation).__name__}, t_final = {cfg.t_final / HOUR:g} h")
    if cfg.governor is not None:
        print(f"  governor: t_hor = {cfg.governor.t_hor / HOUR:g} h, "
              f"update every {cfg.governor.update_period / HOUR:g} h")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="gvebarrier", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one closed-loop scenario")
    p.add_argument("scenario", help="scenario file or shipped name (paper_fig1, ...)")
    p.add_argument("--out", help="CSV output path")
    p.add_argument("--hours", type=float, help="override t_final, hours")
    p.add_argument("--no-governor", action="store_true", help="ignore the [governor] section")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("grid", help="convergence study over a mesh of (a, e) initial states")
    p.add_argument("scenario")
    p.add_argument("--a-range", nargs=3, type=float, metavar=("START", "STOP", "STEP"),
                   help="semi-major axis mesh, km")
    p.add_argument("--e-range", nargs=3, type=float, metavar=("START", "STOP", "STEP"))
    p.add_argument("--horizon", type=float, default=40.0, help="hours (default 40)")
    p.add_argument("--workers", type=int, help="worker processes (default: CPU count)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("c0-sweep", help="terminal-set level along the initial-to-target segment")
    p.add_argument("scenario")
    p.add_argument("--points", type=int, default=21)
    p.add_argument("--out")
    p.set_defaults(func=cmd_c0_sweep)

    p = sub.add_parser("governor", help="governor-free baseline versus governed runs")
    p.add_argument("scenario")
    p.add_argument("--horizons", nargs="*", type=float, help="prediction horizons, hours")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_governor)

    p = sub.add_parser("validate", help="parse and check a scenario file")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InfeasibleInitialState, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GveBarrierError, ValueError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
