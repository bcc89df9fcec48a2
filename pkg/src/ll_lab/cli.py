"""Command-line surface: scenario batches, modulation tracking of saved
trajectories, the monotonicity and virial audits, and soliton tables.

Exit codes: 0 when every verdict passes, 1 for runtime failures (the report
is still written) or failing verdicts, 2 for malformed configs or missing
input files (nothing is written).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from struct import error as struct_error
from typing import Optional, Sequence

import numpy as np

from .dynamics import IntegratorConfig, Trajectory, evolve, load_trajectory
from .functionals import virial_U, virial_rate
from .grid import Grid, HydroState, x_norm
from .modulation import ModulationError, track_modulation, track_to_csv
from .scenarios import (
    ConfigError,
    RunReport,
    load_scenario,
    random_smooth_pair,
    run_scenario,
    write_report,
)
from .solitons import MultiSolitonConfig, SolitonParams, soliton_hydro, soliton_spin

_FMT = "%.17g"


def _fail_config(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 2


def _thread_cap(n_jobs: int) -> int:
    raw = os.environ.get("LL_LAB_THREADS")
    cap = os.cpu_count() or 1
    if raw is not None:
        try:
            cap = max(1, int(raw))
        except ValueError:
            print(f"warning: ignoring non-integer LL_LAB_THREADS={raw!r}",
                  file=sys.stderr)
            cap = 1
    return max(1, min(n_jobs, cap))


def _print_report(report: RunReport) -> None:
    n_pass = sum(1 for v in report.verdicts if v.passed)
    status = "PASS" if report.all_passed else ("ERROR" if report.error else "FAIL")
    line = (f"{report.config.name}: {status} "
            f"({n_pass}/{len(report.verdicts)} verdicts, "
            f"{report.timings.get('total', 0.0):.1f}s)")
    if report.error:
        line += f"  [{report.error}]"
    print(line)


def _cmd_simulate(args: argparse.Namespace) -> int:
    try:
        configs = [load_scenario(p) for p in args.configs]
    except ConfigError as exc:
        return _fail_config(str(exc))
    names = [c.name for c in configs]
    if len(set(names)) != len(names):
        dup = sorted({n for n in names if names.count(n) > 1})
        return _fail_config(f"duplicate scenario names in batch: {', '.join(dup)}")

    workers = _thread_cap(len(configs))
    reports: list[Optional[RunReport]] = [None] * len(configs)

    def job(i: int) -> None:
        try:
            reports[i] = run_scenario(configs[i])
        except Exception as exc:  # noqa: BLE001 -- report, do not crash the batch
            reports[i] = RunReport(config=configs[i], samples=(), track=None,
                                   verdicts=(), timings={}, error=f"{exc}")

    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(job, range(len(configs))))

    exit_code = 0
    for report in reports:
        assert report is not None
        write_report(report, args.out)
        _print_report(report)
        if not report.all_passed:
            exit_code = 1
    return exit_code


def _cmd_monotonicity_audit(args: argparse.Namespace) -> int:
    try:
        cfg = load_scenario(args.config)
    except ConfigError as exc:
        return _fail_config(str(exc))
    if not cfg.diagnostics.y0_list:
        return _fail_config(f"{args.config}: diagnostics.y0_list must be non-empty "
                            "for a monotonicity audit")
    report = run_scenario(cfg)
    audited = tuple(v for v in report.verdicts
                    if v.name.startswith("monotonicity") or v.name == "rate_fd_match")
    report = replace(report, verdicts=audited)
    write_report(report, args.out)
    _print_report(report)
    return 0 if report.all_passed else 1


def _load_guess(path: str) -> MultiSolitonConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"{p}: no such guess file")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON at line {exc.lineno}, "
                          f"column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict) or set(data) != {"params", "min_separation"}:
        raise ConfigError(f"{p}: expected an object with keys params, min_separation")
    try:
        params = tuple(SolitonParams(float(e["c"]), float(e["a"]), int(e.get("s", 1)))
                       for e in data["params"])
        return MultiSolitonConfig(params, float(data["min_separation"]))
    except (TypeError, KeyError, ValueError) as exc:
        raise ConfigError(f"{p}: {exc}") from exc


def _cmd_modulate_track(args: argparse.Namespace) -> int:
    try:
        guess = _load_guess(args.guess)
        if not Path(args.trajectory).is_file():
            raise ConfigError(f"{args.trajectory}: no such trajectory file")
        try:
            traj = load_trajectory(args.trajectory)
        except (ValueError, struct_error) as exc:
            raise ConfigError(f"{args.trajectory}: {exc}") from exc
    except ConfigError as exc:
        return _fail_config(str(exc))

    out_dir = Path(args.out) / Path(args.trajectory).stem
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    error = None
    track = None
    try:
        track = track_modulation(traj, guess)
    except ModulationError as exc:
        error = str(exc)
        cut = getattr(exc, "snapshot_index", 0)
        if cut >= 1:
            partial = Trajectory(frame=traj.frame, grid=traj.grid,
                                 times=traj.times[:cut], states=traj.states[:cut])
            track = track_modulation(partial, guess)
    wall = time.perf_counter() - t0

    verdicts = []
    if track is not None:
        track_to_csv(track, out_dir / "modulation.csv")
        max_iters = int(np.max(track.newton_iters))
        max_ortho = float(np.max(track.orthogonality))
        verdicts = [{"name": "newton_iterations", "pass": max_iters <= 5,
                     "measured": max_iters, "threshold": 5},
                    {"name": "orthogonality", "pass": max_ortho <= 1e-9,
                     "measured": max_ortho, "threshold": 1e-9}]
    report = {"scenario": Path(args.trajectory).stem,
              "verdicts": verdicts,
              "timings": {"total": wall},
              "error": error}
    with open(out_dir / "report.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    ok = error is None and all(v["pass"] for v in verdicts)
    print(f"{report['scenario']}: {'PASS' if ok else 'FAIL'} "
          f"({len(traj)} snapshots, {wall:.1f}s)"
          + (f"  [{error}]" if error else ""))
    return 0 if ok else 1


def _cmd_virial_audit(args: argparse.Namespace) -> int:
    if args.amplitude <= 0.0:
        return _fail_config(f"--amplitude must be positive, got {args.amplitude}")
    if args.runs < 1:
        return _fail_config(f"--runs must be >= 1, got {args.runs}")
    if args.t_end <= 0.0:
        return _fail_config(f"--t-end must be positive, got {args.t_end}")

    grid = Grid(n=2048, dx=0.1, x_min=-102.4)
    integ = IntegratorConfig(dt=2e-3, t_end=args.t_end, sample_stride=50)
    out_dir = Path(args.out) / "virial-audit"
    out_dir.mkdir(parents=True, exist_ok=True)

    rows = []
    verdicts = []
    error = None
    t0 = time.perf_counter()
    for k in range(args.runs):
        dv, dw = random_smooth_pair(grid, args.amplitude, args.seed + k,
                                    max_mode=8, sigma=grid.period / 10.0)
        traj = evolve(HydroState.from_arrays(grid, dv, dw), integ)
        if traj.error is not None:
            error = f"run {k}: {traj.error}"
            break
        margin_min = math.inf
        for t, state in zip(traj.times, traj.states):
            rate = virial_rate(state)
            quarter = 0.25 * x_norm(state) ** 2
            margin = rate - quarter
            margin_min = min(margin_min, margin)
            rows.append((k, float(t), virial_U(state), rate, quarter, margin))
        verdicts.append({"name": f"coercivity_run{k}", "pass": margin_min >= 0.0,
                         "measured": margin_min, "threshold": 0.0})

    with open(out_dir / "virial.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run", "t", "U", "rate", "quarter_xnorm2", "margin"])
        for row in rows:
            writer.writerow([row[0]] + [_FMT % val for val in row[1:]])
    report = {"scenario": "virial-audit",
              "verdicts": verdicts,
              "timings": {"total": time.perf_counter() - t0},
              "error": error}
    with open(out_dir / "report.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")

    ok = error is None and all(v["pass"] for v in verdicts)
    worst = min((v["measured"] for v in verdicts), default=math.nan)
    print(f"virial-audit: {'PASS' if ok else 'FAIL'} "
          f"({args.runs} runs, min margin {worst:.3e})"
          + (f"  [{error}]" if error else ""))
    return 0 if ok else 1


def _cmd_soliton_table(args: argparse.Namespace) -> int:
    if not (0.0 < abs(args.c) < 1.0):
        return _fail_config(f"--c must lie in (-1, 1) excluding 0, got {args.c}")
    if args.xmax <= 0.0:
        return _fail_config(f"--xmax must be positive, got {args.xmax}")
    if args.dx <= 0.0 or args.dx > 2.0 * args.xmax:
        return _fail_config(f"--dx must lie in (0, 2*xmax], got {args.dx}")

    count = int(math.floor(2.0 * args.xmax / args.dx + 0.5)) + 1
    x = -args.xmax + args.dx * np.arange(count)
    u = soliton_spin(args.c, x)
    v, w = soliton_hydro(args.c, x)

    if args.out is None:
        fh = sys.stdout
        close = False
    else:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        fh = open(out_dir / "soliton_table.csv", "w", newline="")
        close = True
    try:
        writer = csv.writer(fh)
        writer.writerow(["x", "u1", "u2", "u3", "v", "w"])
        for i in range(count):
            writer.writerow([_FMT % val for val in
                             (x[i], u[i, 0], u[i, 1], u[i, 2], v[i], w[i])])
    finally:
        if close:
            fh.close()
            print(f"wrote {out_dir / 'soliton_table.csv'} ({count} rows)")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ll-lab",
        description="Dark multi-soliton laboratory for the easy-plane "
                    "Landau-Lifshitz equation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one or more scenario configs")
    p.add_argument("configs", nargs="+", metavar="config.json")
    p.add_argument("--out", default=".", help="output directory (default: .)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("modulate-track",
                       help="track modulation parameters of a saved trajectory")
    p.add_argument("trajectory", help="trajectory file written by save_trajectory")
    p.add_argument("guess", metavar="guess.json",
                   help="JSON with params [{c, a, s}] and min_separation")
    p.add_argument("--out", default=".", help="output directory (default: .)")
    p.set_defaults(func=_cmd_modulate_track)

    p = sub.add_parser("monotonicity-audit",
                       help="run a scenario and judge only the localized-momentum checks")
    p.add_argument("config", metavar="config.json")
    p.add_argument("--out", default=".", help="output directory (default: .)")
    p.set_defaults(func=_cmd_monotonicity_audit)

    p = sub.add_parser("virial-audit",
                       help="check U' >= 1/4 ||.||_X^2 along seeded small-data runs")
    p.add_argument("--amplitude", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--t-end", type=float, default=10.0, dest="t_end")
    p.add_argument("--out", default=".", help="output directory (default: .)")
    p.set_defaults(func=_cmd_virial_audit)

    p = sub.add_parser("soliton-table",
                       help="emit closed-form profile samples as CSV")
    p.add_argument("--c", type=float, required=True, help="wave speed in (-1, 1), not 0")
    p.add_argument("--xmax", type=float, required=True, help="half width of the table")
    p.add_argument("--dx", type=float, required=True, help="sample spacing")
    p.add_argument("--out", default=None,
                   help="output directory (default: write CSV to stdout)")
    p.set_defaults(func=_cmd_soliton_table)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
