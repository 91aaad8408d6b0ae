"""Command-line entry point: ``curvyplan run | bench | validate``.

Exit codes: 0 pass, 1 usage or config error, 2 scenario failure.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .maneuver import LaneChangeProblem, PlanningContext, grid_oracle
from .optimizer import SwarmConfig, iterations_to, optimize
from .sim import TRACE_COLUMNS, Metrics, SimTrace, extract_metrics, run_scenario

EXIT_OK, EXIT_CONFIG, EXIT_FAIL = 0, 1, 2
SAFETY_DISTANCE = 2.0
BENCH_TOL = 0.01


@dataclass
class RunReport:
    name: str
    passed: bool
    metrics: Optional[Metrics]
    paths: Dict[str, str] = field(default_factory=dict)
    failure_reason: str = ""

    def __post_init__(self):
        if not self.passed and not self.failure_reason:
            raise ValueError("a failed run needs a failure reason")


def judge(trace: SimTrace, metrics: Metrics, cfg: RunConfig) -> str:
    """Empty string when the run passes, else the first failure found."""
    if trace.status != "ok":
        return f"{trace.status}: {trace.failure_reason}"
    lim = cfg.planner.limits
    if metrics.min_distance <= SAFETY_DISTANCE:
        return f"min distance {metrics.min_distance:.3f} m not above {SAFETY_DISTANCE} m"
    checks = (
        ("a_y", metrics.max_abs_a_y, lim.ay_max),
        ("beta", metrics.max_abs_beta, lim.beta_max),
        ("delta", metrics.max_abs_delta_man, lim.delta_max),
        ("yaw rate ratio", metrics.max_yaw_ratio, 1.0),
    )
    for name, val, cap in checks:
        if val > cap:
            return f"{name} limit exceeded: {val:.6g} > {cap:.6g}"
    return ""


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ("nan" if math.isnan(v) else repr(v))
    return str(v)


def write_trace_csv(trace: SimTrace, path: Path, meta: bool = True):
    with open(path, "w", newline="") as fh:
        if meta:
            fh.write(f"# curvyplan {__version__} {trace.name} written {_dt.datetime.now().isoformat()}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for row in trace.rows:
            w.writerow([_fmt(row[c]) for c in TRACE_COLUMNS])


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    return obj


def cmd_run(config, seed: Optional[int] = None, out: Optional[str] = None, meta: bool = True) -> RunReport:
    cfg = load_config(config) if not isinstance(config, RunConfig) else config
    seed = cfg.seed if seed is None else seed
    trace = run_scenario(cfg.scenario, cfg.params, cfg.planner, seed)
    metrics = extract_metrics(trace)
    reason = judge(trace, metrics, cfg)
    report = RunReport(cfg.name, not reason, metrics, failure_reason=reason)
    if out is not None:
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        tpath, mpath = out_dir / "trace.csv", out_dir / "metrics.json"
        write_trace_csv(trace, tpath, meta)
        doc = {"scenario": cfg.name, "seed": seed, "passed": report.passed,
               "failure_reason": reason, "metrics": _json_safe(metrics.as_dict())}
        if meta:
            doc["meta"] = {"version": __version__, "written": _dt.datetime.now().isoformat()}
        mpath.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        report.paths = {"trace": str(tpath), "metrics": str(mpath)}
    return report


# ---- benchmark --------------------------------------------------------------


def case_context(config="case1") -> PlanningContext:
    """The planning problem solved at a scenario's trigger step."""
    cfg = load_config(config) if not isinstance(config, RunConfig) else config
    trace = run_scenario(cfg.scenario, cfg.params, cfg.planner, cfg.seed)
    if trace.maneuver is None or trace.maneuver.context is None:
        raise RuntimeError(f"{cfg.name}: no lane change was planned ({trace.status})")
    return trace.maneuver.context


@dataclass
class BenchRun:
    algorithm: str
    seed: int
    iterations_to_tol: int
    iterations: int
    wall_ms: float
    final_cost: float


def run_bench(ctx: PlanningContext, seeds: Sequence[int], n_particles: int = 40, T: int = 100,
              oracle_cost: Optional[float] = None):
    """IPSO and PSO on one planning problem; returns (runs, oracle_cost).

    Iterations-to-tolerance counts iterations until the global best is within
    ``BENCH_TOL`` relative of the grid-search optimum.
    """
    if oracle_cost is None:
        _, oracle_cost = grid_oracle(ctx)
    target = oracle_cost * (1.0 + BENCH_TOL)
    problem = LaneChangeProblem(ctx)
    # compile and warm caches before timing
    problem.evaluate(ctx.bounds.mean(axis=1)[None, :])
    runs = []
    for mode in ("ipso", "pso"):
        for s in seeds:
            res = optimize(problem, SwarmConfig(bounds=ctx.bounds, n_particles=n_particles, T=T, seed=s, mode=mode))
            runs.append(BenchRun(mode, s, iterations_to(res.history, target), res.iterations,
                                 1e3 * res.wall_time, res.objective))
    return runs, oracle_cost


def summarize_bench(runs: List[BenchRun]) -> List[dict]:
    rows = []
    for mode in ("ipso", "pso"):
        sel = [r for r in runs if r.algorithm == mode]
        rows.append({
            "algorithm": mode,
            "median_iterations_to_tol": float(np.median([r.iterations_to_tol for r in sel])),
            "median_wall_ms": float(np.median([r.wall_ms for r in sel])),
            "final_cost": float(np.median([r.final_cost for r in sel])),
        })
    return rows


def cmd_bench(seeds: int = 30, out: Optional[str] = None, config="case1"):
    if seeds < 1:
        raise ValueError("--seeds must be >= 1")
    ctx = case_context(config)
    runs, oracle = run_bench(ctx, range(seeds))
    summary = summarize_bench(runs)
    if out is not None:
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "bench.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["algorithm", "median_iterations_to_tol", "median_wall_ms", "final_cost"])
            for r in summary:
                w.writerow([r["algorithm"], r["median_iterations_to_tol"], f"{r['median_wall_ms']:.3f}",
                            repr(r["final_cost"])])
            w.writerow(["grid_oracle", "", "", repr(oracle)])
        with open(out_dir / "bench_runs.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["algorithm", "seed", "iterations_to_tol", "iterations", "wall_ms", "final_cost"])
            for r in runs:
                w.writerow([r.algorithm, r.seed, r.iterations_to_tol, r.iterations, f"{r.wall_ms:.3f}",
                            repr(r.final_cost)])
    return summary, oracle, runs


def cmd_validate(config) -> str:
    return "OK " + load_config(config).summary()


# ---- argparse ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="curvyplan", description="Lane-change planning on curved roads.")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="simulate a scenario config")
    r.add_argument("config", help="config path, or a bundled name: case1, case2, wide-road")
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--out", default="out")
    r.add_argument("--no-meta", action="store_true", help="omit timestamps so outputs compare byte for byte")
    b = sub.add_parser("bench", help="compare IPSO and PSO on the Case-1 planning problem")
    b.add_argument("--seeds", type=int, default=30)
    b.add_argument("--out", default="out")
    v = sub.add_parser("validate", help="check a config without simulating")
    v.add_argument("config")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        if args.command == "run":
            if args.seed is not None and args.seed < 0:
                raise ConfigError("--seed", "must be >= 0")
            rep = cmd_run(args.config, args.seed, args.out, meta=not args.no_meta)
            m = rep.metrics
            print(f"{rep.name}: {'PASS' if rep.passed else 'FAIL'} trigger_step={m.trigger_step} "
                  f"lane_changes={m.lane_changes} min_distance={m.min_distance:.3f} m")
            if not rep.passed:
                print(f"reason: {rep.failure_reason}", file=sys.stderr)
            for k, p in rep.paths.items():
                print(f"{k}: {p}")
            return EXIT_OK if rep.passed else EXIT_FAIL
        if args.command == "bench":
            if args.seeds < 1:
                raise ConfigError("--seeds", "must be >= 1")
            summary, oracle, _ = cmd_bench(args.seeds, args.out)
            print(f"grid oracle cost {oracle:.6f}")
            for r in summary:
                print(f"{r['algorithm']:5s} median iterations to {BENCH_TOL:.0%}: {r['median_iterations_to_tol']:g}  "
                      f"median wall {r['median_wall_ms']:.2f} ms  final cost {r['final_cost']:.6f}")
            print(f"table: {Path(args.out) / 'bench.csv'}")
            return EXIT_OK
        print(cmd_validate(args.config))
        return EXIT_OK
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
