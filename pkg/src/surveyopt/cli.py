"""Batch command line driver.

Subcommands plan, baseline, compare, sweep and evaluate read a scenario
file, run the requested computation and drop the artifacts into an output
directory.  summary/compare/sweep files are deterministic for a given
scenario and seed; the manifest carries the invocation record.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime
import math
import sys
from pathlib import Path

import numpy as np
import yaml

from . import _kernels
from .baseline import BaselinePlan, plan_boustrophedon
from .dynamics import read_trajectories, write_trajectories
from .qmc import generate_qmc_points
from .risk import coverage_grid, residual_risk, shift_estimates, write_coverage
from .scenario import (RiskMode, Scenario, ScenarioError, file_sha256,
                       load_scenario)
from .solver import SolveResult, solve, sweep_vehicles

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2


def _apply_overrides(s: Scenario, args) -> Scenario:
    if getattr(args, "vehicles", None) not in (None, []):
        ks = args.vehicles
        if len(ks) == 1:
            s = s.with_vehicles(ks[0])
    if getattr(args, "seed", None) is not None:
        s = dataclasses.replace(s, qmc=dataclasses.replace(s.qmc, seed=args.seed))
    if getattr(args, "risk", None) is not None:
        s = dataclasses.replace(s, beta=args.risk)
    if getattr(args, "risk_mode", None) is not None:
        s = dataclasses.replace(s, risk_mode=RiskMode(args.risk_mode))
    if getattr(args, "nodes", None) is not None:
        s = dataclasses.replace(
            s, solver=dataclasses.replace(s.solver, n_nodes=args.nodes))
    return s


def _float(x) -> float:
    return float(np.asarray(x).item())


def _write_yaml(path: Path, data) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(data, fh, sort_keys=True, default_flow_style=False)


def _manifest(out: Path, scenario_path: str, artifacts: list) -> None:
    data = {
        "command": " ".join(sys.argv),
        "scenario": str(scenario_path),
        "scenario_sha256": file_sha256(scenario_path),
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "artifacts": sorted(str(a) for a in artifacts),
        "kernel_backend": _kernels.backend_name,
    }
    _write_yaml(out / "manifest.yaml", data)


def _result_summary(s: Scenario, scenario_path, res: SolveResult) -> dict:
    return {
        "scenario_sha256": file_sha256(scenario_path),
        "vehicles": s.n_vehicles,
        "risk_mode": s.risk_mode.value,
        "risk_threshold": _float(s.beta),
        "qmc": {k: (int(v) if isinstance(v, (int, np.integer)) else v)
                for k, v in res.qmc_metadata.items()},
        "duration_s": _float(res.t_final),
        "risk": _float(res.risk),
        "risk_violation": _float(res.report.risk_violation),
        "terminal_violations_m": [_float(v)
                                  for v in res.report.terminal_violations],
        "converged": bool(res.converged),
        "outer_iterations": int(res.n_outer),
        "merit_evaluations": int(res.n_evals),
        "history": [[{k: (_float(v) if isinstance(v, float) else v)
                      for k, v in h.items()} for h in hist]
                    for hist in res.history],
    }


def _baseline_summary(s: Scenario, scenario_path, plan: BaselinePlan) -> dict:
    return {
        "scenario_sha256": file_sha256(scenario_path),
        "vehicles": 1,
        "risk_mode": s.risk_mode.value,
        "risk_threshold": _float(s.beta),
        "duration_s": _float(plan.path_time),
        "risk": _float(plan.risk),
        "legs": int(plan.n_legs),
        "spacing_m": _float(plan.spacing),
        "swath_halfwidth_m": _float(plan.swath_halfwidth),
        "overhang_m": _float(plan.overhang),
        "risk_after_leg": [_float(r) for r in plan.risk_after_leg],
    }


def _write_solution(out: Path, s: Scenario, scenario_path, res: SolveResult,
                    grid: int) -> list:
    arts = []
    tpath = out / "trajectories.csv"
    write_trajectories(tpath, res.trajectories)
    arts.append(tpath)
    cpath = out / "coverage.csv"
    cov = coverage_grid(res.trajectories, grid, grid, s.sensor,
                        domain=s.domain)
    write_coverage(cpath, *cov)
    arts.append(cpath)
    spath = out / "summary.yaml"
    _write_yaml(spath, _result_summary(s, scenario_path, res))
    arts.append(spath)
    return arts


def _print_solution(s: Scenario, res: SolveResult) -> None:
    print(f"vehicles            {s.n_vehicles}")
    print(f"duration [s]        {res.t_final:.2f}")
    print(f"residual risk       {res.risk:.6f} (threshold {s.beta})")
    print(f"max terminal [m]    {max(res.report.terminal_violations):.4f}")
    print(f"converged           {res.converged}")
    print(f"merit evaluations   {res.n_evals}")


def cmd_plan(args) -> int:
    s = _apply_overrides(load_scenario(args.scenario), args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    res = solve(s)
    arts = _write_solution(out, s, args.scenario, res, args.grid)
    _manifest(out, args.scenario, arts + [out / "manifest.yaml"])
    _print_solution(s, res)
    return EXIT_OK if res.converged else EXIT_INFEASIBLE


def cmd_baseline(args) -> int:
    s = _apply_overrides(load_scenario(args.scenario), args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pts = generate_qmc_points(s.qmc, s.domain)
    spacing = None if args.spacing in (None, "auto") else float(args.spacing)
    plan = plan_boustrophedon(s, pts, spacing=spacing)
    arts = []
    tpath = out / "baseline_trajectories.csv"
    write_trajectories(tpath, [plan.trajectory])
    arts.append(tpath)
    spath = out / "baseline_summary.yaml"
    _write_yaml(spath, _baseline_summary(s, args.scenario, plan))
    arts.append(spath)
    _manifest(out, args.scenario, arts + [out / "manifest.yaml"])
    print(f"legs                {plan.n_legs}")
    print(f"duration [s]        {plan.path_time:.2f}")
    print(f"residual risk       {plan.risk:.6f} (threshold {s.beta})")
    return EXIT_OK


def cmd_compare(args) -> int:
    s = _apply_overrides(load_scenario(args.scenario), args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pts = generate_qmc_points(s.qmc, s.domain)
    plan = plan_boustrophedon(s, pts)
    res = solve(s, pts=pts)
    arts = _write_solution(out, s, args.scenario, res, args.grid)
    tpath = out / "baseline_trajectories.csv"
    write_trajectories(tpath, [plan.trajectory])
    arts.append(tpath)
    speedup = plan.path_time / res.t_final if res.t_final > 0 else math.inf
    comp = {
        "scenario_sha256": file_sha256(args.scenario),
        "baseline": _baseline_summary(s, args.scenario, plan),
        "optimized": _result_summary(s, args.scenario, res),
        "speedup": _float(speedup),
    }
    cpath = out / "compare.yaml"
    _write_yaml(cpath, comp)
    arts.append(cpath)
    _manifest(out, args.scenario, arts + [out / "manifest.yaml"])
    print(f"baseline [s]        {plan.path_time:.2f}  risk {plan.risk:.6f}")
    print(f"optimized [s]       {res.t_final:.2f}  risk {res.risk:.6f}")
    print(f"speedup             {speedup:.3f}")
    return EXIT_OK if res.converged else EXIT_INFEASIBLE


def cmd_sweep(args) -> int:
    s = _apply_overrides(load_scenario(args.scenario), args)
    ks = args.vehicles or [1, 2, 3]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    results = sweep_vehicles(s, ks)
    rows = []
    arts = []
    for k, res in zip(ks, results):
        tpath = out / f"trajectories_k{k}.csv"
        write_trajectories(tpath, res.trajectories)
        arts.append(tpath)
        rows.append({
            "vehicles": int(k),
            "duration_s": _float(res.t_final),
            "risk": _float(res.risk),
            "converged": bool(res.converged),
        })
    data = {
        "scenario_sha256": file_sha256(args.scenario),
        "risk_mode": s.risk_mode.value,
        "results": rows,
    }
    spath = out / "sweep.yaml"
    _write_yaml(spath, data)
    arts.append(spath)
    _manifest(out, args.scenario, arts + [out / "manifest.yaml"])
    print("vehicles  duration [s]      risk  converged")
    for r in rows:
        print(f"{r['vehicles']:8d}  {r['duration_s']:12.2f}  {r['risk']:.6f}"
              f"  {r['converged']}")
    return EXIT_OK if all(r["converged"] for r in rows) else EXIT_INFEASIBLE


def cmd_evaluate(args) -> int:
    s = _apply_overrides(load_scenario(args.scenario), args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trajs = read_trajectories(args.trajectories)
    pts = generate_qmc_points(s.qmc, s.domain)
    risk = residual_risk(trajs, pts, s.sensor, s.risk_mode)
    per_shift = shift_estimates(trajs, pts, s.sensor, s.risk_mode)
    cov = coverage_grid(trajs, args.grid, args.grid, s.sensor, domain=s.domain)
    cpath = out / "coverage.csv"
    write_coverage(cpath, *cov)
    data = {
        "scenario_sha256": file_sha256(args.scenario),
        "trajectories": str(args.trajectories),
        "vehicles": len(trajs),
        "risk_mode": s.risk_mode.value,
        "risk": _float(risk),
        "risk_per_shift": [_float(r) for r in per_shift],
        "risk_threshold": _float(s.beta),
        "feasible": bool(risk <= s.beta),
    }
    spath = out / "evaluation.yaml"
    _write_yaml(spath, data)
    _manifest(out, args.scenario, [cpath, spath, out / "manifest.yaml"])
    print(f"residual risk       {risk:.6f} (threshold {s.beta})")
    print(f"feasible            {risk <= s.beta}")
    return EXIT_OK


def _int_list(text: str) -> list:
    return [int(x) for x in text.split(",") if x]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="surveyopt",
        description="Minimum-duration survey planning under a residual "
                    "detection-risk constraint.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, vehicles_list=False):
        p.add_argument("--scenario", required=True, help="scenario YAML file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the qMC seed")
        p.add_argument("--risk", type=float, default=None,
                       help="override the risk threshold")
        p.add_argument("--risk-mode", choices=[m.value for m in RiskMode],
                       default=None, help="override the risk aggregation")
        p.add_argument("--nodes", type=int, default=None,
                       help="override the rudder node count")
        p.add_argument("--grid", type=int, default=160,
                       help="coverage grid resolution")
        if vehicles_list:
            p.add_argument("--vehicles", type=_int_list, default=None,
                           help="comma-separated fleet sizes")
        else:
            p.add_argument("--vehicles", type=_int_list, default=None,
                           help="fleet size")

    p = sub.add_parser("plan", help="optimize a survey")
    common(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("baseline", help="boustrophedon reference plan")
    common(p)
    p.add_argument("--spacing", default="auto",
                   help="track spacing in meters, or 'auto'")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("compare", help="baseline and optimized side by side")
    common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="optimize across fleet sizes")
    common(p, vehicles_list=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("evaluate", help="re-evaluate stored trajectories")
    common(p)
    p.add_argument("--trajectories", required=True,
                   help="trajectory CSV to evaluate")
    p.set_defaults(func=cmd_evaluate)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except RuntimeError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
