"""Command-line front end: list, solve, verify, compare, sweep.

Exit codes: 0 success, 2 non-convergence or failed check, 3 input error,
4 numerical failure.  Configuration comes from flags only.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .bvp import Formulation, ShootingConfig
from .errors import ContractViolation, HybridJumpError, NotFound, ProblemFileError
from .gel import GelConfig, GelResult, absolute_error, solve_gel
from .integrate import IntegratorConfig
from .jump import compute_jump, hamiltonian_gap
from .oracle import OracleResult, SweepConfig, sweep
from .problem import SwitchedOCP
from .problem_file import load_problem_dir, resolve_problem
from .registry import registry_names, registry_spec
from .report import RunReport, dumps, fill_switch_fields, parameter_hash, trajectory_rows, write_table

EXIT_OK = 0
EXIT_NOT_CONVERGED = 2
EXIT_INPUT = 3
EXIT_NUMERICAL = 4

LAW_TOL = 5e-3
GAP_TOL = 1e-3


@dataclass
class RunOptions:
    """Solver overrides collected from flags; None keeps the problem's or library default."""

    solver: str = "gel"
    tau0: Optional[float] = None
    tol: Optional[float] = None
    delta_tau: Optional[float] = None
    alpha: Optional[float] = None
    formulation: Optional[str] = None
    integrator: Optional[str] = None
    segments: Optional[int] = None
    grid: Optional[str] = None
    workers: int = 1


def gel_config(spec: dict, opts: RunOptions) -> GelConfig:
    merged = dict(spec.get("solver", {}))
    for key in ("tau0", "tol", "delta_tau", "alpha", "formulation"):
        if getattr(opts, key) is not None:
            merged[key] = getattr(opts, key)
    return GelConfig(**merged)


def shooting_config(opts: RunOptions) -> ShootingConfig:
    cfg = ShootingConfig()
    if opts.segments is not None:
        cfg = dataclasses.replace(cfg, segments_per_phase=opts.segments)
    if opts.integrator is not None:
        cfg = dataclasses.replace(cfg, integrator=IntegratorConfig(method=opts.integrator))
    return cfg


def sweep_config(opts: RunOptions) -> SweepConfig:
    cfg = SweepConfig(workers=opts.workers)
    if opts.grid:
        parts = opts.grid.lower().split("x")
        try:
            counts = [int(v) for v in parts]
        except ValueError:
            raise ContractViolation(f"--grid expects TAU or TAUxSIGMA, got {opts.grid!r}") from None
        cfg = dataclasses.replace(cfg, tau_count=counts[0], sigma_count=counts[-1] if len(counts) > 1 else cfg.sigma_count)
    return cfg


def _settings(obj) -> dict:
    return dataclasses.asdict(obj) if dataclasses.is_dataclass(obj) else dict(obj)


def _new_report(name: str, spec: dict, solver: str) -> RunReport:
    return RunReport(problem=name, parameter_hash=parameter_hash(spec), solver=solver, status="", converged=False)


def run_gel(p: SwitchedOCP, spec: dict, opts: RunOptions) -> tuple[RunReport, Optional[GelResult], int]:
    report = _new_report(p.name, spec, "gel")
    cfg, shoot = gel_config(spec, opts), shooting_config(opts)
    report.settings = {"gel": _settings(cfg), "shooting": _settings(shoot)}
    start = time.perf_counter()
    try:
        res = solve_gel(p, cfg, shoot)
    except HybridJumpError as exc:
        report.timing = {"wall_s": time.perf_counter() - start}
        report.status = "inner-failure" if "inner" in type(exc).__name__.lower() else type(exc).__name__
        report.error = str(exc)
        trace = getattr(exc, "trace", None)
        if trace is not None and hasattr(trace, "records"):
            report.trace = [dataclasses.asdict(r) for r in trace.records]
        return report, None, EXIT_NUMERICAL
    report.timing = {"wall_s": time.perf_counter() - start}
    report.status = res.trace.stop_reason.value
    report.converged = res.converged
    report.tau_star, report.J_star = res.tau_star, res.J_star
    report.iterations = res.iterations
    report.trace = [dataclasses.asdict(r) for r in res.trace.records]
    fill_switch_fields(report, p, res.solution.switch_data(p))
    return report, res, EXIT_OK if res.converged else EXIT_NOT_CONVERGED


def run_oracle(p: SwitchedOCP, spec: dict, opts: RunOptions) -> tuple[RunReport, Optional[OracleResult], int]:
    report = _new_report(p.name, spec, "oracle")
    cfg = sweep_config(opts)
    report.settings = {"sweep": _settings(cfg)}
    start = time.perf_counter()
    try:
        res = sweep(p, cfg)
    except HybridJumpError as exc:
        report.timing = {"wall_s": time.perf_counter() - start}
        report.status = type(exc).__name__
        report.error = str(exc)
        return report, None, EXIT_NUMERICAL
    report.timing = {"wall_s": time.perf_counter() - start}
    report.status = "minimum" if res.interior_minimum else "boundary-minimum"
    report.converged = res.interior_minimum
    report.tau_star, report.J_star = res.tau_star, res.J_star
    report.sweep = {
        "cells": len(res.J_surface),
        "failures": len(res.failures),
        "final_tau_step": res.final_tau_step,
        "sigma_star": res.sigma_star,
        "interior_minimum": res.interior_minimum,
    }
    fill_switch_fields(report, p, res.switch_data(p))
    return report, res, EXIT_OK if res.interior_minimum else EXIT_NOT_CONVERGED


def _write_solution_files(out: Path, p: SwitchedOCP, report: RunReport, res) -> None:
    report.write(out / "report.json")
    if isinstance(res, GelResult):
        sol = res.solution
        phases = [(sol.phase1.times, sol.x(1), sol.lam(1)), (sol.phase2.times, sol.x(2), sol.lam(2))]
        header, rows = trajectory_rows(p, phases)
        write_table(out / "trajectory.csv", header, rows)
        rows = [(k, tau, absolute_error(tau, res.tau_star)) for k, tau in enumerate(res.trace.taus())]
        write_table(out / "error_series.csv", ["iteration", "tau", "abs_error"], rows)
    elif isinstance(res, OracleResult) and res.phase1 is not None and res.phase2 is not None:
        phases = [(ph.x.times, ph.x.values, ph.lam.values) for ph in (res.phase1, res.phase2)]
        header, rows = trajectory_rows(p, phases)
        write_table(out / "trajectory.csv", header, rows)


# ---------------------------------------------------------------- commands


def cmd_list(problems_dir=None) -> list[dict]:
    entries = [
        {"name": n, "description": registry_spec(n)["description"], "origin": registry_spec(n)["origin"], "source": "registry"}
        for n in registry_names()
    ]
    if problems_dir is not None:
        for name, spec in load_problem_dir(problems_dir).items():
            entries.append(
                {"name": name, "description": spec.get("description", ""), "origin": spec.get("origin", "user file"), "source": "file"}
            )
    return entries


def cmd_solve(problem: str, opts: RunOptions, out=None, problems_dir=None) -> tuple[RunReport, int]:
    spec, p = resolve_problem(problem, problems_dir)
    runner = run_gel if opts.solver == "gel" else run_oracle
    report, res, code = runner(p, spec, opts)
    if out is not None:
        _write_solution_files(Path(out), p, report, res)
    return report, code


def check_jump_law(p: SwitchedOCP, res: OracleResult, negate_mu: bool = False) -> dict:
    """Oracle minimizer against the jump law and Hamiltonian continuity.

    ``negate_mu`` corrupts the law by flipping the interface time partial,
    which only matters for moving interfaces.
    """
    d = res.switch_data(p)
    if negate_mu:
        d = dataclasses.replace(d, mu=-d.mu)
    law = compute_jump(d).delta_lambda
    law_err = float(np.max(np.abs(d.delta_lambda - law)))
    gap = abs(hamiltonian_gap(p, d))
    ok = law_err <= LAW_TOL and gap <= GAP_TOL
    return {
        "problem": p.name,
        "tau_star": res.tau_star,
        "J_star": res.J_star,
        "x_s": res.x_s_star.tolist(),
        "delta_lambda_empirical": d.delta_lambda.tolist(),
        "delta_lambda_law": law.tolist(),
        "law_error_inf": law_err,
        "law_tolerance": LAW_TOL,
        "hamiltonian_gap": gap,
        "gap_tolerance": GAP_TOL,
        "time_varying": p.time_varying,
        "negate_mu": negate_mu,
        "verdict": "PASS" if ok else "FAIL",
    }


def cmd_verify(problem: str, opts: RunOptions, problems_dir=None, negate_mu: bool = False) -> tuple[dict, int]:
    spec, p = resolve_problem(problem, problems_dir)
    report, res, code = run_oracle(p, spec, opts)
    if res is None:
        return {"problem": p.name, "verdict": "ERROR", "error": report.error}, code
    result = check_jump_law(p, res, negate_mu)
    return result, EXIT_OK if result["verdict"] == "PASS" else EXIT_NOT_CONVERGED


def cmd_compare(problem: str, opts: RunOptions, out=None, problems_dir=None) -> tuple[dict, int]:
    """GEL and oracle side by side, with published reference rows when available."""
    spec, p = resolve_problem(problem, problems_dir)
    gel_rep, gel_res, gel_code = run_gel(p, spec, dataclasses.replace(opts, solver="gel"))
    ora_rep, ora_res, ora_code = run_oracle(p, spec, dataclasses.replace(opts, solver="oracle"))
    rows = []
    for label, rep, code in (("GEL", gel_rep, gel_code), ("oracle", ora_rep, ora_code)):
        rows.append(
            {
                "method": label,
                "tau": rep.tau_star,
                "J": rep.J_star,
                "time_s": rep.timing.get("wall_s"),
                "iterations": rep.iterations,
                "status": rep.status if code == EXIT_OK else f"failed ({rep.status})",
            }
        )
    for ref in spec.get("reference", {}).get("rows", []):
        rows.append(dict(ref, method=f"{ref['method']} (published)", status="reference"))
    series = []
    if gel_res is not None and ora_res is not None:
        series = [(k, tau, absolute_error(tau, ora_res.tau_star)) for k, tau in enumerate(gel_res.trace.taus())]
    if out is not None:
        out = Path(out)
        gel_rep.write(out / "gel_report.json")
        ora_rep.write(out / "oracle_report.json")
        write_table(out / "error_series.csv", ["iteration", "tau", "abs_error"], series)
    result = {"problem": p.name, "rows": rows, "error_series": [list(s) for s in series]}
    return result, max(gel_code, ora_code)


def cmd_sweep(problem: str, opts: RunOptions, out=None, problems_dir=None) -> tuple[RunReport, int]:
    spec, p = resolve_problem(problem, problems_dir)
    report, res, code = run_oracle(p, spec, opts)
    if out is not None and res is not None:
        out = Path(out)
        report.write(out / "report.json")
        tab = res.J_surface
        header = ["round", "tau", "sigma"] + [f"x{i + 1}" for i in range(p.n)] + ["J"]
        rows = ([r, t, s, *x, J] for r, t, s, x, J in tab.rows())
        write_table(out / "j_surface.csv", header, rows)
    return report, code


# ---------------------------------------------------------------- output


def _fmt(v, spec=".6g") -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return format(v, spec)
    return str(v)


def format_report(report: RunReport) -> str:
    lines = [f"{report.problem} [{report.solver}] {report.status}"]
    if report.tau_star is not None:
        lines.append(f"  tau* = {report.tau_star:.6f}   J* = {report.J_star:.6g}")
        lines.append(f"  x_s  = {np.round(report.x_s, 6).tolist()}")
        lines.append(f"  dlam (observed) = {np.round(report.delta_lambda_empirical, 6).tolist()}")
        if report.delta_lambda_law is not None:
            lines.append(f"  dlam (law)      = {np.round(report.delta_lambda_law, 6).tolist()}")
        lines.append(f"  Hamiltonian gap = {report.hamiltonian_gap:.3e}")
    if report.iterations is not None:
        lines.append(f"  iterations = {report.iterations}")
    if report.fictitious_switch:
        lines.append("  fictitious switch: both modes coincide at the switch point")
    if report.error:
        lines.append(f"  error: {report.error}")
    return "\n".join(lines)


def format_compare(result: dict) -> str:
    head = f"{'method':<22}{'tau':>10}{'J':>14}{'time (s)':>12}{'iters':>7}  status"
    lines = [result["problem"], head, "-" * len(head)]
    for r in result["rows"]:
        lines.append(
            f"{r['method']:<22}{_fmt(r.get('tau'), '.4f'):>10}{_fmt(r.get('J'), '.6g'):>14}"
            f"{_fmt(r.get('time_s'), '.3f'):>12}{_fmt(r.get('iterations')):>7}  {r['status']}"
        )
    if result["error_series"]:
        lines.append("  |tau_k - tau_oracle|: " + ", ".join(f"{e:.2e}" for _, _, e in result["error_series"]))
    return "\n".join(lines)


# ---------------------------------------------------------------- entry point


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="print machine-readable output")
    common.add_argument("--problems-dir", type=Path, help="directory of *.toml problem files")

    run = argparse.ArgumentParser(add_help=False)
    run.add_argument("--solver", choices=["gel", "oracle"], default="gel")
    run.add_argument("--tau0", type=float)
    run.add_argument("--tol", type=float)
    run.add_argument("--delta-tau", type=float)
    run.add_argument("--alpha", type=float)
    run.add_argument("--formulation", choices=[f.value for f in Formulation])
    run.add_argument("--integrator", choices=["rk4", "rkf45"])
    run.add_argument("--segments", type=int)
    run.add_argument("--grid", help="oracle grid as TAU or TAUxSIGMA")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--out", type=Path, help="directory for reports and tables")

    parser = _Parser(prog="hybridjump", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)
    sub.add_parser("list", parents=[common], help="registered and file problems")
    for verb, text in (
        ("solve", "solve one problem"),
        ("verify", "check the jump law at the oracle minimizer"),
        ("compare", "GEL against the oracle and published rows"),
        ("sweep", "oracle grid search, exporting the cost surface"),
    ):
        sp = sub.add_parser(verb, parents=[common, run], help=text)
        sp.add_argument("problem", help="registry name, name in --problems-dir, or path to a .toml file" + (", or 'all'" if verb == "compare" else ""))
        if verb == "verify":
            sp.add_argument("--negate-mu", action="store_true", help=argparse.SUPPRESS)
    return parser


def _options(args) -> RunOptions:
    return RunOptions(
        solver=args.solver,
        tau0=args.tau0,
        tol=args.tol,
        delta_tau=args.delta_tau,
        alpha=args.alpha,
        formulation=args.formulation,
        integrator=args.integrator,
        segments=args.segments,
        grid=args.grid,
        workers=args.workers,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.verb == "list":
            entries = cmd_list(args.problems_dir)
            if args.json:
                print(dumps(entries), end="")
            else:
                for e in entries:
                    print(f"{e['name']:<24} {e['description']} ({e['origin']})")
            return EXIT_OK
        opts = _options(args)
        if args.verb == "solve":
            report, code = cmd_solve(args.problem, opts, args.out, args.problems_dir)
            print(report.to_json() if args.json else format_report(report), end="\n" if not args.json else "")
            return code
        if args.verb == "sweep":
            report, code = cmd_sweep(args.problem, dataclasses.replace(opts, solver="oracle"), args.out, args.problems_dir)
            print(report.to_json() if args.json else format_report(report), end="\n" if not args.json else "")
            return code
        if args.verb == "verify":
            result, code = cmd_verify(args.problem, opts, args.problems_dir, negate_mu=args.negate_mu)
            if args.json:
                print(dumps(result), end="")
            else:
                print(f"{result['problem']}: {result['verdict']}")
                if "law_error_inf" in result:
                    print(f"  |dlam_observed - dlam_law|_inf = {result['law_error_inf']:.3e} (<= {LAW_TOL:g})")
                    print(f"  |Hamiltonian gap|              = {result['hamiltonian_gap']:.3e} (<= {GAP_TOL:g})")
                else:
                    print(f"  error: {result['error']}")
            return code
        if args.verb == "compare":
            names = registry_names() if args.problem == "all" else [args.problem]
            worst, results = EXIT_OK, []
            for name in names:
                out = None if args.out is None else (args.out / name if len(names) > 1 else args.out)
                result, code = cmd_compare(name, opts, out, args.problems_dir)
                results.append(result)
                worst = max(worst, code)
                if not args.json:
                    print(format_compare(result))
            if args.json:
                print(dumps(results), end="")
            return worst
    except (ProblemFileError, NotFound, ContractViolation) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except HybridJumpError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
