"""Command-line entry point: validate, compile, solve, scenario, report.

Exit codes: 0 success, 1 model diagnostics, 2 solver failure, 3 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .assemble import SparseLP, Solution, assemble_lp
from .dsl import DslError, load_model
from .mps import emit_mps, emit_name_map
from .params import ParamError
from .solve import (ENV_COMMAND, ExternalSolverConfig, ExternalSolverError, SimplexConfig, SimplexError,
                    check_feasibility, solve_external, solve_simplex)
from .solve.external import DEFAULT_COMMAND

EXIT_OK, EXIT_DIAGNOSTICS, EXIT_SOLVER, EXIT_USAGE = 0, 1, 2, 3
MANIFEST = "manifest.json"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# -- helpers -------------------------------------------------------------------

def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(outdir: Path, command: list[str], inputs: list[Path], outputs: list[Path],
                   extra: dict, wall_time: float) -> Path:
    """Run record.  ``content_hash`` covers everything except the wall time."""
    body = {
        "command": command,
        "inputs": {str(p): _sha256(p) for p in inputs if p.is_file()},
        "outputs": {p.name: _sha256(p) for p in sorted(outputs) if p.is_file()},
        "versions": {"hubgraph": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        **extra,
    }
    canonical = json.dumps(body, sort_keys=True, separators=(",", ":"))
    doc = dict(body, content_hash=hashlib.sha256(canonical.encode()).hexdigest(), wall_time_s=round(wall_time, 3))
    path = outdir / MANIFEST
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def write_solution(path: Path, lp: SparseLP, sol: Solution):
    lines = ["node,variable,t,value"]
    for lab, v in zip(lp.col_labels, sol.x):
        node, var, t = lab
        lines.append(f"{node},{var},{'' if t is None else t},{float(v)!r}")
    path.write_text("\n".join(lines) + "\n")


def _solver_config(args) -> ExternalSolverConfig:
    return ExternalSolverConfig(command=args.solver_cmd or DEFAULT_COMMAND)


def _solve(lp: SparseLP, args, workdir: Path) -> tuple[Solution, str]:
    from .case.scenarios import pick_solver
    choice = pick_solver(lp, args.solver)
    if choice == "embedded":
        return solve_simplex(lp, SimplexConfig(feas_tol=args.tol_feas, opt_tol=args.tol_opt)), choice
    return solve_external(lp, _solver_config(args), workdir / "solver"), choice


def _print_diagnostics(exc: DslError):
    for d in exc.diagnostics:
        print(d.format(exc.path), file=sys.stderr)
    n = len(exc.errors)
    print(f"{n} error{'s' if n != 1 else ''}", file=sys.stderr)


def exit_code_for(exc: BaseException) -> int | None:
    """Exit code of a user-facing failure, or None for a genuine bug."""
    from .case.scenarios import ScenarioError
    if isinstance(exc, UsageError):
        return EXIT_USAGE
    if isinstance(exc, DslError):
        return EXIT_DIAGNOSTICS
    if isinstance(exc, ScenarioError):
        cause = exc.__cause__
        if isinstance(cause, (SimplexError, ExternalSolverError)) or cause is None:
            return EXIT_SOLVER
        return exit_code_for(cause) or EXIT_SOLVER
    if isinstance(exc, (SimplexError, ExternalSolverError)):
        return EXIT_SOLVER
    if isinstance(exc, (ParamError, ValueError, KeyError)):
        return EXIT_DIAGNOSTICS
    if isinstance(exc, OSError):
        return EXIT_USAGE
    return None


# -- subcommands -------------------------------------------------------------------

def cmd_validate(args) -> int:
    m = load_model(args.model, args.scenario)
    for d in m.diagnostics:
        print(d.format(str(args.model)))
    g = m.graph
    print(f"{args.model}: {len(g.nodes)} nodes, {len(g.hyperedges)} hyperedges, T={g.horizon.T}")
    print("0 errors")
    return EXIT_OK


def cmd_compile(args) -> int:
    t0 = time.perf_counter()
    m = load_model(args.model, args.scenario)
    lp = assemble_lp(m.graph)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.model).stem
    mps_path, names_path = out / f"{stem}.mps", out / f"{stem}.names.tsv"
    mps_path.write_text(emit_mps(lp))
    names_path.write_text(emit_name_map(lp))
    fp = lp.fingerprint()
    print(f"rows {lp.n_rows}  columns {lp.n_cols}  nonzeros {lp.nnz}")
    print(f"fingerprint {fp}")
    write_manifest(out, ["compile", str(args.model)] + (["--scenario", args.scenario] if args.scenario else []),
                   [Path(args.model)], [mps_path, names_path], {"fingerprint": fp}, time.perf_counter() - t0)
    return EXIT_OK


def cmd_solve(args) -> int:
    t0 = time.perf_counter()
    m = load_model(args.model, args.scenario)
    lp = assemble_lp(m.graph)
    if args.dry_run:
        print(f"rows {lp.n_rows}  columns {lp.n_cols}  nonzeros {lp.nnz}")
        senses = {s: int(np.sum(lp.senses == s)) for s in "ELG"}
        print(f"equalities {senses['E']}  <= rows {senses['L']}  >= rows {senses['G']}")
        print(f"fingerprint {lp.fingerprint()}")
        return EXIT_OK
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    sol, choice = _solve(lp, args, out)
    if not sol.optimal:
        print(f"solver ({choice}) returned status {sol.status}", file=sys.stderr)
        return EXIT_SOLVER
    report = check_feasibility(lp, sol.x, args.check_tol)
    sol_path = out / "solution.csv"
    write_solution(sol_path, lp, sol)
    costs = out / "objective.csv"
    costs.write_text("node,cost\n" + "".join(f"{k},{v!r}\n" for k, v in sol.contributions.items())
                     + f"total,{sol.objective!r}\n")
    print(f"status {sol.status}  objective {sol.objective:.10g}  solver {choice}")
    print(report.summary())
    write_manifest(out, ["solve", str(args.model)] + (["--scenario", args.scenario] if args.scenario else []),
                   [Path(args.model)], [sol_path, costs],
                   {"fingerprint": lp.fingerprint(), "solver": choice, "status": sol.status,
                    "objective": sol.objective, "feasible": report.feasible}, time.perf_counter() - t0)
    return EXIT_OK if report.feasible else EXIT_SOLVER


def _run_one(name: str, opts: dict) -> dict:
    """Solve one scenario into its own directory (also used by worker processes)."""
    from .case.report import emit_report
    from .case.scenarios import get_scenario, run_scenario
    t0 = time.perf_counter()
    out = Path(opts["output"]) / Path(name).stem
    out.mkdir(parents=True, exist_ok=True)
    spec = get_scenario(name)
    res = run_scenario(spec, opts["solver"], opts["horizon"], tol_feas=opts["tol_feas"], tol_opt=opts["tol_opt"],
                       check_tol=opts["check_tol"], solver_cmd=opts["solver_cmd"], workdir=out / "solver")
    sol_path = out / "solution.csv"
    write_solution(sol_path, res.lp, res.solution)
    summary = {"scenario": spec.name, "horizon": res.horizon.label, "T": res.horizon.T,
               "objective": res.solution.objective, "solver": res.solver, "feasible": res.feasibility.feasible,
               "max_row_residual": res.feasibility.max_row_residual}
    files = emit_report(res.breakdown, res.balance, out, "both", summary)
    inputs = [Path(name)] if Path(name).is_file() else []
    write_manifest(out, ["scenario", name, "--horizon", res.horizon.label], inputs, [sol_path, *files],
                   {"fingerprint": res.lp.fingerprint(), **summary}, time.perf_counter() - t0)
    return {"name": spec.name, "total": res.breakdown.total_per_mwh, "objective": res.solution.objective,
            "feasible": res.feasibility.feasible, "dir": str(out), "solver": res.solver}


def cmd_scenario(args) -> int:
    from .case.scenarios import SCENARIOS, get_scenario
    names = list(SCENARIOS) if args.names == ["all"] else args.names
    for n in names:
        try:
            get_scenario(n)  # fail fast on unknown names
        except ParamError as exc:
            raise UsageError(str(exc)) from None
    opts = {k: getattr(args, k) for k in ("output", "solver", "horizon", "tol_feas", "tol_opt", "check_tol",
                                          "solver_cmd")}
    results, failed = [], []
    if args.jobs > 1 and len(names) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = {n: pool.submit(_run_one, n, opts) for n in names}
            for n, f in futures.items():
                try:
                    results.append(f.result())
                except Exception as exc:
                    failed.append((n, exc))
    else:
        for n in names:
            try:
                results.append(_run_one(n, opts))
            except Exception as exc:
                failed.append((n, exc))
    for r in results:
        flag = "" if r["feasible"] else "  (feasibility check FAILED)"
        print(f"{r['name']:20s} {r['total']:10.3f} EUR/MWh  [{r['solver']}]  -> {r['dir']}{flag}")
    codes = []
    for n, exc in failed:
        code = exit_code_for(exc)
        if code is None:
            raise exc
        print(f"error: {exc}", file=sys.stderr)
        codes.append(code)
    if not all(r["feasible"] for r in results):
        codes.append(EXIT_SOLVER)
    return max(codes, default=EXIT_OK)


def cmd_report(args) -> int:
    """Compare the per-group costs of solved scenario directories."""
    from .case.report import SUMMARY_FILE, read_cost_breakdown
    rows = []
    groups: list[str] = []
    for d in args.dirs:
        p = Path(d) / SUMMARY_FILE
        if not p.is_file():
            raise UsageError(f"{d}: no {SUMMARY_FILE}; run the scenario subcommand first")
        b = read_cost_breakdown(p)
        g = b.by_group()
        groups += [k for k in g if k not in groups]
        rows.append((Path(d).name, b.total_per_mwh, g))
    header = ["scenario", "total"] + groups
    lines = [",".join(header)]
    for name, total, g in rows:
        lines.append(",".join([name, f"{total:.4f}"] + [f"{g.get(k, 0.0):.4f}" for k in groups]))
    text = "\n".join(lines) + "\n"
    if args.output:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        (out / "comparison.csv").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


# -- argument parsing ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="hubgraph", description="Hypergraph LP models of remote renewable supply chains.")
    ap.add_argument("--version", action="version", version=f"hubgraph {__version__}")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    def solver_flags(p):
        p.add_argument("--solver", choices=["auto", "embedded", "external"], default="auto")
        p.add_argument("--solver-cmd", default=None,
                       help=f"external command with {{mps}} and {{solution}} placeholders (env: {ENV_COMMAND})")
        p.add_argument("--tol-feas", type=float, default=1e-7)
        p.add_argument("--tol-opt", type=float, default=1e-7)
        p.add_argument("--check-tol", type=float, default=1e-6, help="tolerance of the feasibility audit")

    p = sub.add_parser("validate", help="parse and check a model file")
    p.add_argument("model")
    p.add_argument("--scenario", default=None)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("compile", help="write the LP as MPS plus a name map")
    p.add_argument("model")
    p.add_argument("-o", "--output", default="out")
    p.add_argument("--scenario", default=None)
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("solve", help="solve a model file")
    p.add_argument("model")
    p.add_argument("-o", "--output", default="out")
    p.add_argument("--scenario", default=None)
    p.add_argument("--dry-run", action="store_true", help="print problem dimensions without solving")
    solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("scenario", help="run bundled or YAML-defined scenarios of the hub case")
    p.add_argument("names", nargs="+", help="scenario names, YAML files, or 'all'")
    p.add_argument("-o", "--output", default="out")
    p.add_argument("--horizon", default=None, help="full, a year (2015-2019), START:T or an hour count")
    p.add_argument("--jobs", type=int, default=1)
    solver_flags(p)
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("report", help="compare solved scenario directories")
    p.add_argument("dirs", nargs="+")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("hubgraph: a subcommand is required (validate, compile, solve, scenario, report)")
        if getattr(args, "jobs", 1) < 1:
            raise UsageError("hubgraph: --jobs must be at least 1")
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except DslError as exc:
        _print_diagnostics(exc)
        return EXIT_DIAGNOSTICS
    except Exception as exc:
        code = exit_code_for(exc)
        if code is None:
            raise
        print(f"error: {exc}", file=sys.stderr)
        return code

if __name__ == "__main__":
    sys.exit(main())
