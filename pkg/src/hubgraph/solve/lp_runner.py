"""Command-line shim: solve an MPS file with an installed LP library.

Usage: python -m hubgraph.solve.lp_runner MODEL.mps SOLUTION [--method M]

Methods are HiGHS through scipy (``highs``, ``highs-ds``, ``highs-ipm``) and
the Clarabel interior-point solver (``clarabel``).  ``auto`` picks HiGHS for
small models and Clarabel once the matrix has more than AUTO_NNZ nonzeros,
where HiGHS on a single core gets slow.  Writes the basic solution dialect
understood by ``solve_external``.
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np
import scipy.sparse as sp

from ..mps import parse_mps

METHODS = ("auto", "highs", "highs-ds", "highs-ipm", "clarabel")
AUTO_NNZ = 250_000

_HIGHS_STATUS = {0: "optimal", 1: "iteration-limit", 2: "infeasible", 3: "unbounded"}
_CLARABEL_STATUS = {"Solved": "optimal", "AlmostSolved": "optimal", "PrimalInfeasible": "infeasible",
                    "AlmostPrimalInfeasible": "infeasible", "DualInfeasible": "unbounded",
                    "AlmostDualInfeasible": "unbounded", "MaxIterations": "iteration-limit",
                    "MaxTime": "iteration-limit"}


class RunResult:
    def __init__(self, status, x, message):
        self.status = status
        self.x = x
        self.message = message


def solve_highs(lp, method: str, tol: float, time_limit: float | None) -> RunResult:
    from scipy.optimize import linprog

    A = lp.A.tocsr()
    le = np.flatnonzero(lp.senses == "L")
    ge = np.flatnonzero(lp.senses == "G")
    eq = np.flatnonzero(lp.senses == "E")
    A_ub = sp.vstack([A[le], -A[ge]]).tocsr() if (le.size or ge.size) else None
    b_ub = np.concatenate([lp.rhs[le], -lp.rhs[ge]]) if A_ub is not None else None
    A_eq = A[eq] if eq.size else None
    b_eq = lp.rhs[eq] if eq.size else None
    options = {"primal_feasibility_tolerance": tol, "dual_feasibility_tolerance": tol, "presolve": True}
    if method == "highs-ipm":
        options["ipm_optimality_tolerance"] = 1e-10
    if time_limit:
        options["time_limit"] = time_limit
    res = linprog(lp.c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                  bounds=np.column_stack([lp.lb, lp.ub]), method=method, options=options)
    return RunResult(_HIGHS_STATUS.get(res.status), res.x, res.message)


def solve_clarabel(lp, tol: float, time_limit: float | None) -> RunResult:
    import clarabel

    # rows of M x + s = b with s in {0} for equalities and s >= 0 otherwise
    A = lp.A.tocsr()
    n = lp.n_cols
    eq, le, ge = (lp.senses == s for s in "ELG")
    has_lb, has_ub = np.isfinite(lp.lb), np.isfinite(lp.ub)
    eye = sp.identity(n, format="csr")
    M = sp.vstack([A[eq], A[le], -A[ge], -eye[has_lb], eye[has_ub]]).tocsc()
    b = np.concatenate([lp.rhs[eq], lp.rhs[le], -lp.rhs[ge], -lp.lb[has_lb], lp.ub[has_ub]])
    n_ineq = int(le.sum() + ge.sum() + has_lb.sum() + has_ub.sum())
    cones = [clarabel.ZeroConeT(int(eq.sum())), clarabel.NonnegativeConeT(n_ineq)]
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_gap_abs = settings.tol_gap_rel = settings.tol_feas = tol
    if time_limit:
        settings.time_limit = time_limit
    sol = clarabel.DefaultSolver(sp.csc_matrix((n, n)), np.asarray(lp.c, float), M, b, cones, settings).solve()
    status = _CLARABEL_STATUS.get(str(sol.status))
    return RunResult(status, np.array(sol.x), f"Clarabel: {sol.status}")


def solve_mps_text(text: str, method: str = "auto", tol: float = 1e-9, time_limit: float | None = None):
    lp = parse_mps(text)
    if method == "auto":
        method = "clarabel" if lp.nnz > AUTO_NNZ else "highs"
    if method == "clarabel":
        return lp, solve_clarabel(lp, tol, time_limit)
    return lp, solve_highs(lp, method, tol, time_limit)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="lp_runner")
    ap.add_argument("mps")
    ap.add_argument("solution")
    ap.add_argument("--method", default="auto", choices=METHODS)
    ap.add_argument("--tol", type=float, default=1e-9)
    ap.add_argument("--time-limit", type=float, default=None)
    args = ap.parse_args(argv)
    t0 = time.perf_counter()
    with open(args.mps) as fh:
        text = fh.read()
    lp, res = solve_mps_text(text, args.method, args.tol, args.time_limit)
    if res.status is None:
        print(f"solver failed: {res.message}", file=sys.stderr)
        return 1
    lines = [f"status {res.status}"]
    if res.x is not None and res.status in ("optimal", "iteration-limit"):
        lines.append(f"objective {float(lp.c @ res.x) + lp.obj_const!r}")
        lines.extend(f"{lab[1]} {float(v)!r}" for lab, v in zip(lp.col_labels, res.x))
    with open(args.solution, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"{res.status} in {time.perf_counter() - t0:.1f} s: {res.message}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
