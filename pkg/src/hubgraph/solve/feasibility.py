"""Stand-alone primal feasibility audit.

Deliberately shares nothing with the solvers: residuals are accumulated
straight from the triplets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Violation:
    kind: str          # "row" or "bound"
    index: int
    label: tuple
    residual: float

    def __str__(self):
        return f"{self.kind} {self.index} {self.label}: violated by {self.residual:.3g}"


@dataclass
class FeasibilityReport:
    tolerance: float
    violations: list = field(default_factory=list)
    max_row_residual: float = 0.0
    max_bound_residual: float = 0.0

    @property
    def feasible(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.feasible

    def rows(self) -> list[Violation]:
        return [v for v in self.violations if v.kind == "row"]

    def bounds(self) -> list[Violation]:
        return [v for v in self.violations if v.kind == "bound"]

    def summary(self) -> str:
        if self.feasible:
            return f"feasible at {self.tolerance:g}"
        return f"{len(self.violations)} violations at {self.tolerance:g}; worst " + str(
            max(self.violations, key=lambda v: v.residual))


def check_feasibility(lp, x, tol: float = 1e-6) -> FeasibilityReport:
    """List every row and bound violated beyond ``tol``.

    The tolerance is relative to the row magnitude ``max(1, |b|, max_j |a_ij x_j|)``
    so that rows in large units are not held to an absolute standard.
    Reported residuals are absolute.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (lp.n_cols,):
        raise ValueError(f"vector has length {x.size}, LP has {lp.n_cols} columns")
    m = lp.n_rows
    prod = lp.vals * x[lp.cols]
    lhs = np.zeros(m)
    np.add.at(lhs, lp.rows, prod)
    mag = np.zeros(m)
    np.maximum.at(mag, lp.rows, np.abs(prod))
    scale = np.maximum(np.maximum(1.0, np.abs(lp.rhs)), mag)

    gap = lhs - lp.rhs
    res = np.zeros(m)
    for code, vals in (("E", np.abs(gap)), ("L", np.maximum(gap, 0.0)), ("G", np.maximum(-gap, 0.0))):
        sel = lp.senses == code
        res[sel] = vals[sel]
    res[~np.isfinite(lhs)] = np.inf

    report = FeasibilityReport(tolerance=tol)
    report.max_row_residual = float(res.max()) if m else 0.0
    for i in np.flatnonzero(res > tol * scale):
        label = lp.row_labels[i] if i < len(lp.row_labels) else ("", f"r{i}", None)
        report.violations.append(Violation("row", int(i), tuple(label), float(res[i])))

    low = np.where(np.isfinite(lp.lb), lp.lb - x, 0.0)
    high = np.where(np.isfinite(lp.ub), x - lp.ub, 0.0)
    bres = np.maximum(np.maximum(low, high), 0.0)
    bres[np.isnan(x)] = np.inf
    bscale = np.maximum(1.0, np.maximum(np.where(np.isfinite(lp.lb), np.abs(lp.lb), 0.0),
                                        np.where(np.isfinite(lp.ub), np.abs(lp.ub), 0.0)))
    report.max_bound_residual = float(bres.max()) if bres.size else 0.0
    for j in np.flatnonzero(bres > tol * bscale):
        label = lp.col_labels[j] if j < len(lp.col_labels) else ("", f"x{j}", None)
        report.violations.append(Violation("bound", int(j), tuple(label), float(bres[j])))
    return report
