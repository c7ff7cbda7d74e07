"""Bounded-variable primal revised simplex for desk-scale LPs.

Every row ``a_i x (sense) b_i`` gets a logical ``s_i`` with ``a_i x - s_i = 0``
and the row bound moved onto ``s_i``.  The basis starts all-logical, phase 1
minimises the sum of bound infeasibilities of the basic variables and phase 2
the scaled cost.  The basis matrix is held as a dense LU plus an eta file and
refactorised periodically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from ..assemble import INFEASIBLE, ITERATION_LIMIT, OPTIMAL, UNBOUNDED, SparseLP, Solution, map_solution

DANTZIG = "dantzig"
DEVEX = "steepest-edge-approx"
PIVOT_RULES = (DANTZIG, DEVEX)

BASIC, AT_LB, AT_UB, FREE = 0, 1, 2, 3

_PIVOT_TOL = 1e-9
_DEGENERATE_STEP = 1e-12


class SimplexError(RuntimeError):
    pass


class ProblemTooLarge(SimplexError):
    pass


@dataclass(frozen=True)
class SimplexConfig:
    feas_tol: float = 1e-7
    opt_tol: float = 1e-7
    max_iter: int | None = None
    pivot_rule: str = DANTZIG
    bland_after: int = 1000
    refactor_every: int = 50
    max_nnz: int = 2_000_000
    max_dense: int = 60_000_000
    scale: bool = True

    def __post_init__(self):
        if not (self.feas_tol > 0 and self.opt_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.pivot_rule not in PIVOT_RULES:
            raise ValueError(f"pivot rule must be one of {PIVOT_RULES}, got {self.pivot_rule!r}")
        if self.bland_after < 1 or self.refactor_every < 1:
            raise ValueError("bland_after and refactor_every must be positive")
        if self.max_iter is not None and self.max_iter < 0:
            raise ValueError("max_iter must be non-negative")


def _pow2(v: np.ndarray) -> np.ndarray:
    """Nearest power of two to 1/v, so scaling never perturbs mantissas."""
    out = np.ones_like(v)
    ok = v > 0
    out[ok] = np.ldexp(1.0, -np.round(np.log2(v[ok])).astype(int))
    return out


def equilibrate(A: np.ndarray, passes: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Row and column power-of-two factors bringing max |a_ij| per line near 1."""
    m, n = A.shape
    r = np.ones(m)
    s = np.ones(n)
    absA = np.abs(A)
    for _ in range(passes):
        cur = absA * r[:, None] * s[None, :]
        rmax = cur.max(axis=1) if n else np.zeros(m)
        r *= _pow2(rmax)
        cur = absA * r[:, None] * s[None, :]
        cmax = cur.max(axis=0) if m else np.zeros(n)
        s *= _pow2(cmax)
    return r, s


class _Basis:
    """Dense LU of the basis matrix with a product-form eta file."""

    def __init__(self, M: np.ndarray):
        self.M = M
        self.etas: list[tuple[int, np.ndarray]] = []
        self.lu = None

    def factor(self, head: np.ndarray):
        B = self.M[:, head]
        self.lu = sla.lu_factor(B, check_finite=False)
        self.etas = []
        return np.abs(np.diag(self.lu[0]))

    def solve(self, v: np.ndarray) -> np.ndarray:
        z = sla.lu_solve(self.lu, v, check_finite=False)
        for r, a in self.etas:
            zr = z[r] / a[r]
            z -= a * zr
            z[r] = zr
        return z

    def solve_t(self, v: np.ndarray) -> np.ndarray:
        z = np.array(v, dtype=float)
        for r, a in reversed(self.etas):
            z[r] = (z[r] - (a @ z - a[r] * z[r])) / a[r]
        return sla.lu_solve(self.lu, z, trans=1, check_finite=False)

    def update(self, r: int, alpha: np.ndarray):
        self.etas.append((r, alpha.copy()))


class _Simplex:
    def __init__(self, lp: SparseLP, cfg: SimplexConfig):
        self.cfg = cfg
        m, n = lp.n_rows, lp.n_cols
        self.m, self.n, self.N = m, n, n + m
        A = lp.A.toarray()
        if cfg.scale and A.size:
            r, s = equilibrate(A)
        else:
            r, s = np.ones(m), np.ones(n)
        self.row_scale, self.col_scale = r, s
        As = A * r[:, None] * s[None, :]
        self.M = np.hstack([As, -np.eye(m)])

        c = lp.c * s
        cmax = np.max(np.abs(c)) if n else 0.0
        self.cost_scale = float(_pow2(np.array([cmax]))[0]) if cmax > 0 else 1.0
        self.c = np.concatenate([c * self.cost_scale, np.zeros(m)])

        lo = np.concatenate([lp.lb / s, np.full(m, -np.inf)])
        hi = np.concatenate([lp.ub / s, np.full(m, np.inf)])
        b = lp.rhs * r
        for i, sense in enumerate(lp.senses):
            if sense in ("E", "G"):
                lo[n + i] = b[i]
            if sense in ("E", "L"):
                hi[n + i] = b[i]
        self.lo, self.hi = lo, hi

        self.status = np.full(self.N, AT_LB, dtype=np.int8)
        self.x = np.zeros(self.N)
        for j in range(n):
            if np.isfinite(lo[j]):
                self.status[j], self.x[j] = AT_LB, lo[j]
            elif np.isfinite(hi[j]):
                self.status[j], self.x[j] = AT_UB, hi[j]
            else:
                self.status[j], self.x[j] = FREE, 0.0
        self.head = np.arange(n, n + m)
        self.status[self.head] = BASIC
        self.basis = _Basis(self.M)
        self.weights = np.ones(self.N)
        self.since_refactor = 0
        self.iterations = 0
        self.phase1_iterations = 0
        self.bland = False
        self.degenerate_run = 0
        self.ray = None
        self.farkas = None
        self.refactor()

    # -- basis bookkeeping -------------------------------------------------

    def refactor(self):
        if self.m == 0:
            return
        diag = self.basis.factor(self.head)
        if np.min(diag) < 1e-11 * max(1.0, np.max(diag)):
            self._repair()
            self.basis.factor(self.head)
        self.since_refactor = 0
        self.recompute_basics()

    def _repair(self):
        """Swap dependent basic columns for logicals so the basis is nonsingular."""
        B = self.M[:, self.head]
        _, R, piv = sla.qr(B, pivoting=True, mode="economic")
        d = np.abs(np.diag(R))
        rank = int(np.sum(d > 1e-9 * max(1.0, d[0] if d.size else 1.0)))
        keep = np.sort(piv[:rank])
        drop = piv[rank:]
        Bk = B[:, keep]
        if rank:
            Q, _ = sla.qr(Bk, mode="full")
            null = Q[:, rank:]
        else:
            null = np.eye(self.m)
        _, _, rows = sla.qr(null.T, pivoting=True, mode="economic")
        new_rows = rows[: self.m - rank]
        for slot, i in zip(drop, new_rows):
            j = self.head[slot]
            self._make_nonbasic(j)
            self.head[slot] = self.n + i
            self.status[self.n + i] = BASIC

    def _make_nonbasic(self, j: int):
        lo, hi, v = self.lo[j], self.hi[j], self.x[j]
        if np.isfinite(lo) and (not np.isfinite(hi) or abs(v - lo) <= abs(v - hi)):
            self.status[j], self.x[j] = AT_LB, lo
        elif np.isfinite(hi):
            self.status[j], self.x[j] = AT_UB, hi
        else:
            self.status[j], self.x[j] = FREE, 0.0

    def recompute_basics(self):
        if self.m == 0:
            return
        xn = self.x.copy()
        xn[self.head] = 0.0
        self.x[self.head] = self.basis.solve(-(self.M @ xn))

    # -- pricing -------------------------------------------------------------

    def infeasibility(self):
        xb = self.x[self.head]
        below = self.lo[self.head] - xb
        above = xb - self.hi[self.head]
        tol = self.cfg.feas_tol
        return below > tol, above > tol, float(np.sum(np.maximum(below, 0) + np.maximum(above, 0)))

    def reduced_costs(self, phase: int):
        if phase == 1:
            below, above, _ = self.infeasibility()
            cb = above.astype(float) - below.astype(float)
            cfull = np.zeros(self.N)
        else:
            cb = self.c[self.head]
            cfull = self.c
        y = self.basis.solve_t(cb) if self.m else np.zeros(0)
        d = cfull - self.M.T @ y
        d[self.head] = 0.0
        return d, y

    def choose_entering(self, d: np.ndarray):
        tol = self.cfg.opt_tol
        st = self.status
        fixed = self.lo == self.hi
        elig = (((st == AT_LB) & (d < -tol)) | ((st == AT_UB) & (d > tol)) | ((st == FREE) & (np.abs(d) > tol)))
        elig &= ~fixed | (st == FREE)
        cand = np.flatnonzero(elig)
        if cand.size == 0:
            return None
        if self.bland:
            return int(cand[0])
        if self.cfg.pivot_rule == DEVEX:
            score = d[cand] ** 2 / self.weights[cand]
        else:
            score = np.abs(d[cand])
        return int(cand[int(np.argmax(score))])

    # -- ratio test ------------------------------------------------------------

    def ratio_test(self, q: int, direction: float, alpha: np.ndarray):
        """Return (theta, leaving slot or -1, target value of leaving var)."""
        tol = self.cfg.feas_tol
        xb = self.x[self.head]
        lb = self.lo[self.head]
        ub = self.hi[self.head]
        rate = -direction * alpha
        targets = np.full(self.m, np.nan)
        dist = np.full(self.m, np.inf)
        breakpoint = np.zeros(self.m, dtype=bool)
        dec = rate < -_PIVOT_TOL
        inc = rate > _PIVOT_TOL
        # decreasing basics
        above = dec & (xb > ub + tol)
        ok_lo = dec & ~above & (xb >= lb - tol) & np.isfinite(lb)
        targets[above] = ub[above]
        targets[ok_lo] = lb[ok_lo]
        breakpoint |= above
        # increasing basics
        below = inc & (xb < lb - tol)
        ok_hi = inc & ~below & (xb <= ub + tol) & np.isfinite(ub)
        targets[below] = lb[below]
        targets[ok_hi] = ub[ok_hi]
        breakpoint |= below
        has = above | ok_lo | below | ok_hi
        idx = np.flatnonzero(has)
        dist[idx] = np.abs(xb[idx] - targets[idx])
        # feasible basics sitting slightly outside count as distance zero
        outside = has & ~breakpoint & (((rate < 0) & (xb < lb)) | ((rate > 0) & (xb > ub)))
        dist[outside] = 0.0
        absrate = np.abs(rate)
        span = self.hi[q] - self.lo[q]

        if idx.size == 0:
            if np.isfinite(span):
                return span, -1, None
            return np.inf, -1, None

        exact = dist[idx] / absrate[idx]
        if self.bland:
            tmin = exact.min()
            if np.isfinite(span) and span <= tmin:
                return span, -1, None
            ties = idx[exact <= tmin + 1e-12]
            r = int(ties[np.argmin(self.head[ties])])
            return float(dist[r] / absrate[r]), r, targets[r]

        slack = np.where(breakpoint[idx], 0.0, tol)
        harris = (dist[idx] + slack) / absrate[idx]
        tmax = harris.min()
        if np.isfinite(span) and span <= tmax:
            return span, -1, None
        within = exact <= tmax
        cands = idx[within]
        best = absrate[cands].max()
        top = cands[absrate[cands] >= best * (1 - 1e-12)]
        r = int(top[np.argmin(self.head[top])])
        return float(dist[r] / absrate[r]), r, targets[r]

    # -- main loop ---------------------------------------------------------------

    def run(self):
        cfg = self.cfg
        limit = cfg.max_iter if cfg.max_iter is not None else 50 * (self.m + self.n)
        last_phase = None
        while True:
            below, above, _ = self.infeasibility()
            phase = 1 if (below.any() or above.any()) else 2
            if phase != last_phase:
                self.weights[:] = 1.0
                last_phase = phase
            d, y = self.reduced_costs(phase)
            q = self.choose_entering(d)
            if q is None:
                if self.since_refactor > 0:
                    self.refactor()
                    continue
                if phase == 1:
                    self.farkas = y
                    return INFEASIBLE
                return OPTIMAL
            if self.iterations >= limit:
                return ITERATION_LIMIT
            direction = -1.0 if d[q] > 0 else 1.0
            alpha = self.basis.solve(self.M[:, q]) if self.m else np.zeros(0)
            theta, r, target = self.ratio_test(q, direction, alpha)
            if not np.isfinite(theta):
                if phase == 2:
                    self.ray = (q, direction, alpha)
                    return UNBOUNDED
                if self.since_refactor > 0:
                    self.refactor()
                    continue
                raise SimplexError("phase 1 step without a breakpoint; the LP is badly conditioned")
            self.iterations += 1
            if phase == 1:
                self.phase1_iterations += 1
            self._step(q, direction, alpha, theta, r, target)
            if theta * abs(d[q]) <= _DEGENERATE_STEP:
                self.degenerate_run += 1
                if self.degenerate_run >= cfg.bland_after:
                    self.bland = True
            else:
                self.degenerate_run = 0
                self.bland = False
            if self.since_refactor >= cfg.refactor_every:
                self.refactor()

    def _step(self, q, direction, alpha, theta, r, target):
        head = self.head
        if theta > 0:
            self.x[q] += direction * theta
            self.x[head] -= direction * theta * alpha
        if r < 0:
            # bound flip of the entering variable
            if direction > 0:
                self.status[q], self.x[q] = AT_UB, self.hi[q]
            else:
                self.status[q], self.x[q] = AT_LB, self.lo[q]
            return
        if self.cfg.pivot_rule == DEVEX and not self.bland:
            self._update_weights(q, r, alpha)
        out = head[r]
        self.x[out] = target
        self.status[out] = AT_UB if target == self.hi[out] and target != self.lo[out] else AT_LB
        if self.lo[out] == -np.inf and self.hi[out] == np.inf:
            self.status[out] = FREE
        head[r] = q
        self.status[q] = BASIC
        self.basis.update(r, alpha)
        self.since_refactor += 1

    def _update_weights(self, q, r, alpha):
        e = np.zeros(self.m)
        e[r] = 1.0
        rho = self.basis.solve_t(e)
        row = self.M.T @ rho
        ar = alpha[r]
        wq = self.weights[q]
        nb = self.status != BASIC
        self.weights[nb] = np.maximum(self.weights[nb], (row[nb] / ar) ** 2 * wq)
        self.weights[self.head[r]] = max(wq / ar ** 2, 1.0)

    # -- results -----------------------------------------------------------------

    def dual_infeasibility(self) -> float:
        d, _ = self.reduced_costs(2)
        st = self.status
        fixed = self.lo == self.hi
        viol = np.zeros(self.N)
        viol[st == AT_LB] = np.maximum(-d[st == AT_LB], 0)
        viol[st == AT_UB] = np.maximum(d[st == AT_UB], 0)
        viol[st == FREE] = np.abs(d[st == FREE])
        viol[fixed & (st != FREE)] = 0.0
        return float(viol.max()) if viol.size else 0.0

    def structural_x(self) -> np.ndarray:
        return self.x[: self.n] * self.col_scale

    def unbounded_ray(self) -> np.ndarray:
        q, direction, alpha = self.ray
        dx = np.zeros(self.N)
        dx[q] = direction
        dx[self.head] = -direction * alpha
        return dx[: self.n] * self.col_scale

    def farkas_rows(self) -> np.ndarray:
        return self.farkas * self.row_scale


def farkas_gap(lp: SparseLP, y: np.ndarray, zero: float = 1e-9) -> float:
    """Lower bound of ``y (A x - s)`` over the variable and row boxes.

    A positive value proves that no ``x`` within its bounds puts every row
    inside its bounds, because feasibility needs ``A x - s = 0``.
    """
    g = lp.A.T @ y
    g = np.where(np.abs(g) <= zero * max(1.0, np.abs(y).max(initial=0.0)), 0.0, g)
    lo_rows = np.where(lp.senses == "L", -np.inf, lp.rhs)
    hi_rows = np.where(lp.senses == "G", np.inf, lp.rhs)
    with np.errstate(invalid="ignore"):
        gx = np.where(g > 0, g * lp.lb, np.where(g < 0, g * lp.ub, 0.0))
        ys = np.where(y > 0, y * hi_rows, np.where(y < 0, y * lo_rows, 0.0))
    total = gx.sum() - ys.sum()
    return float(total) if np.isfinite(total) else -np.inf


def solve_simplex(lp: SparseLP, cfg: SimplexConfig | None = None) -> Solution:
    cfg = cfg or SimplexConfig()
    if lp.nnz > cfg.max_nnz:
        raise ProblemTooLarge(
            f"{lp.nnz} nonzeros exceed the embedded solver limit of {cfg.max_nnz}; "
            "use the external solver bridge (solve_external / --solver external)")
    if lp.n_rows * (lp.n_rows + lp.n_cols) > cfg.max_dense:
        raise ProblemTooLarge(
            f"{lp.n_rows} rows x {lp.n_rows + lp.n_cols} columns is too large for the dense basis; "
            "use the external solver bridge (solve_external / --solver external)")
    for name in ("c", "rhs", "vals"):
        if not np.all(np.isfinite(getattr(lp, name))):
            raise ValueError(f"LP has non-finite entries in {name}")
    if np.any(np.isnan(lp.lb)) or np.any(np.isnan(lp.ub)):
        raise ValueError("LP has NaN bounds")
    if np.any(lp.lb > lp.ub):
        j = int(np.flatnonzero(lp.lb > lp.ub)[0])
        return map_solution(lp, np.zeros(lp.n_cols), objective=None, status=INFEASIBLE,
                            reason=f"column {j} has lower bound above upper bound")

    s = _Simplex(lp, cfg)
    status = s.run()
    info = {"iterations": s.iterations, "phase1_iterations": s.phase1_iterations}
    x = s.structural_x()
    if status == OPTIMAL:
        dual_inf = s.dual_infeasibility()
        assert dual_inf <= cfg.opt_tol, f"optimal basis is not dual feasible ({dual_inf:.3g})"
        info["dual_infeasibility"] = dual_inf
        info["basis"] = s.head.copy()
        return map_solution(lp, x, objective=lp.objective(x), status=OPTIMAL, **info)
    if status == INFEASIBLE:
        y = s.farkas_rows()
        if farkas_gap(lp, y) <= 0 and farkas_gap(lp, -y) > 0:
            y = -y
        info["farkas"] = y
        return map_solution(lp, x, objective=None, status=INFEASIBLE, **info)
    if status == UNBOUNDED:
        info["ray"] = s.unbounded_ray()
        return map_solution(lp, x, objective=-np.inf, status=UNBOUNDED, **info)
    return map_solution(lp, x, objective=lp.objective(x), status=ITERATION_LIMIT, **info)
