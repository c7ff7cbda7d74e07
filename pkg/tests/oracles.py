"""Independent reference computations used by the tests.

Nothing here imports the solver; the LP oracle works on plain dense arrays.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def vertex_enumeration(A, senses, b, c, lb, ub, tol=1e-9):
    """Brute-force min c x over a box-bounded polyhedron.

    Every vertex is the solution of n independent active constraints: a set R of
    rows held at their right-hand side and the remaining n - |R| variables pinned
    at one of their bounds.  Returns (status, objective, x).
    """
    A = np.asarray(A, dtype=float).reshape(len(b), len(c))
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    m, n = A.shape
    assert np.all(np.isfinite(lb)) and np.all(np.isfinite(ub)), "oracle needs a bounded box"
    if np.any(lb > ub):
        return "infeasible", None, None
    best_val, best_x = math.inf, None

    def feasible(X):
        ok = np.all(X >= lb - tol, axis=1) & np.all(X <= ub + tol, axis=1)
        if m:
            AX = X @ A.T
            scale = tol * np.maximum(1.0, np.abs(b))
            for i, s in enumerate(senses):
                if s == "E":
                    ok &= np.abs(AX[:, i] - b[i]) <= scale[i]
                elif s == "L":
                    ok &= AX[:, i] <= b[i] + scale[i]
                else:
                    ok &= AX[:, i] >= b[i] - scale[i]
        return ok

    for k in range(0, min(m, n) + 1):
        row_sets = list(itertools.combinations(range(m), k))
        free_sets = list(itertools.combinations(range(n), k))
        pinned_count = n - k
        corner = np.array(list(itertools.product((0, 1), repeat=pinned_count)), dtype=float)
        corner = corner.reshape(2 ** pinned_count, pinned_count)
        for F in free_sets:
            F = list(F)
            P = [j for j in range(n) if j not in F]
            pinned = lb[P] + corner * (ub[P] - lb[P])          # (combos, n-k)
            if k == 0:
                X = np.zeros((len(pinned), n))
                X[:, P] = pinned
                ok = feasible(X)
                if ok.any():
                    vals = X[ok] @ c
                    i = int(np.argmin(vals))
                    if vals[i] < best_val:
                        best_val, best_x = float(vals[i]), X[ok][i]
                continue
            R = np.array(row_sets)                              # (nr, k)
            mats = A[R][:, :, F]                               # (nr, k, k)
            det = np.linalg.det(mats)
            good = np.abs(det) > 1e-9
            if not good.any():
                continue
            R = R[good]
            mats = mats[good]
            rhs = b[R][:, :, None] - A[R][:, :, P] @ pinned.T  # (nr, k, combos)
            sol = np.linalg.solve(mats, rhs)                    # (nr, k, combos)
            nr, _, nc = sol.shape
            X = np.zeros((nr, nc, n))
            X[:, :, F] = np.transpose(sol, (0, 2, 1))
            X[:, :, P] = pinned[None, :, :]
            X = X.reshape(-1, n)
            ok = feasible(X)
            if ok.any():
                vals = X[ok] @ c
                i = int(np.argmin(vals))
                if vals[i] < best_val:
                    best_val, best_x = float(vals[i]), X[ok][i]
    if best_x is None:
        return "infeasible", None, None
    return "optimal", best_val, best_x


def random_lp(rng: np.random.Generator, max_vars=8, max_rows=8):
    """Small integer LP with a finite box on every variable."""
    n = int(rng.integers(1, max_vars + 1))
    m = int(rng.integers(1, max_rows + 1))
    A = rng.integers(-5, 6, size=(m, n)).astype(float)
    A[rng.random((m, n)) < 0.3] = 0.0
    senses = [str(s) for s in rng.choice(["L", "G", "E"], size=m, p=[0.45, 0.35, 0.2])]
    c = rng.integers(-6, 7, size=n).astype(float)
    lb = rng.integers(-4, 1, size=n).astype(float)
    ub = lb + rng.integers(0, 7, size=n)
    if rng.random() < 0.25:
        b = rng.integers(-8, 9, size=m).astype(float)
    else:
        # right-hand sides around an integer point of the box keep most cases feasible
        x0 = np.array([rng.integers(int(lo), int(hi) + 1) for lo, hi in zip(lb, ub)], dtype=float)
        slack = rng.integers(0, 4, size=m).astype(float)
        sign = np.array([{"L": 1.0, "G": -1.0, "E": 0.0}[s] for s in senses])
        b = A @ x0 + sign * slack
    return A, senses, b, c, lb, ub


def annuity(capex, lifetime, rate):
    """Textbook annuity, evaluated with plain powers."""
    if rate == 0:
        return capex / lifetime
    return capex * rate / (1 - (1 + rate) ** (-lifetime))
