"""Flattening a :class:`ModelGraph` into a sparse mixed-sense LP."""

from __future__ import annotations

import hashlib
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .model import EQ, GE, LE, AffineExpr, ModelGraph, NodeBlock, VarRef, eval_affine, validate_graph

SENSE_CODE = {EQ: "E", LE: "L", GE: "G"}

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration-limit"
FEASIBLE = "feasible"
VIOLATED = "violated"


class AssemblyError(RuntimeError):
    pass


@dataclass(frozen=True)
class Segment:
    node: str
    var: str
    start: int
    length: int
    indexed: bool


class VariableIndex:
    """Dense column numbering: nodes, then variables, then periods."""

    def __init__(self, segments: Sequence[Segment]):
        self.segments = list(segments)
        self._by_key = {(s.node, s.var): s for s in self.segments}
        self.n = sum(s.length for s in self.segments)
        self._starts = np.array([s.start for s in self.segments], dtype=np.int64)

    def segment(self, node: str, var: str) -> Segment:
        try:
            return self._by_key[(node, var)]
        except KeyError:
            raise KeyError(f"no variable {var!r} on node {node!r}") from None

    def column(self, node: str, var: str, t: int | None = None) -> int:
        s = self.segment(node, var)
        if not s.indexed:
            return s.start
        if t is None or not 0 <= t < s.length:
            raise IndexError(f"{node}.{var}: period {t} out of range")
        return s.start + t

    def label(self, col: int) -> tuple[str, str, int | None]:
        k = int(np.searchsorted(self._starts, col, side="right")) - 1
        s = self.segments[k]
        return (s.node, s.var, col - s.start if s.indexed else None)

    def labels(self) -> list[tuple[str, str, int | None]]:
        out = []
        for s in self.segments:
            if s.indexed:
                out.extend((s.node, s.var, t) for t in range(s.length))
            else:
                out.append((s.node, s.var, None))
        return out

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for s in self.segments:
            out[s.node] = out.get(s.node, 0) + s.length
        return out

    def __len__(self):
        return self.n


def index_variables(graph: ModelGraph) -> VariableIndex:
    T = graph.horizon.T
    segs = []
    start = 0
    for node in graph.nodes:
        for v in node.variables:
            length = T if v.indexed else 1
            segs.append(Segment(node.name, v.name, start, length, v.indexed))
            start += length
    return VariableIndex(segs)


@dataclass
class SparseLP:
    """``min c x + obj_const`` subject to ``A x (sense) rhs`` and ``lb <= x <= ub``.

    Triplets are kept sorted by (row, col) with no duplicates.
    """

    c: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    senses: np.ndarray
    rhs: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    obj_const: float = 0.0
    row_labels: list = field(default_factory=list)
    col_labels: list = field(default_factory=list)
    index: VariableIndex | None = None
    node_costs: dict = field(default_factory=dict)
    name: str = "MODEL"

    def __post_init__(self):
        # -0.0 would not survive a text round trip that omits zero entries
        for attr in ("c", "rhs", "lb", "ub"):
            setattr(self, attr, np.asarray(getattr(self, attr), dtype=float) + 0.0)
        self.obj_const = float(self.obj_const) + 0.0

    @property
    def n_rows(self) -> int:
        return len(self.rhs)

    @property
    def n_cols(self) -> int:
        return len(self.c)

    @property
    def nnz(self) -> int:
        return len(self.vals)

    @property
    def A(self) -> sp.csr_matrix:
        cached = getattr(self, "_A", None)
        if cached is None:
            cached = sp.csr_matrix((self.vals, (self.rows, self.cols)), shape=(self.n_rows, self.n_cols))
            self._A = cached
        return cached

    def objective(self, x: np.ndarray) -> float:
        return float(self.c @ x) + self.obj_const

    @classmethod
    def from_dense(cls, A, senses, rhs, c, lb=None, ub=None, obj_const=0.0,
                   col_names=None, row_names=None) -> SparseLP:
        A = np.atleast_2d(np.asarray(A, dtype=float))
        m, n = A.shape if A.size else (len(rhs), len(c))
        coo = sp.coo_matrix(A) if A.size else sp.coo_matrix((m, n))
        return cls.from_triplets(m, n, coo.row, coo.col, coo.data, senses, rhs, c, lb, ub, obj_const,
                                 col_names, row_names)

    @classmethod
    def from_triplets(cls, m, n, rows, cols, vals, senses, rhs, c, lb=None, ub=None, obj_const=0.0,
                      col_names=None, row_names=None) -> SparseLP:
        r, cc, v = _finalize(m, n, np.asarray(rows), np.asarray(cols), np.asarray(vals, dtype=float))
        senses = np.array([SENSE_CODE.get(s, s) for s in senses], dtype="<U1")
        return cls(
            c=np.asarray(c, dtype=float).copy(),
            rows=r, cols=cc, vals=v,
            senses=senses,
            rhs=np.asarray(rhs, dtype=float).copy(),
            lb=np.zeros(n) if lb is None else np.asarray(lb, dtype=float).copy(),
            ub=np.full(n, np.inf) if ub is None else np.asarray(ub, dtype=float).copy(),
            obj_const=float(obj_const),
            row_labels=list(row_names) if row_names is not None else [("", f"r{i}", None) for i in range(m)],
            col_labels=list(col_names) if col_names is not None else [("", f"x{j}", None) for j in range(n)],
        )

    def fingerprint(self) -> str:
        return lp_fingerprint(self)


def _finalize(m, n, rows, cols, vals):
    """Sum duplicate triplets, drop explicit zeros, sort row-major."""
    if len(vals) == 0:
        return np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0)
    mat = sp.csr_matrix((vals, (rows.astype(np.int64), cols.astype(np.int64))), shape=(m, n))
    mat.sum_duplicates()
    mat.eliminate_zeros()
    mat.sort_indices()
    coo = mat.tocoo()
    return coo.row.astype(np.int64), coo.col.astype(np.int64), coo.data.astype(float)


def lp_fingerprint(lp: SparseLP) -> str:
    """Content hash over the numerical data of ``lp`` (names excluded)."""
    h = hashlib.sha256()
    h.update(f"{lp.n_rows} {lp.n_cols} {lp.nnz}\n".encode())
    h.update("".join(lp.senses.tolist()).encode())
    for arr in (lp.rhs, lp.vals, lp.lb, lp.ub, lp.c, np.array([lp.obj_const])):
        h.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    for arr in (lp.rows, lp.cols):
        h.update(np.ascontiguousarray(arr, dtype="<i8").tobytes())
    return h.hexdigest()


def _coef_values(coef, ts: np.ndarray) -> np.ndarray:
    if isinstance(coef, np.ndarray):
        return coef[ts].astype(float)
    return np.full(len(ts), float(coef))


def _ref_columns(index: VariableIndex, ref: VarRef, owner: str, ts: np.ndarray, T: int) -> np.ndarray:
    node = ref.node or owner
    seg = index.segment(node, ref.var)
    if ref.scalar:
        return np.full(len(ts), seg.start, dtype=np.int64)
    idx = np.full(len(ts), ref.at, dtype=np.int64) if ref.at is not None else ts + ref.shift
    if idx.size and (idx.min() < 0 or idx.max() >= T):
        raise AssemblyError(f"{owner}: {ref} leaves the horizon")
    return seg.start + idx


def _expand(index, expr: AffineExpr, owner: str, ts: np.ndarray, T: int):
    cols, vals = [], []
    for ref, coef in expr.terms.items():
        cols.append(_ref_columns(index, ref, owner, ts, T))
        vals.append(_coef_values(coef, ts))
    const = _coef_values(expr.constant, ts)
    return cols, vals, const


def assemble_lp(graph: ModelGraph, validate: bool = True) -> SparseLP:
    if validate:
        diags = validate_graph(graph)
        if diags:
            raise AssemblyError("model does not validate:\n" + "\n".join(map(str, diags)))
    T = graph.horizon.T
    index = index_variables(graph)
    n = index.n
    lb = np.zeros(n)
    ub = np.full(n, np.inf)
    for node in graph.nodes:
        for v in node.variables:
            s = index.segment(node.name, v.name)
            lb[s.start:s.start + s.length] = v.lb
            ub[s.start:s.start + s.length] = v.ub

    all_rows, all_cols, all_vals = [], [], []
    senses, rhs, labels = [], [], []
    row0 = 0
    blocks = [(b.name, b.constraints) for b in graph.nodes] + [(e.name, e.constraints) for e in graph.hyperedges]
    for owner, constraints in blocks:
        for con in constraints:
            ts = np.asarray(list(con.expansion) if not isinstance(con.expansion, range) else con.expansion,
                            dtype=np.int64)
            R = len(ts)
            if R == 0:
                continue
            cols, vals, const = _expand(index, con.expr, owner, ts, T)
            row_ids = row0 + np.arange(R, dtype=np.int64)
            for cc, vv in zip(cols, vals):
                all_rows.append(row_ids)
                all_cols.append(cc)
                all_vals.append(vv)
            senses.append(np.full(R, SENSE_CODE[con.sense], dtype="<U1"))
            rhs.append(-const)
            labels.extend((owner, con.name, int(t)) for t in ts)
            row0 += R

    m = row0
    rows = np.concatenate(all_rows) if all_rows else np.zeros(0, np.int64)
    cols = np.concatenate(all_cols) if all_cols else np.zeros(0, np.int64)
    vals = np.concatenate(all_vals) if all_vals else np.zeros(0)
    r, cc, v = _finalize(m, n, rows, cols, vals)
    senses_arr = np.concatenate(senses) if senses else np.zeros(0, "<U1")
    rhs_arr = np.concatenate(rhs) if rhs else np.zeros(0)

    # empty rows can only come from cancelled coefficients; keep the LP well formed
    counts = np.bincount(r, minlength=m)
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        bad = [i for i in empty if not _trivially_satisfied(senses_arr[i], rhs_arr[i])]
        if bad:
            raise AssemblyError(f"row {labels[bad[0]]} has no variables and cannot be satisfied")
        keep = counts > 0
        remap = np.cumsum(keep) - 1
        r = remap[r]
        senses_arr = senses_arr[keep]
        rhs_arr = rhs_arr[keep]
        labels = [lab for lab, k in zip(labels, keep) if k]

    c = np.zeros(n)
    obj_const = 0.0
    node_costs = {}
    all_t = np.arange(T, dtype=np.int64)
    for node in graph.nodes:
        ncols, nvals = [], []
        fcols, fvals, fconst = _expand(index, node.objective.fixed, node.name, np.zeros(1, np.int64), T)
        ncols += fcols
        nvals += fvals
        pcols, pvals, pconst = _expand(index, node.objective.per_period, node.name, all_t, T)
        ncols += pcols
        nvals += pvals
        const = float(fconst[0]) + float(pconst.sum())
        if ncols:
            cat_c = np.concatenate(ncols)
            cat_v = np.concatenate(nvals)
            np.add.at(c, cat_c, cat_v)
            uniq, inv = np.unique(cat_c, return_inverse=True)
            summed = np.zeros(len(uniq))
            np.add.at(summed, inv, cat_v)
            node_costs[node.name] = (uniq, summed, const)
        else:
            node_costs[node.name] = (np.zeros(0, np.int64), np.zeros(0), const)
        obj_const += const

    return SparseLP(c=c, rows=r, cols=cc, vals=v, senses=senses_arr, rhs=rhs_arr, lb=lb, ub=ub,
                    obj_const=obj_const, row_labels=labels, col_labels=index.labels(), index=index,
                    node_costs=node_costs)


def _trivially_satisfied(sense, b, tol=1e-12):
    if sense == "E":
        return abs(b) <= tol
    if sense == "L":
        return 0 <= b + tol
    return 0 >= b - tol


@dataclass
class Solution:
    status: str
    objective: float | None
    x: np.ndarray
    values: dict = field(default_factory=dict)
    contributions: dict = field(default_factory=dict)
    max_residual: float = 0.0
    max_bound_violation: float = 0.0
    info: dict = field(default_factory=dict)

    def value(self, node: str, var: str, t: int | None = None):
        v = self.values[(node, var)]
        if t is None:
            return v
        return float(v[t])

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def row_residuals(lp: SparseLP, x: np.ndarray) -> np.ndarray:
    """Per-row violation amount (0 when the row holds)."""
    ax = lp.A @ x if lp.n_rows else np.zeros(0)
    d = ax - lp.rhs
    out = np.zeros(lp.n_rows)
    e = lp.senses == "E"
    l_ = lp.senses == "L"
    g = lp.senses == "G"
    out[e] = np.abs(d[e])
    out[l_] = np.maximum(d[l_], 0.0)
    out[g] = np.maximum(-d[g], 0.0)
    return out


def bound_violations(lp: SparseLP, x: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        below = np.where(np.isfinite(lp.lb), lp.lb - x, 0.0)
        above = np.where(np.isfinite(lp.ub), x - lp.ub, 0.0)
    return np.maximum(np.maximum(below, above), 0.0)


class _NodeView(Mapping):
    """Assignment view of one node's values, keyed ``(var, index)``."""

    def __init__(self, values: dict, node: str):
        self._values = values
        self._node = node

    def __getitem__(self, key):
        var, idx = key
        v = self._values[(self._node, var)]
        if idx is None:
            if isinstance(v, np.ndarray):
                raise KeyError(key)
            return v
        if not isinstance(v, np.ndarray) or not 0 <= idx < len(v):
            raise KeyError(key)
        return v[idx]

    def __iter__(self):
        for (node, var), v in self._values.items():
            if node == self._node:
                if isinstance(v, np.ndarray):
                    yield from ((var, i) for i in range(len(v)))
                else:
                    yield (var, None)

    def __len__(self):
        return sum(1 for _ in self)


def node_assignment(values: dict, node: str) -> Mapping:
    return _NodeView(values, node)


def evaluate_objective(node: NodeBlock, values: dict, T: int) -> float:
    """Local objective of ``node`` evaluated with vectorised expression sums."""
    view = node_assignment(values, node.name)
    total = eval_affine(node.objective.fixed, view, None)
    expr = node.objective.per_period
    const = expr.constant
    total += float(np.sum(const)) if isinstance(const, np.ndarray) else float(const) * T
    for ref, coef in expr.terms.items():
        v = values[(node.name, ref.var)]
        if ref.scalar:
            series = np.full(T, float(v))
        elif ref.at is not None:
            series = np.full(T, float(v[ref.at]))
        else:
            series = np.asarray(v)[np.arange(T) + ref.shift]
        c = coef if isinstance(coef, np.ndarray) else np.full(T, float(coef))
        total += float(np.dot(c, series))
    return total


def map_solution(lp: SparseLP, x, objective: float | None = None, status: str | None = None,
                 graph: ModelGraph | None = None, tol: float = 1e-9, **info) -> Solution:
    x = np.asarray(x, dtype=float)
    if x.shape != (lp.n_cols,):
        raise ValueError(f"primal vector has length {x.size}, LP has {lp.n_cols} columns")
    values: dict = {}
    if lp.index is not None:
        for s in lp.index.segments:
            chunk = x[s.start:s.start + s.length]
            values[(s.node, s.var)] = chunk.copy() if s.indexed else float(chunk[0])
    else:
        for j, lab in enumerate(lp.col_labels):
            values[(lab[0], lab[1]) if lab[2] is None else (lab[0], lab[1], lab[2])] = float(x[j])

    contributions = {}
    if graph is not None:
        for node in graph.nodes:
            contributions[node.name] = evaluate_objective(node, values, graph.horizon.T)
    else:
        for name, (cols, coefs, const) in lp.node_costs.items():
            contributions[name] = float(coefs @ x[cols]) + const

    res = row_residuals(lp, x)
    bnd = bound_violations(lp, x)
    max_res = float(res.max()) if res.size else 0.0
    max_bnd = float(bnd.max()) if bnd.size else 0.0
    if status is None:
        status = FEASIBLE if max(max_res, max_bnd) <= tol else VIOLATED
    if objective is None:
        objective = lp.objective(x)
    return Solution(status=status, objective=objective, x=x, values=values, contributions=contributions,
                    max_residual=max_res, max_bound_violation=max_bnd, info=dict(info))
