"""Hypergraph intermediate representation of structured linear programs.

A model is a set of node blocks (each with its own variables, affine
constraints and local objective) coupled by hyperedge blocks whose
constraints only touch the external variables of their member nodes.
Everything lives on one shared discrete time horizon.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Union

import numpy as np

INTERNAL = "internal"
EXTERNAL = "external"

EQ = "=="
LE = "<="
GE = ">="
SENSES = (EQ, LE, GE)

# A coefficient is either a constant or a per-period series of length T.
Coef = Union[float, np.ndarray]


class ValidationError(ValueError):
    """Raised when a model object is built from illegal parameters."""


class UnresolvedVariable(LookupError):
    def __init__(self, var: str, index: int | None, node: str | None = None):
        self.var = var
        self.index = index
        self.node = node
        where = f"{node}.{var}" if node else var
        idx = "" if index is None else f"[{index}]"
        super().__init__(f"unresolved variable {where}{idx}")


@dataclass(frozen=True)
class TimeHorizon:
    T: int
    dt: float = 1.0
    years: float = 1.0

    def __post_init__(self):
        if isinstance(self.T, bool) or int(self.T) != self.T or self.T < 1:
            raise ValidationError(f"T must be a positive integer, got {self.T!r}")
        if not self.dt > 0 or not math.isfinite(self.dt):
            raise ValidationError(f"dt must be positive, got {self.dt!r}")
        if not self.years > 0 or not math.isfinite(self.years):
            raise ValidationError(f"years must be positive, got {self.years!r}")

    @property
    def periods(self) -> range:
        return range(self.T)


def new_horizon(T: int, dt: float = 1.0, years: float = 1.0) -> TimeHorizon:
    return TimeHorizon(int(T) if isinstance(T, (int, np.integer)) else T, float(dt), float(years))


@dataclass(frozen=True)
class VariableDecl:
    name: str
    kind: str = INTERNAL
    indexed: bool = True
    lb: float = 0.0
    ub: float = math.inf
    free: bool = False
    unit: str = ""

    def __post_init__(self):
        if self.kind not in (INTERNAL, EXTERNAL):
            raise ValidationError(f"variable {self.name!r}: unknown kind {self.kind!r}")
        if self.free:
            object.__setattr__(self, "lb", -math.inf)
        elif self.lb == -math.inf:
            raise ValidationError(f"variable {self.name!r}: unbounded below but not declared free")
        if self.lb > self.ub:
            raise ValidationError(f"variable {self.name!r}: lower bound exceeds upper bound")

    @property
    def external(self) -> bool:
        return self.kind == EXTERNAL


@dataclass(frozen=True)
class VarRef:
    """Reference to a variable inside an affine expression.

    Time-indexed references are either relative (``t + shift``, resolved
    against each period of the expansion set) or absolute (``at``).
    ``node`` is only set for references made from hyperedges.
    """

    var: str
    node: str | None = None
    shift: int = 0
    at: int | None = None
    scalar: bool = False

    def index(self, t: int | None) -> int | None:
        if self.scalar:
            return None
        if self.at is not None:
            return self.at
        if t is None:
            raise ValueError(f"relative reference to {self.var!r} needs a period")
        return t + self.shift

    def key(self, t: int | None):
        idx = self.index(t)
        if self.node is None:
            return (self.var, idx)
        return (self.node, self.var, idx)

    def __str__(self):
        name = f"{self.node}.{self.var}" if self.node else self.var
        if self.scalar:
            return name
        if self.at is not None:
            return f"{name}[{self.at}]"
        if self.shift:
            return f"{name}[t{self.shift:+d}]"
        return f"{name}[t]"


def _add_coef(a: Coef, b: Coef) -> Coef:
    return a + b


def _scale(c: Coef, k: Coef) -> Coef:
    return c * k


class AffineExpr:
    """Sparse linear form plus constant; coefficients may vary per period."""

    __slots__ = ("terms", "constant")
    # make numpy defer to our reflected operators (array * expr)
    __array_ufunc__ = None

    def __init__(self, terms: Iterable[tuple[VarRef, Coef]] | Mapping[VarRef, Coef] = (), constant: Coef = 0.0):
        if isinstance(terms, Mapping):
            terms = terms.items()
        merged: dict[VarRef, Coef] = {}
        for ref, coef in terms:
            if ref in merged:
                merged[ref] = _add_coef(merged[ref], coef)
            else:
                merged[ref] = coef
        self.terms = merged
        self.constant = constant

    def __add__(self, other):
        other = as_expr(other)
        return AffineExpr(list(self.terms.items()) + list(other.terms.items()), self.constant + other.constant)

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-as_expr(other))

    def __rsub__(self, other):
        return as_expr(other) - self

    def __mul__(self, k):
        if isinstance(k, AffineExpr):
            raise TypeError("product of two affine expressions is not affine")
        if isinstance(k, (list, tuple)):
            k = np.asarray(k, dtype=float)
        return AffineExpr([(r, _scale(c, k)) for r, c in self.terms.items()], _scale(self.constant, k))

    __rmul__ = __mul__

    def refs(self) -> list[VarRef]:
        return list(self.terms)

    def __repr__(self):
        parts = [f"{_fmt_coef(c)}*{r}" for r, c in self.terms.items()]
        parts.append(_fmt_coef(self.constant))
        return "AffineExpr(" + " + ".join(parts) + ")"


def _fmt_coef(c: Coef) -> str:
    if isinstance(c, np.ndarray):
        return f"series[{len(c)}]"
    return repr(float(c))


def as_expr(x) -> AffineExpr:
    if isinstance(x, AffineExpr):
        return x
    if isinstance(x, (int, float, np.floating, np.integer)):
        return AffineExpr((), float(x))
    if isinstance(x, np.ndarray):
        return AffineExpr((), x.astype(float))
    raise TypeError(f"cannot use {type(x).__name__} in an affine expression")


def ts(var: str, shift: int = 0, node: str | None = None) -> AffineExpr:
    """Time-indexed reference ``var[t + shift]``."""
    return AffineExpr([(VarRef(var, node=node, shift=shift), 1.0)])


def at(var: str, index: int, node: str | None = None) -> AffineExpr:
    """Absolute reference ``var[index]``."""
    return AffineExpr([(VarRef(var, node=node, at=index), 1.0)])


def scalar(var: str, node: str | None = None) -> AffineExpr:
    return AffineExpr([(VarRef(var, node=node, scalar=True), 1.0)])


def coef_at(c: Coef, t: int | None) -> float:
    if isinstance(c, np.ndarray):
        if t is None:
            raise ValueError("series coefficient needs a period")
        return float(c[t])
    return float(c)


def eval_affine(expr: AffineExpr, assignment: Mapping, t: int | None = None) -> float:
    """Value of ``expr`` at period ``t`` under ``assignment``.

    Keys are ``(var, index)`` for node-local references and
    ``(node, var, index)`` for qualified ones; ``index`` is None for scalars.
    """
    total = coef_at(expr.constant, t)
    for ref, coef in expr.terms.items():
        key = ref.key(t)
        try:
            value = assignment[key]
        except KeyError:
            raise UnresolvedVariable(ref.var, ref.index(t), ref.node) from None
        total += coef_at(coef, t) * float(value)
    return total


@dataclass(frozen=True)
class ConstraintBlock:
    """``expr <sense> 0`` expanded over every period in ``expansion``."""

    name: str
    expr: AffineExpr
    sense: str
    expansion: Sequence[int]

    def __post_init__(self):
        if self.sense not in SENSES:
            raise ValidationError(f"constraint {self.name!r}: unknown sense {self.sense!r}")


@dataclass(frozen=True)
class Objective:
    """Local objective: a one-off part plus a part summed over all periods."""

    fixed: AffineExpr = field(default_factory=AffineExpr)
    per_period: AffineExpr = field(default_factory=AffineExpr)


@dataclass(frozen=True)
class NodeBlock:
    name: str
    variables: tuple[VariableDecl, ...]
    constraints: tuple[ConstraintBlock, ...] = ()
    objective: Objective = field(default_factory=Objective)
    kind: str = ""
    source: object = field(default=None, compare=False, repr=False)

    def variable(self, name: str) -> VariableDecl:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(f"no variable {name!r} on node {self.name!r}")

    def has_variable(self, name: str) -> bool:
        return any(v.name == name for v in self.variables)

    @property
    def externals(self) -> list[str]:
        return [v.name for v in self.variables if v.external]


@dataclass(frozen=True)
class HyperedgeBlock:
    name: str
    tail: tuple[tuple[str, str], ...]
    head: tuple[tuple[str, str], ...]
    constraints: tuple[ConstraintBlock, ...] = ()
    kind: str = ""
    source: object = field(default=None, compare=False, repr=False)

    @property
    def members(self) -> tuple[tuple[str, str], ...]:
        return self.tail + self.head


@dataclass(frozen=True)
class ModelGraph:
    horizon: TimeHorizon
    nodes: tuple[NodeBlock, ...] = ()
    hyperedges: tuple[HyperedgeBlock, ...] = ()

    def node(self, name: str) -> NodeBlock:
        for n in self.nodes:
            if n.name == name:
                return n
        raise KeyError(f"no node {name!r}")

    def hyperedge(self, name: str) -> HyperedgeBlock:
        for e in self.hyperedges:
            if e.name == name:
                return e
        raise KeyError(f"no hyperedge {name!r}")


@dataclass(frozen=True)
class Diagnostic:
    block: str
    rule: str
    index: int | None = None
    message: str = ""

    def __str__(self):
        at_ = "" if self.index is None else f" (t={self.index})"
        return f"{self.block}: {self.rule}{at_}: {self.message}" if self.message else f"{self.block}: {self.rule}{at_}"


def _check_coef(c: Coef, T: int) -> str | None:
    if isinstance(c, np.ndarray):
        if c.shape != (T,):
            return f"series coefficient has length {c.shape[0] if c.ndim else 0}, horizon is {T}"
        if not np.all(np.isfinite(c)):
            return "non-finite coefficient"
    elif not math.isfinite(c):
        return "non-finite coefficient"
    return None


def _check_expr(diags, block, label, expr, expansion, T, lookup, hyperedge_members=None):
    """Check references and index ranges of one expression."""
    msg = _check_coef(expr.constant, T)
    if msg:
        diags.append(Diagnostic(block, "invalid coefficient", None, f"{label}: constant: {msg}"))
    for ref, coef in expr.terms.items():
        msg = _check_coef(coef, T)
        if msg:
            diags.append(Diagnostic(block, "invalid coefficient", None, f"{label}: {ref}: {msg}"))
        decl = lookup(ref)
        if decl is None:
            continue
        if hyperedge_members is not None and not decl.external:
            # members are checked separately; report each offending variable once
            if (ref.node, ref.var) not in hyperedge_members:
                diags.append(Diagnostic(block, "hyperedge references non-external variable", None,
                                        f"{label}: {ref.node}.{ref.var}"))
            continue
        if hyperedge_members is not None and (ref.node, ref.var) not in hyperedge_members:
            diags.append(Diagnostic(block, "hyperedge references non-member variable", None,
                                    f"{label}: {ref.node}.{ref.var}"))
        if ref.scalar != (not decl.indexed):
            diags.append(Diagnostic(block, "index shape mismatch", None,
                                    f"{label}: {ref} vs {'time-indexed' if decl.indexed else 'scalar'} declaration"))
            continue
        if ref.scalar:
            continue
        if ref.at is not None:
            if not 0 <= ref.at < T:
                diags.append(Diagnostic(block, "time index out of range", ref.at, f"{label}: {ref}"))
            continue
        if expansion is None:
            diags.append(Diagnostic(block, "relative reference outside expansion", None, f"{label}: {ref}"))
            continue
        for t in expansion:
            if not 0 <= t + ref.shift < T:
                diags.append(Diagnostic(block, "time index out of range", t,
                                        f"{label}: {ref} resolves to {t + ref.shift}"))
                break


def validate_graph(graph: ModelGraph) -> list[Diagnostic]:
    """Structural checks; an empty list means the graph can be assembled."""
    diags: list[Diagnostic] = []
    T = graph.horizon.T
    nodes: dict[str, NodeBlock] = {}
    for n in graph.nodes:
        if n.name in nodes:
            diags.append(Diagnostic(n.name, "duplicate node name"))
        nodes[n.name] = n

    for n in graph.nodes:
        decls: dict[str, VariableDecl] = {}
        for v in n.variables:
            if v.name in decls:
                diags.append(Diagnostic(n.name, "duplicate variable name", None, v.name))
            decls[v.name] = v

        def lookup(ref, n=n, decls=decls):
            if ref.node is not None and ref.node != n.name:
                diags.append(Diagnostic(n.name, "reference to foreign node", None, str(ref)))
                return None
            d = decls.get(ref.var)
            if d is None:
                diags.append(Diagnostic(n.name, "unknown variable", None, str(ref)))
            return d

        for c in n.constraints:
            _check_expansion(diags, n.name, c, T)
            _check_expr(diags, n.name, c.name, c.expr, c.expansion, T, lookup)
        _check_expr(diags, n.name, "objective.fixed", n.objective.fixed, None, T, lookup)
        _check_expr(diags, n.name, "objective.per_period", n.objective.per_period, range(T), T, lookup)
        if isinstance(n.objective.fixed.constant, np.ndarray) or any(
                isinstance(c, np.ndarray) for c in n.objective.fixed.terms.values()):
            diags.append(Diagnostic(n.name, "series coefficient in one-off objective"))

    names = set(nodes)
    for e in graph.hyperedges:
        if e.name in names:
            diags.append(Diagnostic(e.name, "duplicate block name"))
        names.add(e.name)
        if set(e.tail) & set(e.head):
            diags.append(Diagnostic(e.name, "tail and head overlap", None,
                                    ", ".join(f"{a}.{b}" for a, b in sorted(set(e.tail) & set(e.head)))))
        for node_name, var in e.members:
            node = nodes.get(node_name)
            if node is None:
                diags.append(Diagnostic(e.name, "unknown node", None, node_name))
            elif not node.has_variable(var):
                diags.append(Diagnostic(e.name, "unknown variable", None, f"{node_name}.{var}"))
            elif not node.variable(var).external:
                diags.append(Diagnostic(e.name, "hyperedge references non-external variable", None,
                                        f"{node_name}.{var}"))
        members = set(e.members)

        def lookup_edge(ref, e=e):
            if ref.node is None or ref.node not in nodes:
                diags.append(Diagnostic(e.name, "unknown node", None, str(ref)))
                return None
            node = nodes[ref.node]
            if not node.has_variable(ref.var):
                diags.append(Diagnostic(e.name, "unknown variable", None, str(ref)))
                return None
            return node.variable(ref.var)

        for c in e.constraints:
            _check_expansion(diags, e.name, c, T)
            _check_expr(diags, e.name, c.name, c.expr, c.expansion, T, lookup_edge, members)
    return diags


def _check_expansion(diags, block, c: ConstraintBlock, T):
    for t in c.expansion:
        if not 0 <= t < T:
            diags.append(Diagnostic(block, "expansion period out of range", t, c.name))
            break
    if not c.expr.terms:
        diags.append(Diagnostic(block, "constraint without variables", None, c.name))
