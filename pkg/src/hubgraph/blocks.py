"""Parameterised node and hyperedge templates.

Conversion and storage technologies become :class:`NodeBlock` objects,
conservation balances become :class:`HyperedgeBlock` objects. Capacity is
a single scalar per node (static investment).
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field, replace

import numpy as np

from .model import (
    EQ,
    EXTERNAL,
    GE,
    INTERNAL,
    LE,
    AffineExpr,
    ConstraintBlock,
    HyperedgeBlock,
    NodeBlock,
    Objective,
    TimeHorizon,
    ValidationError,
    VariableDecl,
    at,
    scalar,
    ts,
)

IN = "in"
OUT = "out"


def annualize_capex(capex: float, lifetime: float, wacc: float) -> float:
    """Annualised investment cost per unit of capacity.

    ``wacc == 0`` is the zero-financing case and reduces to straight-line
    ``capex / lifetime``.
    """
    if not lifetime > 0:
        raise ValidationError(f"lifetime must be positive, got {lifetime!r}")
    if wacc < 0:
        raise ValidationError(f"wacc must be non-negative, got {wacc!r}")
    if wacc == 0:
        return capex / lifetime
    # 1 - (1+w)^-L computed without cancellation for small w
    denom = -math.expm1(-lifetime * math.log1p(wacc))
    return capex * (wacc / denom)


@dataclass(frozen=True)
class CapexSpec:
    capex: float = 0.0
    fom: float = 0.0
    vom: float | np.ndarray = 0.0
    lifetime: float = 1.0
    annualized: float | None = None

    def __post_init__(self):
        for label in ("capex", "fom"):
            v = getattr(self, label)
            if not (v >= 0 and math.isfinite(v)):
                raise ValidationError(f"{label} must be a finite non-negative number, got {v!r}")
        if not self.lifetime > 0:
            raise ValidationError(f"lifetime must be positive, got {self.lifetime!r}")
        if np.any(np.asarray(self.vom) < 0):
            raise ValidationError("vom must be non-negative")

    def annualize(self, wacc: float) -> CapexSpec:
        return replace(self, annualized=annualize_capex(self.capex, self.lifetime, wacc))

    def require_annualized(self, owner: str) -> float:
        if self.annualized is None:
            raise ValidationError(f"{owner}: capex not annualised (call CapexSpec.annualize)")
        return self.annualized


@dataclass(frozen=True)
class Flow:
    commodity: str
    direction: str
    unit: str = ""

    def __post_init__(self):
        if self.direction not in (IN, OUT):
            raise ValidationError(f"flow {self.commodity!r}: direction must be 'in' or 'out'")


def _series(values, T: int, label: str, default: float | None = None):
    """Return a float, or a length-T array; raise on length mismatch."""
    if values is None:
        return default
    if np.isscalar(values):
        return float(values)
    arr = np.asarray(values, dtype=float)
    if arr.shape != (T,):
        raise ValidationError(f"{label}: series length {arr.size} != horizon {T}")
    return arr


@dataclass(frozen=True)
class ConversionSpec:
    """Conversion technology.

    ``phi[i]`` is the number of units of the reference commodity per unit of
    commodity ``i``, so that ``q_r[t] = phi[i] * q_i[t + tau[i]]``.
    """

    name: str
    flows: tuple[Flow, ...]
    reference: str
    sizing: str
    phi: Mapping[str, float] = field(default_factory=dict)
    tau: Mapping[str, int] = field(default_factory=dict)
    availability: Sequence[float] | np.ndarray | float | None = None
    kappa_existing: float = 0.0
    kappa_max: float = math.inf
    mu: float = 0.0
    delta_plus: float | None = None
    delta_minus: float | None = None
    cost: CapexSpec = field(default_factory=CapexSpec)

    def __post_init__(self):
        names = [f.commodity for f in self.flows]
        if len(set(names)) != len(names):
            raise ValidationError(f"{self.name}: duplicate commodity")
        if not names:
            raise ValidationError(f"{self.name}: no commodities")
        for role, c in (("reference", self.reference), ("sizing", self.sizing)):
            if c not in names:
                raise ValidationError(f"{self.name}: {role} commodity {c!r} is not a flow")
        for c in names:
            if c != self.reference and c not in self.phi:
                raise ValidationError(f"{self.name}: missing conversion factor for {c!r}")
        for c, v in self.phi.items():
            if c not in names:
                raise ValidationError(f"{self.name}: conversion factor for unknown commodity {c!r}")
            if not (v > 0 and math.isfinite(v)):
                raise ValidationError(f"{self.name}: conversion factor for {c!r} must be positive")
        if self.reference in self.phi and self.phi[self.reference] != 1.0:
            raise ValidationError(f"{self.name}: reference commodity factor must be 1")
        for c, d in self.tau.items():
            if c not in names:
                raise ValidationError(f"{self.name}: delay for unknown commodity {c!r}")
            if int(d) != d or d < 0:
                raise ValidationError(f"{self.name}: delay for {c!r} must be a non-negative integer")
        if self.tau.get(self.reference, 0):
            raise ValidationError(f"{self.name}: the reference commodity cannot be delayed")
        if not 0 <= self.mu <= 1:
            raise ValidationError(f"{self.name}: mu must lie in [0, 1]")
        for label in ("delta_plus", "delta_minus"):
            v = getattr(self, label)
            if v is not None and not 0 <= v <= 1:
                raise ValidationError(f"{self.name}: {label} must lie in [0, 1]")
        if self.kappa_existing < 0:
            raise ValidationError(f"{self.name}: existing capacity must be non-negative")
        if self.kappa_max < self.kappa_existing:
            raise ValidationError(f"{self.name}: maximum capacity below existing capacity")
        if self.availability is not None:
            a = np.asarray(self.availability, dtype=float)
            if np.any(a < 0) or np.any(a > 1) or not np.all(np.isfinite(a)):
                raise ValidationError(f"{self.name}: availability must lie in [0, 1]")

    def factor(self, commodity: str) -> float:
        return 1.0 if commodity == self.reference else float(self.phi[commodity])

    def delay(self, commodity: str) -> int:
        return int(self.tau.get(commodity, 0))

    @property
    def commodities(self) -> list[str]:
        return [f.commodity for f in self.flows]


@dataclass(frozen=True)
class StorageSpec:
    name: str
    commodity: str = ""
    unit: str = ""
    auxiliary: str | None = None
    phi_aux: float = 0.0
    eta_s: float = 0.0
    eta_plus: float = 1.0
    eta_minus: float = 1.0
    sigma: float = 0.0
    rho: float = 1.0
    epsilon_existing: float = 0.0
    epsilon_max: float = math.inf
    kappa_existing: float = 0.0
    kappa_max: float = math.inf
    stock_cost: CapexSpec = field(default_factory=CapexSpec)
    flow_cost: CapexSpec = field(default_factory=CapexSpec)

    def __post_init__(self):
        for label in ("eta_s", "eta_plus", "eta_minus", "sigma"):
            v = getattr(self, label)
            if not 0 <= v <= 1:
                raise ValidationError(f"{self.name}: {label} must lie in [0, 1]")
        if self.eta_minus == 0:
            raise ValidationError(f"{self.name}: eta_minus must be positive")
        if not self.rho > 0:
            raise ValidationError(f"{self.name}: rho must be positive")
        if self.auxiliary is not None:
            if self.auxiliary in (CHARGE, DISCHARGE) or not self.auxiliary:
                raise ValidationError(f"{self.name}: invalid auxiliary commodity name {self.auxiliary!r}")
            if not self.phi_aux >= 0:
                raise ValidationError(f"{self.name}: auxiliary factor must be non-negative")
        if self.epsilon_max < self.epsilon_existing:
            raise ValidationError(f"{self.name}: maximum stock below existing stock")
        if self.kappa_max < self.kappa_existing:
            raise ValidationError(f"{self.name}: maximum flow capacity below existing capacity")
        if self.epsilon_existing < 0 or self.kappa_existing < 0:
            raise ValidationError(f"{self.name}: existing capacities must be non-negative")


@dataclass(frozen=True)
class ConservationSpec:
    name: str
    tail: tuple[tuple[str, str], ...] = ()
    head: tuple[tuple[str, str], ...] = ()
    withdrawal: float | Sequence[float] | np.ndarray | None = None
    sense: str = "eq"

    def __post_init__(self):
        if not self.tail and not self.head:
            raise ValidationError(f"{self.name}: hyperedge without members")
        if self.sense not in ("eq", "geq"):
            raise ValidationError(f"{self.name}: sense must be 'eq' or 'geq'")


# variable names used by the templates
CAPACITY = "capacity"
CHARGE = "charge"
DISCHARGE = "discharge"
INVENTORY = "inventory"
STOCK_CAPACITY = "stock_capacity"
FLOW_CAPACITY = "flow_capacity"


def build_conversion_node(spec: ConversionSpec, horizon: TimeHorizon) -> NodeBlock:
    T = horizon.T
    if CAPACITY in spec.commodities:
        raise ValidationError(f"{spec.name}: commodity name {CAPACITY!r} is reserved")
    pi = _series(spec.availability, T, f"{spec.name}.availability", default=1.0)
    vom = _series(spec.cost.vom, T, f"{spec.name}.vom", default=0.0)
    zeta = spec.cost.require_annualized(spec.name)

    variables = [VariableDecl(f.commodity, EXTERNAL, True, unit=f.unit) for f in spec.flows]
    variables.append(VariableDecl(CAPACITY, INTERNAL, False))
    K = scalar(CAPACITY)
    kappa = spec.kappa_existing
    rows: list[ConstraintBlock] = []

    r = spec.reference
    for c in spec.commodities:
        if c == r:
            continue
        d = spec.delay(c)
        if d < T:
            rows.append(ConstraintBlock(f"conversion[{c}]", ts(r) - spec.factor(c) * ts(c, d), EQ, range(T - d)))
        if d:
            # nothing is in transit before the horizon starts
            rows.append(ConstraintBlock(f"cold_start[{c}]", ts(c), EQ, range(min(d, T))))

    rows.append(ConstraintBlock("sizing", ts(spec.sizing) - pi * K - pi * kappa, LE, range(T)))
    if math.isfinite(spec.kappa_max):
        rows.append(ConstraintBlock("capacity_bound", K + (kappa - spec.kappa_max), LE, (0,)))

    phi_s = spec.factor(spec.sizing)
    if spec.mu > 0:
        for c in spec.commodities:
            scale = spec.factor(c) / phi_s
            rows.append(ConstraintBlock(f"min_level[{c}]", spec.mu * K + spec.mu * kappa - scale * ts(c), LE, range(T)))
    if spec.delta_plus is not None and spec.delta_plus < 1 and T > 1:
        for c in spec.commodities:
            scale = spec.factor(c) / phi_s
            expr = scale * (ts(c) - ts(c, -1)) - spec.delta_plus * K - spec.delta_plus * kappa
            rows.append(ConstraintBlock(f"ramp_up[{c}]", expr, LE, range(1, T)))
    if spec.delta_minus is not None and spec.delta_minus < 1 and T > 1:
        for c in spec.commodities:
            scale = spec.factor(c) / phi_s
            expr = scale * (ts(c, -1) - ts(c)) - spec.delta_minus * K - spec.delta_minus * kappa
            rows.append(ConstraintBlock(f"ramp_down[{c}]", expr, LE, range(1, T)))

    objective = Objective(
        fixed=horizon.years * (zeta + spec.cost.fom) * K,
        per_period=_vom_term(vom, horizon.dt, spec.sizing),
    )
    return NodeBlock(spec.name, tuple(variables), tuple(rows), objective, kind="conversion", source=spec)


def _vom_term(vom, factor: float, var: str) -> AffineExpr:
    if isinstance(vom, np.ndarray):
        return (vom * factor) * ts(var)
    if vom == 0:
        return AffineExpr()
    return (vom * factor) * ts(var)


def build_storage_node(spec: StorageSpec, horizon: TimeHorizon) -> NodeBlock:
    T = horizon.T
    theta_v = _series(spec.flow_cost.vom, T, f"{spec.name}.flow.vom", default=0.0)
    vartheta_v = _series(spec.stock_cost.vom, T, f"{spec.name}.stock.vom", default=0.0)
    zeta = spec.flow_cost.require_annualized(spec.name + " (flow)")
    varsigma = spec.stock_cost.require_annualized(spec.name + " (stock)")

    variables = [
        VariableDecl(CHARGE, EXTERNAL, True, unit=spec.unit),
        VariableDecl(DISCHARGE, EXTERNAL, True, unit=spec.unit),
    ]
    if spec.auxiliary is not None:
        variables.append(VariableDecl(spec.auxiliary, EXTERNAL, True))
    variables += [
        VariableDecl(INVENTORY, INTERNAL, True),
        VariableDecl(STOCK_CAPACITY, INTERNAL, False),
        VariableDecl(FLOW_CAPACITY, INTERNAL, False),
    ]
    E = scalar(STOCK_CAPACITY)
    K = scalar(FLOW_CAPACITY)
    eps = spec.epsilon_existing
    kappa = spec.kappa_existing
    rows: list[ConstraintBlock] = []

    if T > 1:
        dyn = (ts(INVENTORY, 1) - (1 - spec.eta_s) * ts(INVENTORY)
               - spec.eta_plus * ts(CHARGE) + (1 / spec.eta_minus) * ts(DISCHARGE))
        rows.append(ConstraintBlock("dynamics", dyn, EQ, range(T - 1)))
    if spec.auxiliary is not None:
        rows.append(ConstraintBlock("auxiliary", ts(spec.auxiliary) - spec.phi_aux * ts(CHARGE), EQ, range(T)))
    if T > 1:
        rows.append(ConstraintBlock("cyclicity", at(INVENTORY, 0) - at(INVENTORY, T - 1), EQ, (0,)))
    rows.append(ConstraintBlock("stock_sizing", ts(INVENTORY) - E - eps, LE, range(T)))
    if math.isfinite(spec.epsilon_max):
        rows.append(ConstraintBlock("stock_bound", E + (eps - spec.epsilon_max), LE, (0,)))
    if spec.sigma > 0:
        rows.append(ConstraintBlock("min_inventory", spec.sigma * E + spec.sigma * eps - ts(INVENTORY), LE, range(T)))
    rows.append(ConstraintBlock("charge_sizing", ts(CHARGE) - K - kappa, LE, range(T)))
    rows.append(ConstraintBlock("discharge_sizing", ts(DISCHARGE) - spec.rho * K - spec.rho * kappa, LE, range(T)))
    if math.isfinite(spec.kappa_max):
        rows.append(ConstraintBlock("flow_bound", K + (kappa - spec.kappa_max), LE, (0,)))

    nu = horizon.years
    fixed = nu * (varsigma + spec.stock_cost.fom) * E + nu * (zeta + spec.flow_cost.fom) * K
    per_period = AffineExpr()
    if isinstance(vartheta_v, np.ndarray) or vartheta_v != 0:
        # inventory VOM carries no period-length factor, unlike flow VOM
        per_period = per_period + vartheta_v * ts(INVENTORY)
    per_period = per_period + _vom_term(theta_v, horizon.dt, CHARGE)
    return NodeBlock(spec.name, tuple(variables), tuple(rows), Objective(fixed, per_period),
                     kind="storage", source=spec)


def build_conservation_hyperedge(spec: ConservationSpec, horizon: TimeHorizon,
                                 nodes: Mapping[str, NodeBlock] | None = None) -> HyperedgeBlock:
    T = horizon.T
    lam = _series(spec.withdrawal, T, f"{spec.name}.withdrawal", default=0.0)
    if set(spec.tail) & set(spec.head):
        raise ValidationError(f"{spec.name}: tail and head overlap")
    if nodes is not None:
        for node, var in spec.tail + spec.head:
            n = nodes.get(node)
            if n is None:
                raise ValidationError(f"{spec.name}: unknown node {node!r}")
            if not n.has_variable(var) or not n.variable(var).external:
                raise ValidationError(f"{spec.name}: no external variable {var!r} on node {node!r}")
    expr = AffineExpr()
    for node, var in spec.tail:
        expr = expr + ts(var, node=node)
    for node, var in spec.head:
        expr = expr - ts(var, node=node)
    expr = expr - lam
    sense = EQ if spec.sense == "eq" else GE
    return HyperedgeBlock(spec.name, tuple(spec.tail), tuple(spec.head),
                          (ConstraintBlock("balance", expr, sense, range(T)),),
                          kind="conservation", source=spec)


def conversion_row_count(spec: ConversionSpec, T: int) -> int:
    """Number of LP rows the conversion template emits (used by tests and docs)."""
    m = len(spec.flows)
    n = 0
    for c in spec.commodities:
        if c != spec.reference:
            n += T  # conversion rows plus cold-start rows
    n += T + (1 if math.isfinite(spec.kappa_max) else 0)
    if spec.mu > 0:
        n += m * T
    for d in (spec.delta_plus, spec.delta_minus):
        if d is not None and d < 1 and T > 1:
            n += m * (T - 1)
    return n


def storage_row_count(spec: StorageSpec, T: int) -> int:
    n = (T - 1) + (1 if T > 1 else 0) + 3 * T
    n += T if spec.auxiliary is not None else 0
    n += T if spec.sigma > 0 else 0
    n += 1 if math.isfinite(spec.epsilon_max) else 0
    n += 1 if math.isfinite(spec.kappa_max) else 0
    return n


def column_count(node: NodeBlock, T: int) -> int:
    return sum(T if v.indexed else 1 for v in node.variables)
