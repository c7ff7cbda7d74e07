"""Cost and energy-balance summaries of a solved hub model, and their files."""

from __future__ import annotations

import csv
import io
import json
import math
from collections.abc import Mapping
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..assemble import Solution
from ..blocks import CAPACITY, CHARGE, FLOW_CAPACITY, STOCK_CAPACITY, ConversionSpec, StorageSpec
from ..model import ModelGraph

HHV_METHANE = 15.441  # kWh/kg, i.e. GWh per kt


class ReportError(ValueError):
    pass


@dataclass(frozen=True)
class CostRow:
    node: str
    label: str
    group: str
    annual_cost: float  # M€/yr
    cost_per_mwh: float  # €/MWh of delivered methane


@dataclass(frozen=True)
class CostBreakdown:
    rows: tuple[CostRow, ...]
    demand_twh: float
    years: float
    total_per_mwh: float

    def by_group(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for r in self.rows:
            out[r.group] = out.get(r.group, 0.0) + r.cost_per_mwh
        return out

    def share(self, node: str) -> float:
        for r in self.rows:
            if r.node == node:
                return r.cost_per_mwh / self.total_per_mwh
        raise KeyError(node)

    def row(self, node: str) -> CostRow:
        for r in self.rows:
            if r.node == node:
                return r
        raise KeyError(node)


def cost_breakdown(solution: Solution, graph: ModelGraph, demand_twh: float,
                   groups: Mapping[str, str] | None = None, labels: Mapping[str, str] | None = None) -> CostBreakdown:
    """Per-node annualised cost and its share of the delivered methane cost.

    M€ per TWh equals € per MWh, so the per-node figure is the node's yearly
    cost divided by the yearly demand.
    """
    if not solution.optimal:
        raise ReportError(f"cannot break down costs of a {solution.status} solution")
    if not demand_twh > 0:
        raise ReportError("demand must be positive")
    groups = groups or {}
    labels = labels or {}
    nu = graph.horizon.years
    rows = []
    for node in graph.nodes:
        annual = solution.contributions[node.name] / nu
        rows.append(CostRow(node.name, labels.get(node.name, node.name), groups.get(node.name, "other"),
                            annual, annual / demand_twh))
    total = math.fsum(r.cost_per_mwh for r in rows)
    return CostBreakdown(tuple(rows), float(demand_twh), float(nu), total)


@dataclass(frozen=True)
class FlowRow:
    hyperedge: str
    node: str
    variable: str
    side: str  # "in" for tail members, "out" for head members
    annual: float  # commodity units per year


@dataclass(frozen=True)
class CapacityRow:
    node: str
    kind: str
    capacity: float
    stock_capacity: float | None
    capacity_factor: float | None
    mean_availability: float | None


@dataclass
class BalanceReport:
    flows: tuple[FlowRow, ...]
    capacities: tuple[CapacityRow, ...]
    production: dict[str, float]  # renewable output actually used, GWh/yr
    curtailment: dict[str, float]  # GWh/yr
    delivered_energy: float  # GWh/yr (HHV)
    chain_efficiency: float
    edge_residuals: dict[str, float] = field(default_factory=dict)
    curtailment_floor: dict[str, float] = field(default_factory=dict)

    @property
    def total_curtailment(self) -> float:
        return math.fsum(self.curtailment.values())

    def capacity(self, node: str) -> CapacityRow:
        for r in self.capacities:
            if r.node == node:
                return r
        raise KeyError(node)


def _availability(spec: ConversionSpec, T: int) -> np.ndarray:
    a = spec.availability
    if a is None:
        return np.ones(T)
    return np.broadcast_to(np.asarray(a, dtype=float), (T,))


def _is_renewable(spec) -> bool:
    return isinstance(spec, ConversionSpec) and spec.availability is not None and \
        all(f.direction == "out" for f in spec.flows) and len(spec.flows) == 1


def energy_balance(solution: Solution, graph: ModelGraph, hhv: float = HHV_METHANE,
                   demand_edge: str = "destination_methane") -> BalanceReport:
    """Yearly averages of flows, capacities, curtailment and chain efficiency."""
    hz = graph.horizon
    T, dt, nu = hz.T, hz.dt, hz.years
    values = solution.values
    per_year = lambda series: float(np.sum(series)) * dt / nu  # noqa: E731

    flows = []
    residuals = {}
    for e in graph.hyperedges:
        signed = np.zeros(T)
        for side, members in (("in", e.tail), ("out", e.head)):
            for node, var in members:
                q = values[(node, var)]
                flows.append(FlowRow(e.name, node, var, side, per_year(q)))
                signed += q if side == "in" else -q
        lam = _withdrawal(e, T)
        gap = signed - lam
        spec = e.source
        if spec is not None and getattr(spec, "sense", "eq") == "geq":
            residuals[e.name] = float(max(0.0, -gap.min()))
        else:
            residuals[e.name] = float(np.abs(gap).max())

    caps, production, curtailment, floor = [], {}, {}, {}
    for node in graph.nodes:
        spec = node.source
        if isinstance(spec, ConversionSpec):
            cap = float(values[(node.name, CAPACITY)]) + spec.kappa_existing
            q = values[(node.name, spec.sizing)]
            pi = _availability(spec, T)
            cf = float(np.mean(q)) / cap if cap > 1e-12 else None
            caps.append(CapacityRow(node.name, "conversion", cap, None, cf,
                                    float(np.mean(pi)) if spec.availability is not None else None))
            if _is_renewable(spec):
                production[node.name] = per_year(q)
                spill = pi * cap - q
                curtailment[node.name] = per_year(spill)
                floor[node.name] = float(spill.min())
        elif isinstance(spec, StorageSpec):
            k = float(values[(node.name, FLOW_CAPACITY)]) + spec.kappa_existing
            s = float(values[(node.name, STOCK_CAPACITY)]) + spec.epsilon_existing
            q = values[(node.name, CHARGE)]
            cf = float(np.mean(q)) / k if k > 1e-12 else None
            caps.append(CapacityRow(node.name, "storage", k, s, cf, None))

    delivered = 0.0
    try:
        delivered = per_year(_withdrawal(graph.hyperedge(demand_edge), T)) * hhv
    except KeyError:
        pass
    produced = math.fsum(production.values())
    eff = delivered / produced if produced > 0 else float("nan")
    return BalanceReport(tuple(flows), tuple(caps), production, curtailment, delivered, eff, residuals, floor)


def _withdrawal(edge, T: int) -> np.ndarray:
    spec = edge.source
    lam = getattr(spec, "withdrawal", None)
    if lam is None:
        return np.zeros(T)
    return np.broadcast_to(np.asarray(lam, dtype=float), (T,)).copy()


# -- files ---------------------------------------------------------------------

COST_FILE = "costs.csv"
CAPACITY_FILE = "capacities.csv"
FLOW_FILE = "flows.csv"
SUMMARY_FILE = "summary.json"


def _fmt(v) -> str:
    if v is None:
        return ""
    return repr(float(v))


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def cost_table(b: CostBreakdown) -> str:
    rows = [[r.node, r.label, r.group, _fmt(r.annual_cost), _fmt(r.cost_per_mwh)] for r in b.rows]
    rows.append(["total", "", "", _fmt(math.fsum(r.annual_cost for r in b.rows)), _fmt(b.total_per_mwh)])
    return _csv(["node", "label", "group", "annual_cost_meur", "cost_eur_per_mwh"], rows)


def capacity_table(bal: BalanceReport) -> str:
    rows = [[r.node, r.kind, _fmt(r.capacity), _fmt(r.stock_capacity), _fmt(r.capacity_factor),
             _fmt(r.mean_availability), _fmt(bal.curtailment.get(r.node))] for r in bal.capacities]
    return _csv(["node", "kind", "capacity", "stock_capacity", "capacity_factor", "mean_availability",
                 "curtailment_per_year"], rows)


def flow_table(bal: BalanceReport) -> str:
    rows = [[f.hyperedge, f.node, f.variable, f.side, _fmt(f.annual)] for f in bal.flows]
    return _csv(["hyperedge", "node", "variable", "side", "annual"], rows)


def summary_document(b: CostBreakdown, bal: BalanceReport | None = None, extra: Mapping | None = None) -> dict:
    doc = {"cost": {"demand_twh": b.demand_twh, "years": b.years, "total_per_mwh": b.total_per_mwh,
                    "rows": [asdict(r) for r in b.rows]}}
    if bal is not None:
        doc["balance"] = {
            "chain_efficiency": bal.chain_efficiency, "delivered_energy": bal.delivered_energy,
            "production": bal.production, "curtailment": bal.curtailment,
            "total_curtailment": bal.total_curtailment, "edge_residuals": bal.edge_residuals,
        }
    if extra:
        doc["run"] = dict(extra)
    return doc


def emit_report(breakdown: CostBreakdown, balance: BalanceReport, outdir: str | Path,
                fmt: str = "both", extra: Mapping | None = None) -> list[Path]:
    """Write the cost, capacity and flow tables and/or a JSON summary."""
    if fmt not in ("table", "json", "both"):
        raise ReportError(f"unknown report format {fmt!r}")
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt in ("table", "both"):
        for name, text in ((COST_FILE, cost_table(breakdown)), (CAPACITY_FILE, capacity_table(balance)),
                           (FLOW_FILE, flow_table(balance))):
            (out / name).write_text(text)
            written.append(out / name)
    if fmt in ("json", "both"):
        doc = summary_document(breakdown, balance, extra)
        (out / SUMMARY_FILE).write_text(json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n")
        written.append(out / SUMMARY_FILE)
    return written


def read_cost_breakdown(path: str | Path) -> CostBreakdown:
    doc = json.loads(Path(path).read_text())
    c = doc["cost"]
    rows = tuple(CostRow(**r) for r in c["rows"])
    return CostBreakdown(rows, c["demand_twh"], c["years"], c["total_per_mwh"])
