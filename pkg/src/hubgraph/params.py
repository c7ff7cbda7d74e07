"""Named-parameter view of the templates.

Both the text front end and the Python case builder describe nodes as flat
dictionaries such as ``{"capex": 600.0, "ratio.water": 9.0, "stock.fom": 2.25}``.
This module checks those dictionaries, applies scenario overrides to them and
turns them into annualised template specs.

Conversion factors come in two spellings.  ``ratio.<c>`` is units of ``c`` per
unit of the reference commodity (the way technology tables are written) and
``phi.<c>`` is its reciprocal, the factor used by the conversion rows.  A zero
ratio removes the commodity from the node.
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from .blocks import (IN, OUT, CapexSpec, ConservationSpec, ConversionSpec, Flow, StorageSpec,
                     build_conservation_hyperedge, build_conversion_node, build_storage_node)
from .model import ModelGraph, TimeHorizon

CONVERSION = "conversion"
STORAGE = "storage"
CONSERVATION = "conservation"
KINDS = (CONVERSION, STORAGE, CONSERVATION)

_COMMON = {"wacc", "group", "label"}
CONVERSION_KEYS = _COMMON | {
    "inputs", "outputs", "reference", "sizing", "mu", "delta", "delta_plus", "delta_minus",
    "capex", "fom", "vom", "lifetime", "kappa_max", "kappa_existing", "availability",
}
CONVERSION_PREFIXES = ("phi.", "ratio.", "tau.", "unit.")
STORAGE_KEYS = _COMMON | {
    "commodity", "unit", "auxiliary", "eta_s", "eta_plus", "eta_minus", "sigma", "rho",
    "epsilon_max", "epsilon_existing", "kappa_max", "kappa_existing",
    "stock.capex", "stock.fom", "stock.vom", "stock.lifetime",
    "flow.capex", "flow.fom", "flow.vom", "flow.lifetime",
}
STORAGE_PREFIXES = ("phi.",)
CONSERVATION_KEYS = {"tail", "head", "sense", "withdrawal", "label"}

DEFAULTS = {
    CONVERSION: {"mu": 0.0, "fom": 0.0, "vom": 0.0, "kappa_existing": 0.0, "kappa_max": math.inf},
    STORAGE: {"eta_s": 0.0, "eta_plus": 1.0, "eta_minus": 1.0, "sigma": 0.0, "rho": 1.0,
              "epsilon_existing": 0.0, "epsilon_max": math.inf, "kappa_existing": 0.0, "kappa_max": math.inf,
              "stock.fom": 0.0, "stock.vom": 0.0, "flow.capex": 0.0, "flow.fom": 0.0, "flow.vom": 0.0},
    CONSERVATION: {"sense": "eq", "withdrawal": 0.0},
}


class ParamError(ValueError):
    def __init__(self, message: str, key: str | None = None):
        self.key = key
        super().__init__(message)


def known_key(kind: str, key: str) -> bool:
    if kind == CONVERSION:
        return key in CONVERSION_KEYS or (key.startswith(CONVERSION_PREFIXES) and key.count(".") == 1
                                          and len(key.split(".")[1]) > 0)
    if kind == STORAGE:
        return key in STORAGE_KEYS or (key.startswith(STORAGE_PREFIXES) and key.count(".") == 1
                                       and len(key.split(".")[1]) > 0)
    if kind == CONSERVATION:
        return key in CONSERVATION_KEYS
    raise ParamError(f"unknown template kind {kind!r}")


def unknown_keys(kind: str, params: Mapping) -> list[str]:
    return [k for k in params if not known_key(kind, k)]


def apply_override(kind: str, params: dict, key: str, op: str, value):
    """Apply ``key = value`` or ``key *= value`` in place."""
    if not known_key(kind, key):
        raise ParamError(f"unknown parameter {key!r} for a {kind} node", key)
    if op == "=":
        params[key] = value
        return
    if op != "*=":
        raise ParamError(f"unknown override operator {op!r}", key)
    if key in params:
        current = params[key]
    elif key in DEFAULTS.get(kind, {}):
        current = DEFAULTS[kind][key]
    else:
        raise ParamError(f"cannot scale unset parameter {key!r}", key)
    if isinstance(current, (str, list, tuple)) or isinstance(value, (str, list, tuple)):
        raise ParamError(f"'*=' needs numeric operands for {key!r}", key)
    params[key] = current * value


def _num(params: Mapping, key: str, kind: str, required: bool = False) -> float:
    if key not in params:
        if required:
            raise ParamError(f"missing required parameter {key!r}", key)
        return DEFAULTS[kind][key]
    v = params[key]
    if isinstance(v, (bool, str, list, tuple, np.ndarray)):
        raise ParamError(f"parameter {key!r} must be a number", key)
    return float(v)


def _names(params: Mapping, key: str) -> list[str]:
    v = params.get(key, [])
    if isinstance(v, str):
        return [v]
    if not isinstance(v, (list, tuple)) or not all(isinstance(x, str) for x in v):
        raise ParamError(f"parameter {key!r} must be a list of commodity names", key)
    return list(v)


def _wacc(params: Mapping, default: float) -> float:
    w = params.get("wacc", default)
    if isinstance(w, (str, list, tuple, np.ndarray)):
        raise ParamError("parameter 'wacc' must be a number", "wacc")
    return float(w)


def _series_or_number(v, key: str):
    if isinstance(v, np.ndarray):
        return v
    if isinstance(v, (bool, str, list, tuple)):
        raise ParamError(f"parameter {key!r} must be a number or a series", key)
    return float(v)


def conversion_spec(name: str, params: Mapping, wacc: float) -> ConversionSpec:
    bad = unknown_keys(CONVERSION, params)
    if bad:
        raise ParamError(f"unknown parameter {bad[0]!r} for conversion node {name!r}", bad[0])
    inputs = _names(params, "inputs")
    outputs = _names(params, "outputs")
    if not inputs and not outputs:
        raise ParamError(f"conversion node {name!r} needs 'inputs' or 'outputs'", "outputs")
    both = set(inputs) & set(outputs)
    if both:
        raise ParamError(f"commodity {sorted(both)[0]!r} is both input and output", "inputs")
    flows_all = [(c, IN) for c in inputs] + [(c, OUT) for c in outputs]
    names = [c for c, _ in flows_all]
    if len(set(names)) != len(names):
        raise ParamError(f"conversion node {name!r} lists a commodity twice", "inputs")

    missing = [k for k in ("capex", "lifetime") if k not in params]
    if len(names) > 1:
        missing += [k for k in ("reference", "sizing") if k not in params]
    if missing:
        raise ParamError(f"conversion node {name!r} is missing required parameter(s): {', '.join(missing)}",
                         missing[0])
    reference = params.get("reference", names[0])
    sizing = params.get("sizing", reference)
    for role, c in (("reference", reference), ("sizing", sizing)):
        if not isinstance(c, str) or c not in names:
            raise ParamError(f"{role} {c!r} of {name!r} is not one of its commodities", role)

    phi: dict[str, float] = {}
    dropped = set()
    for c in names:
        if c == reference:
            for pre in ("phi.", "ratio."):
                if pre + c in params and float(params[pre + c]) != 1.0:
                    raise ParamError(f"the reference commodity of {name!r} has factor 1 by definition", pre + c)
            continue
        has_phi, has_ratio = ("phi." + c) in params, ("ratio." + c) in params
        if has_phi and has_ratio:
            raise ParamError(f"give either phi.{c} or ratio.{c} for {name!r}, not both", "phi." + c)
        if not (has_phi or has_ratio):
            raise ParamError(f"conversion node {name!r} is missing required parameter(s): ratio.{c}", "ratio." + c)
        if has_ratio:
            ratio = _num(params, "ratio." + c, CONVERSION, required=True)
            if ratio < 0:
                raise ParamError(f"ratio.{c} must be non-negative", "ratio." + c)
            if ratio == 0:
                dropped.add(c)
                continue
            phi[c] = 1.0 / ratio
        else:
            phi[c] = _num(params, "phi." + c, CONVERSION, required=True)
    for key in params:
        if key.startswith(("phi.", "ratio.", "tau.", "unit.")) and key.split(".", 1)[1] not in names:
            raise ParamError(f"{key!r} refers to a commodity {name!r} does not have", key)
    if sizing in dropped:
        raise ParamError(f"the sizing commodity of {name!r} cannot be removed", "ratio." + sizing)
    tau = {}
    for c in names:
        if "tau." + c in params and c not in dropped:
            d = _num(params, "tau." + c, CONVERSION, required=True)
            if d != int(d) or d < 0:
                raise ParamError(f"tau.{c} must be a non-negative integer", "tau." + c)
            tau[c] = int(d)
    flows = tuple(Flow(c, d, str(params.get("unit." + c, ""))) for c, d in flows_all if c not in dropped)

    delta = params.get("delta")
    dp = params.get("delta_plus", delta)
    dm = params.get("delta_minus", delta)
    cost = CapexSpec(
        capex=_num(params, "capex", CONVERSION, True),
        fom=_num(params, "fom", CONVERSION),
        vom=_series_or_number(params.get("vom", 0.0), "vom"),
        lifetime=_num(params, "lifetime", CONVERSION, True),
    ).annualize(_wacc(params, wacc))
    avail = params.get("availability")
    return ConversionSpec(
        name=name, flows=flows, reference=reference, sizing=sizing, phi=phi, tau=tau,
        availability=None if avail is None else _series_or_number(avail, "availability"),
        kappa_existing=_num(params, "kappa_existing", CONVERSION),
        kappa_max=_num(params, "kappa_max", CONVERSION),
        mu=_num(params, "mu", CONVERSION),
        delta_plus=None if dp is None else float(dp),
        delta_minus=None if dm is None else float(dm),
        cost=cost,
    )


def storage_spec(name: str, params: Mapping, wacc: float) -> StorageSpec:
    bad = unknown_keys(STORAGE, params)
    if bad:
        raise ParamError(f"unknown parameter {bad[0]!r} for storage node {name!r}", bad[0])
    missing = [k for k in ("commodity", "stock.capex", "stock.lifetime") if k not in params]
    if missing:
        raise ParamError(f"storage node {name!r} is missing required parameter(s): {', '.join(missing)}",
                         missing[0])
    aux = params.get("auxiliary")
    if aux is not None and not isinstance(aux, str):
        raise ParamError("parameter 'auxiliary' must be a commodity name", "auxiliary")
    for key in params:
        if key.startswith("phi.") and key != f"phi.{aux}":
            raise ParamError(f"{key!r} does not name the auxiliary commodity of {name!r}", key)
    if aux is not None and f"phi.{aux}" not in params:
        raise ParamError(f"storage node {name!r} is missing required parameter(s): phi.{aux}", f"phi.{aux}")
    w = _wacc(params, wacc)
    stock_life = _num(params, "stock.lifetime", STORAGE, True)
    stock = CapexSpec(
        capex=_num(params, "stock.capex", STORAGE, True),
        fom=_num(params, "stock.fom", STORAGE),
        vom=_series_or_number(params.get("stock.vom", 0.0), "stock.vom"),
        lifetime=stock_life,
    ).annualize(w)
    flow = CapexSpec(
        capex=_num(params, "flow.capex", STORAGE),
        fom=_num(params, "flow.fom", STORAGE),
        vom=_series_or_number(params.get("flow.vom", 0.0), "flow.vom"),
        lifetime=float(params["flow.lifetime"]) if "flow.lifetime" in params else stock_life,
    ).annualize(w)
    commodity = params["commodity"]
    if not isinstance(commodity, str):
        raise ParamError("parameter 'commodity' must be a name", "commodity")
    return StorageSpec(
        name=name, commodity=commodity, unit=str(params.get("unit", "")),
        auxiliary=aux, phi_aux=float(params[f"phi.{aux}"]) if aux is not None else 0.0,
        eta_s=_num(params, "eta_s", STORAGE), eta_plus=_num(params, "eta_plus", STORAGE),
        eta_minus=_num(params, "eta_minus", STORAGE), sigma=_num(params, "sigma", STORAGE),
        rho=_num(params, "rho", STORAGE),
        epsilon_existing=_num(params, "epsilon_existing", STORAGE),
        epsilon_max=_num(params, "epsilon_max", STORAGE),
        kappa_existing=_num(params, "kappa_existing", STORAGE),
        kappa_max=_num(params, "kappa_max", STORAGE),
        stock_cost=stock, flow_cost=flow,
    )


@dataclass
class SystemParams:
    """Nodes and hyperedges as parameter dictionaries, in build order."""

    nodes: dict[str, tuple[str, dict]] = field(default_factory=dict)
    edges: dict[str, dict] = field(default_factory=dict)

    def copy(self) -> SystemParams:
        return SystemParams({k: (kind, dict(p)) for k, (kind, p) in self.nodes.items()},
                            {k: dict(p) for k, p in self.edges.items()})

    def override(self, path: str, op: str, value):
        """Apply ``node.key op value`` (or ``hyperedge.key``)."""
        name, _, key = path.partition(".")
        if not key:
            raise ParamError(f"override target {path!r} must be NODE.PARAMETER", path)
        if name in self.nodes:
            kind, params = self.nodes[name]
            apply_override(kind, params, key, op, value)
        elif name in self.edges:
            apply_override(CONSERVATION, self.edges[name], key, op, value)
        else:
            raise ParamError(f"override target {name!r} is not a node or hyperedge", path)

    def group(self, node: str) -> str:
        return self.nodes[node][1].get("group", "")

    def label(self, node: str) -> str:
        return self.nodes[node][1].get("label", node)


def _removed_commodities(kind: str, params: Mapping) -> set[str]:
    if kind != CONVERSION:
        return set()
    return {k.split(".", 1)[1] for k, v in params.items()
            if k.startswith("ratio.") and not isinstance(v, (str, list, tuple)) and float(v) == 0.0}


def build_graph(system: SystemParams, horizon: TimeHorizon, wacc: float) -> ModelGraph:
    """Turn parameter dictionaries into a validated-ready model graph.

    Hyperedge members naming a commodity that a zero ratio removed from its
    node are dropped from the hyperedge.
    """
    nodes = []
    removed = set()
    for name, (kind, params) in system.nodes.items():
        if kind == CONVERSION:
            nodes.append(build_conversion_node(conversion_spec(name, params, wacc), horizon))
        elif kind == STORAGE:
            nodes.append(build_storage_node(storage_spec(name, params, wacc), horizon))
        else:
            raise ParamError(f"node {name!r} has unknown kind {kind!r}")
        removed |= {(name, c) for c in _removed_commodities(kind, params)}
    by_name = {n.name: n for n in nodes}
    edges = []
    for name, p in system.edges.items():
        tail = tuple(m for m in p.get("tail", ()) if tuple(m) not in removed)
        head = tuple(m for m in p.get("head", ()) if tuple(m) not in removed)
        spec = ConservationSpec(name, tuple(map(tuple, tail)), tuple(map(tuple, head)),
                                p.get("withdrawal"), p.get("sense", "eq"))
        edges.append(build_conservation_hyperedge(spec, horizon, by_name))
    return ModelGraph(horizon, tuple(nodes), tuple(edges))
