"""Semantic pass: turn a syntax tree into a validated model graph."""

from __future__ import annotations

import difflib
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..blocks import ConservationSpec, build_conservation_hyperedge, build_conversion_node, build_storage_node
from ..case.series import SeriesError, build_vessel_schedule, load_series
from ..model import ModelGraph, TimeHorizon, ValidationError, validate_graph
from ..params import (CONSERVATION, CONSERVATION_KEYS, CONVERSION, CONVERSION_KEYS, STORAGE, STORAGE_KEYS,
                      ParamError, SystemParams, conversion_spec, known_key, storage_spec)
from .diagnostics import ERROR, Diagnostic, DslError, Span, error, warning
from .parser import parse_source
from .tree import Assignment, Ast, Call, ListValue, Name, Number, String

ZERO_FINANCING = "zero_financing"
NODE_KINDS = (CONVERSION, STORAGE)
EDGE_KINDS = (CONSERVATION,)

_NAME_KEYS = {"reference", "sizing", "commodity", "auxiliary", "sense"}
_NAME_LIST_KEYS = {"inputs", "outputs"}
_TEXT_KEYS = {"label", "group", "unit"}
_SERIES_KEYS = {"availability", "vom", "stock.vom", "flow.vom", "withdrawal"}
_MEMBER_KEYS = {"tail", "head"}
_HORIZON_KEYS = ("T", "dt", "years")
_SETTINGS = ("wacc",)


@dataclass
class ResolvedModel:
    graph: ModelGraph
    system: SystemParams
    wacc: float
    scenario: str | None = None
    series: dict = field(default_factory=dict)
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def warnings(self) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.severity != ERROR]


class _Abort(Exception):
    pass


class Resolver:
    def __init__(self, ast: Ast, base_dir: str | Path = ".", scenario: str | None = None):
        self.ast = ast
        self.base_dir = Path(base_dir)
        self.scenario = scenario
        self.diags: list[Diagnostic] = []
        self.series: dict[str, np.ndarray] = {}
        self.wacc_declared = False

    def err(self, message: str, span: Span | None):
        self.diags.append(error(message, span))

    # -- value conversion ----------------------------------------------------------
    def convert(self, key: str, value, span: Span | None, kind: str):
        """Python value for parameter ``key``; records a diagnostic and returns None on mismatch."""
        leaf = key.rsplit(".", 1)[-1] if key.startswith(("stock.", "flow.")) else key
        vspan = getattr(value, "span", None) or span
        if key in _NAME_LIST_KEYS:
            items = value.items if isinstance(value, ListValue) else (value,)
            if all(isinstance(i, Name) and len(i.parts) == 1 for i in items):
                return [i.parts[0] for i in items]
            self.err(f"parameter {key!r} expects a list of commodity names", vspan)
            return None
        if key in _MEMBER_KEYS:
            items = value.items if isinstance(value, ListValue) else (value,)
            out = []
            for i in items:
                if not (isinstance(i, Name) and len(i.parts) == 2):
                    self.err(f"parameter {key!r} expects members written NODE.VARIABLE",
                             getattr(i, "span", None) or vspan)
                    return None
                out.append((i.parts[0], i.parts[1], i.span))
            return out
        if key in _NAME_KEYS:
            if isinstance(value, Name) and len(value.parts) == 1:
                return value.parts[0]
            self.err(f"parameter {key!r} expects a name", vspan)
            return None
        if key in _TEXT_KEYS or key.startswith("unit."):
            if isinstance(value, String):
                return value.value
            self.err(f"parameter {key!r} expects a string", vspan)
            return None
        if isinstance(value, Number):
            return value.value
        if isinstance(value, Name) and len(value.parts) == 1:
            word = value.parts[0]
            if word == "inf":
                return math.inf
            if key in _SERIES_KEYS or leaf in _SERIES_KEYS:
                if word in self.series:
                    return self.series[word]
                self.err(f"unknown series {word!r}", vspan)
                return None
        what = "a number or a series name" if key in _SERIES_KEYS or leaf in _SERIES_KEYS else "a number"
        self.err(f"parameter {key!r} expects {what}", vspan)
        return None

    def _unknown(self, kind: str, key: str, owner: str, span):
        pool = {CONVERSION: CONVERSION_KEYS, STORAGE: STORAGE_KEYS, CONSERVATION: CONSERVATION_KEYS}[kind]
        hint = difflib.get_close_matches(key, sorted(pool), n=1)
        more = f" (did you mean {hint[0]!r}?)" if hint else ""
        self.err(f"unknown parameter {key!r} for {kind} {owner!r}{more}", span)

    # -- passes ----------------------------------------------------------------------
    def horizon(self) -> TimeHorizon:
        h = self.ast.horizon
        if h is None:
            self.err("missing horizon declaration", None)
            raise _Abort
        vals = {}
        for a in h.assignments:
            if a.key not in _HORIZON_KEYS:
                self.err(f"unknown horizon parameter {a.key!r}; expected T, dt or years", a.span)
                continue
            if a.key in vals:
                self.err(f"horizon parameter {a.key!r} assigned twice", a.span)
                continue
            if not isinstance(a.value, Number):
                self.err(f"horizon parameter {a.key!r} expects a number", a.span)
                continue
            vals[a.key] = (a.value.value, a.span)
        if "T" not in vals:
            self.err("horizon is missing required parameter(s): T", h.span)
            raise _Abort
        T, span = vals["T"]
        if T != int(T) or T < 1:
            self.err(f"T must be a positive integer, got {T!r}", span)
            raise _Abort
        try:
            return TimeHorizon(int(T), vals.get("dt", (1.0, None))[0], vals.get("years", (1.0, None))[0])
        except ValidationError as exc:
            self.err(str(exc), h.span)
            raise _Abort from None

    def settings(self) -> float | None:
        wacc = None
        for s in self.ast.settings:
            a = s.assignment
            if a.key not in _SETTINGS:
                self.err(f"unknown setting {a.key!r}; only 'wacc' may be set at file level", a.span)
                continue
            if self.wacc_declared:
                self.err("setting 'wacc' assigned twice", a.span)
                continue
            self.wacc_declared = True
            wacc = self._wacc_value(a)
        return wacc

    def _wacc_value(self, a: Assignment) -> float | None:
        if isinstance(a.value, Name) and a.value.dotted == ZERO_FINANCING:
            return 0.0
        if isinstance(a.value, Number) and 0 <= a.value.value < 1:
            return a.value.value
        self.err(f"wacc expects a rate in [0, 1) or {ZERO_FINANCING}", a.span)
        return None

    def load_series(self, T: int):
        for d in self.ast.series:
            if d.name in self.series:
                self.err(f"duplicate series name {d.name!r}", d.span)
                continue
            try:
                self.series[d.name] = self._source(d.source, T)
            except (SeriesError, ValueError, TypeError) as exc:
                self.err(str(exc), d.source.span or d.span)

    def _source(self, c: Call, T: int) -> np.ndarray:
        def num(v, what):
            if not isinstance(v, Number):
                raise ValueError(f"{c.func}: {what} must be a number")
            return v.value

        def integer(v, what):
            x = num(v, what)
            if x != int(x):
                raise ValueError(f"{c.func}: {what} must be an integer")
            return int(x)

        kw = dict(c.kwargs)
        if c.func == "csv":
            if len(c.args) != 2 or not all(isinstance(a, String) for a in c.args) or set(kw) - {"start"}:
                raise ValueError('csv expects ("path", "column") and optionally start = N')
            start = integer(kw["start"], "start") if "start" in kw else 0
            if start < 0:
                raise ValueError("csv: start must be non-negative")
            path = self.base_dir / c.args[0].value
            return load_series(path, c.args[1].value, T, start).values
        if c.func == "vessel_schedule":
            if len(c.args) != 3 or kw:
                raise ValueError("vessel_schedule expects (vessels, cycle_hours, load_window_hours)")
            n, cycle, window = (integer(a, w) for a, w in zip(c.args, ("vessels", "cycle_hours", "load_window")))
            return build_vessel_schedule(n, cycle, window, T).values
        if c.func == "constant":
            if len(c.args) != 1 or kw:
                raise ValueError("constant expects one number")
            v = num(c.args[0], "value")
            if not math.isfinite(v):
                raise ValueError("constant: value must be finite")
            return np.full(T, float(v))
        raise ValueError(f"unknown series source {c.func!r}; expected csv, vessel_schedule or constant")

    def system(self) -> tuple[SystemParams, dict]:
        """Parameter dictionaries plus the spans of every assignment."""
        system = SystemParams()
        spans: dict[tuple[str, str], Span | None] = {}
        for d in self.ast.nodes:
            if d.kind not in NODE_KINDS:
                self.err(f"unknown template kind {d.kind!r} for node {d.name!r}; expected conversion or storage",
                         d.kind_span or d.span)
                continue
            if d.name in system.nodes or d.name in system.edges:
                self.err(f"duplicate block name {d.name!r}", d.span)
                continue
            system.nodes[d.name] = (d.kind, self._params(d.kind, d.name, d.assignments, spans))
            spans[(d.name, "")] = d.span
        for d in self.ast.hyperedges:
            kind = d.kind or CONSERVATION
            if kind not in EDGE_KINDS:
                self.err(f"unknown template kind {kind!r} for hyperedge {d.name!r}; expected conservation",
                         d.kind_span or d.span)
                continue
            if d.name in system.nodes or d.name in system.edges:
                self.err(f"duplicate block name {d.name!r}", d.span)
                continue
            system.edges[d.name] = self._params(kind, d.name, d.assignments, spans)
            spans[(d.name, "")] = d.span
        return system, spans

    def _params(self, kind: str, owner: str, assignments, spans) -> dict:
        params = {}
        for a in assignments:
            if not known_key(kind, a.key):
                self._unknown(kind, a.key, owner, a.span)
                continue
            if a.key in params:
                self.err(f"parameter {a.key!r} of {owner!r} assigned twice", a.span)
                continue
            v = self.convert(a.key, a.value, a.span, kind)
            if v is not None:
                params[a.key] = v
                spans[(owner, a.key)] = a.span
        return params

    def apply_scenario(self, system: SystemParams, spans) -> float | None:
        """Apply the selected scenario chain; returns a wacc override if any."""
        by_name = {}
        for s in self.ast.scenarios:
            if s.name in by_name:
                self.err(f"duplicate scenario name {s.name!r}", s.span)
            by_name.setdefault(s.name, s)
        if self.scenario is None:
            for s in by_name.values():
                if s.base is not None and s.base not in by_name:
                    self.err(f"scenario {s.name!r} extends unknown scenario {s.base!r}", s.span)
            return None
        if self.scenario not in by_name:
            known = ", ".join(by_name) or "none"
            self.err(f"unknown scenario {self.scenario!r} (declared: {known})", None)
            raise _Abort
        chain, s = [], by_name[self.scenario]
        while s is not None:
            if s in chain:
                self.err(f"scenario {s.name!r} extends itself", s.span)
                raise _Abort
            chain.append(s)
            if s.base is None:
                break
            if s.base not in by_name:
                self.err(f"scenario {s.name!r} extends unknown scenario {s.base!r}", s.span)
                raise _Abort
            s = by_name[s.base]
        wacc = None
        for s in reversed(chain):
            for o in s.overrides:
                if o.key == "wacc":
                    if o.op != "=":
                        self.err("wacc can only be replaced, not scaled", o.span)
                    else:
                        wacc = self._wacc_value(o)
                    continue
                self._override(system, o, spans)
        return wacc

    def _override(self, system: SystemParams, o: Assignment, spans):
        target, _, key = o.key.partition(".")
        if not key:
            self.err(f"override target {o.key!r} must be NODE.PARAMETER", o.span)
            return
        if target in system.nodes:
            kind = system.nodes[target][0]
        elif target in system.edges:
            kind = CONSERVATION
        else:
            self.err(f"override target {target!r} is not a node or hyperedge", o.span)
            return
        if not known_key(kind, key):
            self._unknown(kind, key, target, o.span)
            return
        if o.op == "*=":
            if not isinstance(o.value, Number):
                self.err(f"'*=' needs a number for {o.key!r}", o.span)
                return
            value = o.value.value
        else:
            value = self.convert(key, o.value, o.span, kind)
            if value is None:
                return
        try:
            system.override(o.key, o.op, value)
        except ParamError as exc:
            self.err(str(exc), o.span)
            return
        spans[(target, key)] = o.span

    def build(self, system: SystemParams, spans, horizon: TimeHorizon, wacc: float) -> ModelGraph:
        nodes, removed = {}, set()
        for name, (kind, params) in system.nodes.items():
            try:
                if kind == CONVERSION:
                    node = build_conversion_node(conversion_spec(name, params, wacc), horizon)
                    removed |= {(name, k[6:]) for k, v in params.items()
                                if k.startswith("ratio.") and isinstance(v, float) and v == 0.0}
                else:
                    node = build_storage_node(storage_spec(name, params, wacc), horizon)
            except ParamError as exc:
                self.err(str(exc), spans.get((name, exc.key)) or spans.get((name, "")))
                continue
            except (ValidationError, ValueError) as exc:
                self.err(str(exc), spans.get((name, "")))
                continue
            nodes[name] = node
        edges = []
        for name, params in system.edges.items():
            members = {}
            ok = True
            for side in ("tail", "head"):
                kept = []
                for node_name, var, span in params.get(side, ()):
                    if (node_name, var) in removed:
                        continue
                    if node_name not in system.nodes:
                        self.err(f"unknown node {node_name!r} in hyperedge {name!r}", span)
                        ok = False
                    elif node_name in nodes:
                        n = nodes[node_name]
                        if not n.has_variable(var) or not n.variable(var).external:
                            self.err(f"no external variable {var!r} on node {node_name!r}", span)
                            ok = False
                    kept.append((node_name, var))
                members[side] = tuple(kept)
            sense = params.get("sense", "eq")
            if sense not in ("eq", "geq"):
                self.err(f"hyperedge sense must be eq or geq, got {sense!r}", spans.get((name, "sense")))
                ok = False
            if not ok:
                continue
            try:
                spec = ConservationSpec(name, members["tail"], members["head"], params.get("withdrawal"), sense)
                edges.append(build_conservation_hyperedge(spec, horizon, nodes))
            except (ValidationError, ValueError) as exc:
                self.err(str(exc), spans.get((name, "")))
        if any(d.severity == ERROR for d in self.diags):
            raise _Abort
        graph = ModelGraph(horizon, tuple(nodes.values()), tuple(edges))
        for d in validate_graph(graph):
            self.err(str(d), spans.get((d.block, "")))
        return graph

    def run(self) -> ResolvedModel:
        try:
            horizon = self.horizon()
            file_wacc = self.settings()
            self.load_series(horizon.T)
            system, spans = self.system()
            wacc = self.apply_scenario(system, spans)
            if wacc is None:
                wacc = file_wacc
            if wacc is None and not self.wacc_declared:
                self.diags.append(warning("no wacc declared; capital costs are annualised at 0%", None))
                wacc = 0.0
            if any(d.severity == ERROR for d in self.diags):
                raise _Abort
            graph = self.build(system, spans, horizon, wacc)
        except _Abort:
            graph = None
        if graph is None or any(d.severity == ERROR for d in self.diags):
            raise DslError(self.diags)
        # drop span bookkeeping from member lists
        for p in system.edges.values():
            for side in ("tail", "head"):
                if side in p:
                    p[side] = [(a, b) for a, b, _ in p[side]]
        return ResolvedModel(graph, system, wacc, self.scenario, dict(self.series), self.diags)


def resolve(ast: Ast, base_dir: str | Path = ".", scenario: str | None = None) -> ModelGraph:
    return Resolver(ast, base_dir, scenario).run().graph


def resolve_model(ast: Ast, base_dir: str | Path = ".", scenario: str | None = None) -> ResolvedModel:
    return Resolver(ast, base_dir, scenario).run()


def load_model(path: str | Path, scenario: str | None = None) -> ResolvedModel:
    """Parse and resolve a model file; diagnostics carry the file path."""
    p = Path(path)
    try:
        source = p.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise DslError([error(f"model file not found: {p}")], str(p)) from None
    except UnicodeDecodeError as exc:
        raise DslError([error(f"model file is not valid UTF-8: {exc.reason}")], str(p)) from None
    try:
        return resolve_model(parse_source(source, str(p)), p.parent, scenario)
    except DslError as exc:
        raise DslError(exc.diagnostics, str(p)) from None
