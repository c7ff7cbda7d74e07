"""Named scenarios of the sensitivity study and the pipeline that runs them."""

from __future__ import annotations

import re
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..assemble import SparseLP, Solution, assemble_lp
from ..model import ModelGraph
from ..params import ParamError
from ..solve import (ExternalSolverConfig, FeasibilityReport, SimplexConfig, check_feasibility, solve_external,
                     solve_simplex)
from ..solve.external import DEFAULT_COMMAND
from .reference import DEFAULT_YEAR, HorizonSelection, SystemParams, build_graph, reference_case
from .report import BalanceReport, CostBreakdown, cost_breakdown, energy_balance
from .tables import TechnologyTable, load_tables

REFERENCE_WACC = 0.07
ZERO_FINANCING = "zero-financing"
SOLVERS = ("auto", "embedded", "external")
# embedded solves stay below this dense working-set size (rows * (rows + cols))
EMBEDDED_DENSE_LIMIT = 60_000_000


class ScenarioError(RuntimeError):
    def __init__(self, scenario: str, message: str):
        self.scenario = scenario
        super().__init__(f"scenario {scenario!r}: {message}")


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    base: str = "reference"
    overrides: tuple[tuple[str, str, object], ...] = ()
    wacc: float | str = REFERENCE_WACC
    horizon: str | int | None = None
    description: str = ""

    def __post_init__(self):
        if self.base not in BASES:
            raise ParamError(f"unknown scenario base {self.base!r}; expected one of {', '.join(BASES)}")
        if isinstance(self.wacc, str) and self.wacc != ZERO_FINANCING:
            raise ParamError(f"wacc must be a number or {ZERO_FINANCING!r}")

    @property
    def wacc_value(self) -> float:
        return 0.0 if self.wacc == ZERO_FINANCING else float(self.wacc)

    def all_overrides(self) -> tuple:
        return BASES[self.base] + tuple(self.overrides)


BASES = {
    "reference": (),
    "solar-only": (("wind.kappa_max", "=", 0.0),),
}

_FLEXIBLE = ("methanation", "direct_air_capture", "desalination")


def _capex(nodes, factor):
    return tuple((f"{n}.{k}", "*=", factor) for n in nodes for k in ("capex", "fom"))


SCENARIOS: dict[str, ScenarioSpec] = {s.name: s for s in (
    ScenarioSpec("reference", description="reference hub at 7% WACC"),
    ScenarioSpec("solar-only", base="solar-only", description="no wind capacity"),
    ScenarioSpec("flexibility", overrides=tuple(
        (f"{n}.{k}", "=", v) for n in _FLEXIBLE for k, v in (("mu", 0.0), ("delta", 1.0))),
        description="methanation, DAC and desalination fully flexible"),
    ScenarioSpec("capex-el-plus50", overrides=_capex(["electrolysis"], 1.5),
                 description="electrolysis CAPEX and FOM +50%"),
    ScenarioSpec("capex-el-minus50", overrides=_capex(["electrolysis"], 0.5),
                 description="electrolysis CAPEX and FOM -50%"),
    ScenarioSpec("capex-dac-plus50", overrides=_capex(["direct_air_capture"], 1.5),
                 description="DAC CAPEX and FOM +50%"),
    ScenarioSpec("capex-dac-minus50", overrides=_capex(["direct_air_capture"], 0.5),
                 description="DAC CAPEX and FOM -50%"),
    ScenarioSpec("capex-mt-minus50", overrides=_capex(["methanation"], 0.5),
                 description="methanation CAPEX and FOM -50%"),
    ScenarioSpec("capex-all-minus50", overrides=_capex(["electrolysis", "direct_air_capture", "methanation"], 0.5),
                 description="electrolysis, DAC and methanation CAPEX and FOM -50%"),
    ScenarioSpec("dac-electric", overrides=(("direct_air_capture.ratio.electricity", "=", 0.5),
                                            ("direct_air_capture.ratio.hydrogen", "=", 0.0)),
                 description="DAC heat from electricity: 0.5 GWh/kt, no hydrogen"),
    ScenarioSpec(ZERO_FINANCING, wacc=ZERO_FINANCING, description="capital at zero cost"),
)}


_OVERRIDE_RE = re.compile(r"^\s*([A-Za-z_][\w.]*)\s*(\*=|=)\s*(.+?)\s*$")


def parse_override(text: str) -> tuple[str, str, object]:
    """``node.key = value`` or ``node.key *= value``."""
    m = _OVERRIDE_RE.match(text)
    if not m:
        raise ParamError(f"cannot parse override {text!r}; expected NODE.KEY = VALUE or NODE.KEY *= VALUE")
    path, op, raw = m.groups()
    value = yaml.safe_load(raw)
    if isinstance(value, str) and raw.strip().lower() in ("inf", "+inf", "infinity"):
        value = float("inf")
    return path, op, value


def load_scenario_file(path: str | Path) -> ScenarioSpec:
    """YAML scenario: name, base, wacc, horizon, description and override lines."""
    p = Path(path)
    doc = yaml.safe_load(p.read_text())
    if not isinstance(doc, dict):
        raise ParamError(f"{p}: scenario file must be a mapping")
    unknown = set(doc) - {"name", "base", "wacc", "horizon", "description", "overrides"}
    if unknown:
        raise ParamError(f"{p}: unknown scenario field {sorted(unknown)[0]!r}")
    overrides = tuple(parse_override(str(o)) for o in doc.get("overrides") or ())
    return ScenarioSpec(str(doc.get("name", p.stem)), doc.get("base", "reference"), overrides,
                        doc.get("wacc", REFERENCE_WACC), doc.get("horizon"), str(doc.get("description", "")))


def get_scenario(name_or_path: str) -> ScenarioSpec:
    if name_or_path in SCENARIOS:
        return SCENARIOS[name_or_path]
    p = Path(name_or_path)
    if p.suffix in (".yaml", ".yml") and p.is_file():
        return load_scenario_file(p)
    raise ParamError(f"unknown scenario {name_or_path!r}; bundled: {', '.join(SCENARIOS)}")


@dataclass
class ScenarioResult:
    spec: ScenarioSpec
    solution: Solution
    breakdown: CostBreakdown | None
    balance: BalanceReport | None
    graph: ModelGraph
    lp: SparseLP
    system: SystemParams
    horizon: HorizonSelection
    feasibility: FeasibilityReport | None = None
    solver: str = ""
    info: dict = field(default_factory=dict)

    def __iter__(self):
        return iter((self.solution, self.breakdown, self.balance))


def build_scenario(spec: ScenarioSpec, horizon=None, tables: TechnologyTable | None = None, series=None,
                   demand: float = 10.0):
    hz = horizon if horizon is not None else (spec.horizon if spec.horizon is not None else DEFAULT_YEAR)
    try:
        system, sel = reference_case(tables if tables is not None else load_tables(), series, demand, hz,
                                     spec.all_overrides())
        graph = build_graph(system, sel.horizon(), spec.wacc_value)
    except (ParamError, ValueError) as exc:
        raise ScenarioError(spec.name, str(exc)) from exc
    return system, sel, graph


def pick_solver(lp: SparseLP, solver: str = "auto") -> str:
    if solver not in SOLVERS:
        raise ValueError(f"unknown solver {solver!r}; expected one of {', '.join(SOLVERS)}")
    if solver != "auto":
        return solver
    m, n = lp.n_rows, lp.n_cols
    return "embedded" if m * (m + n) <= EMBEDDED_DENSE_LIMIT and lp.nnz <= 2_000_000 else "external"


def run_scenario(spec: ScenarioSpec, solver: str = "auto", horizon=None, *, tol_feas: float = 1e-7,
                 tol_opt: float = 1e-7, check_tol: float = 1e-6, solver_cmd: str | None = None,
                 workdir: str | Path | None = None, tables: TechnologyTable | None = None, series=None,
                 demand: float = 10.0) -> ScenarioResult:
    """Build, solve and report one scenario."""
    system, sel, graph = build_scenario(spec, horizon, tables, series, demand)
    lp = assemble_lp(graph)
    chosen = pick_solver(lp, solver)
    try:
        if chosen == "embedded":
            sol = solve_simplex(lp, SimplexConfig(feas_tol=tol_feas, opt_tol=tol_opt))
        else:
            cfg = ExternalSolverConfig(command=solver_cmd or DEFAULT_COMMAND)
            if workdir is None:
                with tempfile.TemporaryDirectory(prefix=f"hub-{spec.name}-") as tmp:
                    sol = solve_external(lp, cfg, tmp)
            else:
                sol = solve_external(lp, cfg, Path(workdir))
    except Exception as exc:  # solver failures surface with the scenario name
        raise ScenarioError(spec.name, f"{chosen} solver failed: {exc}") from exc
    result = ScenarioResult(spec, sol, None, None, graph, lp, system, sel, solver=chosen)
    if not sol.optimal:
        raise ScenarioError(spec.name, f"{chosen} solver returned status {sol.status}")
    result.feasibility = check_feasibility(lp, sol.x, check_tol)
    groups = {n: system.group(n) for n in system.nodes}
    labels = {n: system.label(n) for n in system.nodes}
    result.breakdown = cost_breakdown(sol, graph, demand, groups, labels)
    result.balance = energy_balance(sol, graph)
    return result
