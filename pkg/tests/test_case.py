import json
import math

import numpy as np
import pytest
import yaml
from hypothesis import given, strategies as st

from hubgraph.case.reference import (FULL_HOURS, VOYAGE_HOURS, destination_withdrawal, load_bundled_series,
                                     reference_case, reference_system, resolve_horizon)
from hubgraph.case.report import (HHV_METHANE, ReportError, cost_breakdown, emit_report, read_cost_breakdown)
from hubgraph.case.scenarios import (SCENARIOS, ScenarioError, ScenarioSpec, get_scenario, load_scenario_file,
                                     parse_override, pick_solver, run_scenario)
from hubgraph.case.series import (BUNDLED_SERIES, SOLAR_MEAN, WIND_MEAN, AvailabilitySeries, SeriesError,
                                  build_vessel_schedule, load_series, read_column)
from hubgraph.case.tables import TableError, load_tables
from hubgraph.params import ParamError

SHORT = "8760:240"   # ten days of 2016: long enough for one full voyage


@pytest.fixture(scope="module")
def short_runs():
    names = ["reference", "solar-only", "flexibility", "zero-financing", "capex-all-minus50", "dac-electric"]
    return {n: run_scenario(SCENARIOS[n], solver="external", horizon=SHORT) for n in names}


# -- data ---------------------------------------------------------------------

def test_technology_tables_load_with_units():
    t = load_tables()
    assert t.value("conversion_economic", "solar_pv", "capex") == 380.0
    assert t.unit("conversion_economic", "solar_pv", "capex") == "M€/GW_el"
    with pytest.raises(TableError, match="missing table record"):
        t.value("conversion_economic", "fusion", "capex")


def test_tables_reject_bare_numbers(tmp_path):
    doc = yaml.safe_load(open(load_tables().source))
    doc["conversion_economic"]["solar_pv"]["capex"] = 380.0
    p = tmp_path / "t.yaml"
    p.write_text(yaml.safe_dump(doc))
    with pytest.raises((TableError, ValueError)):
        load_tables(p)


def test_bundled_series_statistics():
    # five-year means of the reconstructed series
    solar, _ = read_column(BUNDLED_SERIES, "solar")
    wind, _ = read_column(BUNDLED_SERIES, "wind")
    assert len(solar) == len(wind) == FULL_HOURS
    assert abs(solar.mean() - SOLAR_MEAN) < 0.005 and abs(wind.mean() - WIND_MEAN) < 0.005
    assert solar.min() >= 0 and wind.max() <= 1


def test_series_length_and_range_checks(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("t,v\n0,0.2\n1,1.5\n")
    with pytest.raises(SeriesError, match="outside"):
        load_series(p, "v")
    with pytest.raises(SeriesError, match="series length 2 ≠ horizon 3"):
        load_series(p, "v", 3)
    with pytest.raises(SeriesError, match="no column"):
        load_series(p, "w")
    with pytest.raises(SeriesError):
        AvailabilitySeries("x", np.array([-0.1]))


@given(st.integers(1, 10), st.integers(1, 30), st.integers(1, 400))
def test_vessel_schedule_is_zero_one_when_staggered(n, window, T):
    cycle = n * window + 3
    s = build_vessel_schedule(n, cycle, window, T).values
    assert set(np.unique(s)) <= {0.0, 1.0}
    # every vessel berths for exactly `window` hours per cycle
    if T >= cycle:
        assert s[:cycle].sum() == n * window


def test_overlapping_schedule_rejected():
    with pytest.raises(SeriesError):
        build_vessel_schedule(8, 168, 24, 10)


@pytest.mark.parametrize("sel, start, T, years", [
    ("full", 0, 43824, 5.0), (2016, 8760, 8784, 1.0), ("2017", 17544, 8760, 1.0), ("100:24", 100, 24, 24 / 8760),
    (48, 8760, 48, 48 / 8760),
])
def test_horizon_selection(sel, start, T, years):
    h = resolve_horizon(sel)
    assert (h.start, h.T) == (start, T) and h.years == pytest.approx(years)


@pytest.mark.parametrize("sel", ["0:0", "43800:100", "x", "-5", "1:a"])
def test_bad_horizons(sel):
    with pytest.raises(SeriesError):
        resolve_horizon(sel)


# -- reference model ----------------------------------------------------------

def test_destination_withdrawal():
    assert destination_withdrawal(10.0, HHV_METHANE) == pytest.approx(10e3 / 8760 / 15.441, rel=1e-15)
    assert float(f"{destination_withdrawal(10.0, HHV_METHANE):.4g}") == 0.07393


def test_reference_structure():
    g = reference_system(horizon=24)
    assert len(g.nodes) == 16 and len(g.hyperedges) == 9
    carriers = g.node("carriers").source
    assert carriers.tau == {"lch4_destination": VOYAGE_HOURS}
    mt = g.node("methanation").source
    assert mt.mu == 1.0 and mt.delta_plus == 0.0


def test_overrides_apply_and_reject_unknown_targets():
    system, _ = reference_case(horizon=24, overrides=(("wind.kappa_max", "=", 0.0),
                                                      ("electrolysis.capex", "*=", 2.0)))
    assert system.nodes["wind"][1]["kappa_max"] == 0.0
    base, _ = reference_case(horizon=24)
    assert system.nodes["electrolysis"][1]["capex"] == 2 * base.nodes["electrolysis"][1]["capex"]
    with pytest.raises(ParamError):
        reference_case(horizon=24, overrides=(("nuclear.capex", "=", 1.0),))
    with pytest.raises(ParamError):
        reference_case(horizon=24, overrides=(("wind.capexx", "=", 1.0),))


@pytest.mark.parametrize("text, expected", [
    ("electrolysis.capex *= 1.5", ("electrolysis.capex", "*=", 1.5)),
    ("wind.kappa_max = 0", ("wind.kappa_max", "=", 0)),
    ("wind.kappa_max = inf", ("wind.kappa_max", "=", math.inf)),
])
def test_parse_override(text, expected):
    assert parse_override(text) == expected


def test_scenario_file(tmp_path):
    p = tmp_path / "cheap.yaml"
    p.write_text("name: cheap\nbase: solar-only\nwacc: zero-financing\noverrides:\n  - electrolysis.capex *= 0.5\n")
    spec = load_scenario_file(p)
    assert spec.base == "solar-only" and spec.wacc_value == 0.0
    assert get_scenario(str(p)) == spec
    assert spec.all_overrides()[0] == ("wind.kappa_max", "=", 0.0)
    with pytest.raises(ParamError):
        get_scenario("no-such-scenario")
    with pytest.raises(ParamError):
        ScenarioSpec("x", base="moon")


def test_short_horizon_without_voyage_is_infeasible():
    # carriers start empty, so nothing arrives before the first voyage completes
    with pytest.raises(ScenarioError, match="infeasible"):
        run_scenario(SCENARIOS["reference"], solver="external", horizon=48)


def test_solver_choice():
    from hubgraph.assemble import assemble_lp
    small = assemble_lp(reference_system(horizon=8))
    assert pick_solver(small) == "embedded"
    assert pick_solver(assemble_lp(reference_system(horizon=240))) == "external"
    with pytest.raises(ValueError):
        pick_solver(small, "cplex")


# -- scenario results at a short horizon -------------------------------------

def test_short_runs_are_feasible(short_runs):
    for name, r in short_runs.items():
        assert r.feasibility.feasible, (name, r.feasibility.summary())


def test_monotonicity_at_short_horizon(short_runs):
    obj = {k: r.solution.objective for k, r in short_runs.items()}
    assert obj["solar-only"] >= obj["reference"] - 1e-6 * abs(obj["reference"])
    assert obj["flexibility"] <= obj["reference"] + 1e-6 * abs(obj["reference"])
    assert obj["zero-financing"] < obj["reference"]
    assert obj["capex-all-minus50"] < obj["reference"]


def test_breakdown_sums_to_objective(short_runs):
    r = short_runs["reference"]
    b = r.breakdown
    annual = r.solution.objective / r.horizon.years
    assert math.fsum(row.annual_cost for row in b.rows) == pytest.approx(annual, rel=1e-9)
    # M€ per TWh is € per MWh
    assert b.total_per_mwh == pytest.approx(annual / b.demand_twh, rel=1e-12)
    assert sum(b.by_group().values()) == pytest.approx(b.total_per_mwh, rel=1e-12)


def test_balance_report(short_runs):
    bal = short_runs["reference"].balance
    assert all(abs(v) < 1e-6 for v in bal.edge_residuals.values())
    assert 0 < bal.chain_efficiency < 1
    assert bal.total_curtailment >= -1e-9
    assert bal.capacity("carriers").capacity >= 0


def test_dac_electric_has_no_hydrogen_to_dac(short_runs):
    g = short_runs["dac-electric"].graph
    assert not g.node("direct_air_capture").has_variable("hydrogen")
    assert all(node != "direct_air_capture" for e in g.hyperedges for node, _ in e.members
               if e.name == "coastal_hydrogen")


def test_report_round_trip_and_determinism(short_runs, tmp_path):
    r = short_runs["reference"]
    emit_report(r.breakdown, r.balance, tmp_path / "a", "both")
    emit_report(r.breakdown, r.balance, tmp_path / "b", "both")
    for name in ("costs.csv", "capacities.csv", "flows.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    back = read_cost_breakdown(tmp_path / "a" / "summary.json")
    assert [row.node for row in back.rows] == [row.node for row in r.breakdown.rows]
    for x, y in zip(back.rows, r.breakdown.rows):
        assert x.cost_per_mwh == y.cost_per_mwh and x.annual_cost == y.annual_cost
    doc = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert doc["cost"]["total_per_mwh"] == r.breakdown.total_per_mwh


def test_breakdown_refuses_non_optimal(short_runs):
    r = short_runs["reference"]
    bad = type(r.solution)("infeasible", None, r.solution.x)
    with pytest.raises(ReportError):
        cost_breakdown(bad, r.graph, 10.0)
    with pytest.raises(ReportError):
        cost_breakdown(r.solution, r.graph, 0.0)


def test_vessel_gating_holds(short_runs):
    r = short_runs["reference"]
    pi = r.graph.node("carriers").source.availability
    load = r.solution.value("carriers", "lch4_hub")
    assert np.all(load[np.asarray(pi) == 0] <= 1e-9)


def test_bundled_series_slices():
    s = load_bundled_series(resolve_horizon("0:5"))
    assert set(s) == {"solar", "wind"} and len(s["solar"]) == 5


def test_storage_is_cyclic_in_every_run(short_runs):
    for name, r in short_runs.items():
        for node in r.graph.nodes:
            if node.has_variable("inventory"):
                e = r.solution.value(node.name, "inventory")
                assert abs(e[0] - e[-1]) <= 1e-6 * max(1.0, np.abs(e).max()), (name, node.name)


def test_demand_is_met_every_hour(short_runs):
    for name, r in short_runs.items():
        lam = destination_withdrawal(10.0, HHV_METHANE)
        gas = r.solution.value("regasification", "methane")
        assert np.allclose(gas, lam, rtol=0, atol=1e-6), name


def test_renewables_never_exceed_availability(short_runs):
    for name, r in short_runs.items():
        for node in ("solar_pv", "wind"):
            spec = r.graph.node(node).source
            pi = np.broadcast_to(np.asarray(spec.availability, dtype=float), (r.horizon.T,))
            cap = spec.kappa_existing + r.solution.value(node, "capacity")
            q = r.solution.value(node, "electricity")
            assert np.all(pi * cap - q >= -1e-6), (name, node)
            row = r.balance.capacity(node)
            if row.capacity > 1e-9:
                assert row.capacity_factor <= row.mean_availability + 1e-6, (name, node)


def test_balance_closes_on_every_hyperedge(short_runs):
    for name, r in short_runs.items():
        assert r.feasibility.max_row_residual <= 1e-6, name
        assert all(abs(v) <= 1e-6 for v in r.balance.edge_residuals.values()), name
