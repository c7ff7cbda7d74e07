"""Template fidelity: every constraint family against hand-written matrices.

Each test expands a minimal spec at T <= 5 and compares the emitted rows
coefficient by coefficient.  Column order is declaration order: flows, then
scalars (conversion), or charge, discharge, [auxiliary], inventory, stock
capacity, flow capacity (storage).
"""

import math

import numpy as np
import pytest

from hubgraph.assemble import assemble_lp
from hubgraph.blocks import (IN, OUT, CapexSpec, ConservationSpec, ConversionSpec, Flow, StorageSpec,
                             annualize_capex, build_conservation_hyperedge, build_conversion_node,
                             build_storage_node)
from hubgraph.model import ModelGraph, TimeHorizon


def lp_of(*nodes, edges=(), T=3, dt=1.0, years=1.0):
    hz = TimeHorizon(T, dt, years)
    built = [build_conversion_node(n, hz) if isinstance(n, ConversionSpec) else build_storage_node(n, hz)
             for n in nodes]
    by_name = {b.name: b for b in built}
    es = [build_conservation_hyperedge(e, hz, by_name) for e in edges]
    return assemble_lp(ModelGraph(hz, tuple(built), tuple(es)))


def family(lp, name):
    """Dense rows, senses and right-hand sides of one constraint family."""
    idx = [i for i, lab in enumerate(lp.row_labels) if lab[1] == name]
    A = lp.A.toarray()[idx]
    return A, "".join(lp.senses[idx]), lp.rhs[idx]


def check(lp, name, A, senses, rhs):
    got_A, got_s, got_b = family(lp, name)
    assert got_A.shape == np.asarray(A).shape
    assert np.array_equal(got_A, np.asarray(A, dtype=float))
    assert got_s == senses
    assert np.array_equal(got_b, np.asarray(rhs, dtype=float))


def cost(capex=0.0, fom=0.0, vom=0.0, lifetime=10.0, wacc=0.0):
    return CapexSpec(capex, fom, vom, lifetime).annualize(wacc)


def two_flow(**kw):
    base = dict(name="el", flows=(Flow("power", IN), Flow("gas", OUT)), reference="gas", sizing="power",
                phi={"power": 0.5}, cost=cost())
    base.update(kw)
    return ConversionSpec(**base)


# columns of two_flow at T=3: power0 power1 power2 gas0 gas1 gas2 K

def test_conversion_equalities():
    lp = lp_of(two_flow())
    check(lp, "conversion[power]", [
        [-0.5, 0, 0, 1, 0, 0, 0],
        [0, -0.5, 0, 0, 1, 0, 0],
        [0, 0, -0.5, 0, 0, 1, 0],
    ], "EEE", [0, 0, 0])


def test_conversion_with_delay_and_cold_start():
    spec = two_flow(flows=(Flow("load", IN), Flow("unload", OUT)), reference="load", sizing="load",
                    phi={"unload": 2.0}, tau={"unload": 1})
    lp = lp_of(spec)
    # load_t = 2 * unload_{t+1} for t = 0, 1
    check(lp, "conversion[unload]", [
        [1, 0, 0, 0, -2, 0, 0],
        [0, 1, 0, 0, 0, -2, 0],
    ], "EE", [0, 0])
    check(lp, "cold_start[unload]", [[0, 0, 0, 1, 0, 0, 0]], "E", [0])


def test_delay_longer_than_horizon_only_cold_starts():
    spec = two_flow(flows=(Flow("load", IN), Flow("unload", OUT)), reference="load", sizing="load",
                    phi={"unload": 1.0}, tau={"unload": 5})
    lp = lp_of(spec, T=3)
    assert family(lp, "conversion[unload]")[0].shape[0] == 0
    check(lp, "cold_start[unload]", [
        [0, 0, 0, 1, 0, 0, 0],
        [0, 0, 0, 0, 1, 0, 0],
        [0, 0, 0, 0, 0, 1, 0],
    ], "EEE", [0, 0, 0])


def test_sizing_with_availability_and_existing_capacity():
    spec = two_flow(availability=np.array([1.0, 0.5, 0.0]), kappa_existing=2.0)
    lp = lp_of(spec)
    # power_t - pi_t K <= pi_t * kappa
    check(lp, "sizing", [
        [1, 0, 0, 0, 0, 0, -1.0],
        [0, 1, 0, 0, 0, 0, -0.5],
        [0, 0, 1, 0, 0, 0, 0.0],
    ], "LLL", [2.0, 1.0, 0.0])


def test_capacity_bound_only_when_finite():
    assert family(lp_of(two_flow()), "capacity_bound")[0].shape[0] == 0
    lp = lp_of(two_flow(kappa_max=7.0, kappa_existing=3.0))
    check(lp, "capacity_bound", [[0, 0, 0, 0, 0, 0, 1]], "L", [4.0])


def test_min_level_scaled_to_sizing_commodity():
    # sizing on power (phi 0.5): gas is scaled by 1/0.5, power by 0.5/0.5
    lp = lp_of(two_flow(mu=0.25, kappa_existing=4.0))
    check(lp, "min_level[power]", [
        [-1, 0, 0, 0, 0, 0, 0.25],
        [0, -1, 0, 0, 0, 0, 0.25],
        [0, 0, -1, 0, 0, 0, 0.25],
    ], "LLL", [-1.0, -1.0, -1.0])
    check(lp, "min_level[gas]", [
        [0, 0, 0, -2, 0, 0, 0.25],
        [0, 0, 0, 0, -2, 0, 0.25],
        [0, 0, 0, 0, 0, -2, 0.25],
    ], "LLL", [-1.0, -1.0, -1.0])


def test_ramping_rows():
    lp = lp_of(two_flow(delta_plus=0.5, delta_minus=0.25))
    check(lp, "ramp_up[power]", [
        [-1, 1, 0, 0, 0, 0, -0.5],
        [0, -1, 1, 0, 0, 0, -0.5],
    ], "LL", [0, 0])
    check(lp, "ramp_down[gas]", [
        [0, 0, 0, 2, -2, 0, -0.25],
        [0, 0, 0, 0, 2, -2, -0.25],
    ], "LL", [0, 0])
    # a limit of 1 means unconstrained
    lp = lp_of(two_flow(delta_plus=1.0, delta_minus=1.0))
    assert not any(lab[1].startswith("ramp") for lab in lp.row_labels)


def test_conversion_objective():
    c = cost(capex=100.0, fom=3.0, vom=0.2, lifetime=10.0, wacc=0.05)
    lp = lp_of(two_flow(cost=c), dt=2.0, years=1.5)
    zeta = annualize_capex(100.0, 10.0, 0.05)
    expected = [0.4, 0.4, 0.4, 0, 0, 0, 1.5 * (zeta + 3.0)]
    assert np.allclose(lp.c, expected, rtol=0, atol=0)
    assert lp.obj_const == 0.0


def store(**kw):
    base = dict(name="st", commodity="h2", eta_s=0.1, eta_plus=0.8, eta_minus=0.5,
                stock_cost=cost(), flow_cost=cost())
    base.update(kw)
    return StorageSpec(**base)


# storage columns at T=3: ch0 ch1 ch2 dis0 dis1 dis2 e0 e1 e2 E K

def test_storage_dynamics_and_cyclicity():
    lp = lp_of(store())
    # e_{t+1} - 0.9 e_t - 0.8 ch_t + 2 dis_t = 0
    check(lp, "dynamics", [
        [-0.8, 0, 0, 2, 0, 0, -0.9, 1, 0, 0, 0],
        [0, -0.8, 0, 0, 2, 0, 0, -0.9, 1, 0, 0],
    ], "EE", [0, 0])
    check(lp, "cyclicity", [[0, 0, 0, 0, 0, 0, 1, 0, -1, 0, 0]], "E", [0])


def test_storage_auxiliary_consumption():
    lp = lp_of(store(auxiliary="power", phi_aux=1.3), T=2)
    # columns: ch0 ch1 dis0 dis1 pw0 pw1 e0 e1 E K
    check(lp, "auxiliary", [
        [-1.3, 0, 0, 0, 1, 0, 0, 0, 0, 0],
        [0, -1.3, 0, 0, 0, 1, 0, 0, 0, 0],
    ], "EE", [0, 0])


def test_storage_stock_rows():
    lp = lp_of(store(sigma=0.05, epsilon_existing=2.0, epsilon_max=10.0), T=2)
    # columns: ch0 ch1 dis0 dis1 e0 e1 E K
    check(lp, "stock_sizing", [
        [0, 0, 0, 0, 1, 0, -1, 0],
        [0, 0, 0, 0, 0, 1, -1, 0],
    ], "LL", [2.0, 2.0])
    check(lp, "stock_bound", [[0, 0, 0, 0, 0, 0, 1, 0]], "L", [8.0])
    check(lp, "min_inventory", [
        [0, 0, 0, 0, -1, 0, 0.05, 0],
        [0, 0, 0, 0, 0, -1, 0.05, 0],
    ], "LL", [-0.1, -0.1])


def test_storage_flow_rows():
    lp = lp_of(store(rho=2.0, kappa_existing=1.0, kappa_max=4.0), T=2)
    check(lp, "charge_sizing", [
        [1, 0, 0, 0, 0, 0, 0, -1],
        [0, 1, 0, 0, 0, 0, 0, -1],
    ], "LL", [1.0, 1.0])
    check(lp, "discharge_sizing", [
        [0, 0, 1, 0, 0, 0, 0, -2],
        [0, 0, 0, 1, 0, 0, 0, -2],
    ], "LL", [2.0, 2.0])
    check(lp, "flow_bound", [[0, 0, 0, 0, 0, 0, 0, 1]], "L", [3.0])


def test_storage_objective():
    st = store(stock_cost=cost(capex=50.0, fom=1.0, vom=0.3, lifetime=20.0, wacc=0.07),
               flow_cost=cost(capex=80.0, fom=2.0, vom=0.7, lifetime=10.0, wacc=0.07))
    lp = lp_of(st, T=2, dt=0.5, years=2.0)
    sigma_s = annualize_capex(50.0, 20.0, 0.07)
    zeta = annualize_capex(80.0, 10.0, 0.07)
    # charge VOM scales with dt, inventory VOM does not
    expected = [0.35, 0.35, 0, 0, 0.3, 0.3, 2.0 * (sigma_s + 1.0), 2.0 * (zeta + 2.0)]
    assert np.array_equal(lp.c, np.array(expected))


def test_conservation_balance_equality_and_withdrawal():
    a = ConversionSpec("a", (Flow("x", OUT),), "x", "x", cost=cost())
    b = ConversionSpec("b", (Flow("x", OUT),), "x", "x", cost=cost())
    d = ConversionSpec("d", (Flow("x", IN),), "x", "x", cost=cost())
    e = ConservationSpec("bus", tail=(("a", "x"), ("b", "x")), head=(("d", "x"),),
                         withdrawal=np.array([0.5, 1.5]))
    lp = lp_of(a, b, d, edges=(e,), T=2)
    # columns: a.x0 a.x1 a.K b.x0 b.x1 b.K d.x0 d.x1 d.K
    check(lp, "balance", [
        [1, 0, 0, 1, 0, 0, -1, 0, 0],
        [0, 1, 0, 0, 1, 0, 0, -1, 0],
    ], "EE", [0.5, 1.5])


def test_conservation_relaxed_sense():
    a = ConversionSpec("a", (Flow("x", OUT),), "x", "x", cost=cost())
    d = ConversionSpec("d", (Flow("x", IN),), "x", "x", cost=cost())
    e = ConservationSpec("bus", tail=(("a", "x"),), head=(("d", "x"),), sense="geq")
    lp = lp_of(a, d, edges=(e,), T=2)
    check(lp, "balance", [
        [1, 0, 0, -1, 0, 0],
        [0, 1, 0, 0, -1, 0],
    ], "GG", [0, 0])


@pytest.mark.parametrize("T", [1, 2, 5])
def test_row_counts_match_helpers(T):
    from hubgraph.blocks import conversion_row_count, storage_row_count
    spec = two_flow(mu=0.1, delta_plus=0.5, delta_minus=0.5, kappa_max=3.0)
    assert lp_of(spec, T=T).n_rows == conversion_row_count(spec, T)
    st = store(auxiliary="p", phi_aux=1.0, sigma=0.1, epsilon_max=5.0, kappa_max=math.inf)
    assert lp_of(st, T=T).n_rows == storage_row_count(st, T)
