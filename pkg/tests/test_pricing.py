import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from storage_pricing.dispatch import Boundary, WindowInfeasible, WindowProblem, roll_horizon, solve_window
from storage_pricing.harness import ManipulationInstance
from storage_pricing.invariants import check_prices, random_instance
from storage_pricing.model import EsrSpec, generator_as_esr
from storage_pricing.pricing import PRICE_COLUMNS, PriceSeries, lmp, reduces_to_lmp, soc_price_via_limits, tlmp


@pytest.fixture(scope="module")
def calibrated_trace():
    inst = ManipulationInstance.from_json()
    return inst, roll_horizon(inst.fleet, inst.demand_path, W=2, T=2)


def test_calibrated_prices(calibrated_trace):
    inst, tr = calibrated_trace
    specs = inst.fleet.true_specs
    assert [lmp(r) for r in tr.records] == pytest.approx([25, 30], abs=1e-9)
    d = [tlmp(r, 2, specs[2])[1] for r in tr.records]
    assert d == pytest.approx([28, 30], abs=1e-9)
    assert not reduces_to_lmp(tr.records[0], 2, specs[2])


def test_slack_instance_reduces_to_lmp():
    gens = [generator_as_esr(100, 1000, 12, "A", init=90), generator_as_esr(100, 1000, 19, "B", init=30)]
    s = EsrSpec("S", cost_d=30, cost_c=1, cap_d=5, cap_c=5, soc_min=0, soc_max=50, soc_init=20)
    tr = roll_horizon(gens + [s], [120.0, 130.0, 125.0], W=2)
    for r in tr.records:
        for i, spec in enumerate(gens + [s]):
            assert reduces_to_lmp(r, i, spec)
            assert tlmp(r, i, spec) == pytest.approx((r.lam, r.lam))


def empty_storage_window():
    # cheap now (10), dear next (50); storage starts empty and can only charge 5
    gens = [generator_as_esr(100, 100, 10, "cheap"), generator_as_esr(100, 100, 50, "dear")]
    s = EsrSpec("S", cost_d=1, cost_c=0.5, cap_d=10, cap_c=5, soc_min=0, soc_max=100, soc_init=0,
                eff_c=0.9, eff_d=0.9)
    specs = gens + [s]
    return WindowProblem(specs, 0, Boundary.initial(specs), [[50.0, 150.0]], np.ones(1)), specs


def test_soc_lower_limit_price():
    prob, specs = empty_storage_window()
    rec = solve_window(prob)
    assert rec.g_c[2] == pytest.approx(5)
    # one more MWh stored lets 0.9 MWh displace the 50 $/MWh unit at a 1 $/MWh bid
    assert rec.phi[2] == pytest.approx(0.9 * 49)
    assert soc_price_via_limits(rec, 2) == pytest.approx(rec.phi[2], abs=1e-9)
    assert rec.delta_lo_adv[2, 0, 0] == pytest.approx(rec.phi[2])
    c, _ = tlmp(rec, 2, specs[2])
    assert c == pytest.approx(rec.lam - 0.9 * rec.phi[2])


def test_soc_upper_limit_gives_negative_soc_price():
    # full storage facing a cheap interval it cannot use
    s = EsrSpec("S", cost_d=40, cost_c=20, cap_d=5, cap_c=5, soc_min=0, soc_max=10, soc_init=10)
    specs = [generator_as_esr(100, 100, 30, "mid"), generator_as_esr(60, 100, 5, "cheap"), s]
    prob = WindowProblem(specs, 0, Boundary.initial(specs), [[50.0, 50.0]], np.ones(1))
    rec = solve_window(prob)
    assert rec.soc_binding[2]
    assert rec.phi[2] <= 0
    assert soc_price_via_limits(rec, 2) == pytest.approx(rec.phi[2], abs=1e-9)


def test_lmp_envelope_finite_difference(calibrated_trace):
    inst, _ = calibrated_trace
    specs = inst.fleet.reported_specs
    d = inst.demand_path[:2].copy()
    base = solve_window(WindowProblem(specs, 0, Boundary.initial(specs), d[None, :], np.ones(1)))
    h = 1e-4 * d[0]
    bumped = d.copy()
    bumped[0] += h
    up = solve_window(WindowProblem(specs, 0, Boundary.initial(specs), bumped[None, :], np.ones(1)))
    assert (up.objective - base.objective) / h == pytest.approx(base.lam, rel=1e-3)


def test_price_csv(tmp_path, calibrated_trace):
    inst, tr = calibrated_trace
    ps = PriceSeries.from_trace(tr)
    ps.to_csv(tmp_path / "p.csv")
    rows = list(csv.DictReader(open(tmp_path / "p.csv")))
    assert list(rows[0]) == PRICE_COLUMNS
    assert len(rows) == 2 * 3
    g3 = [r for r in rows if r["resource"] == "G3"]
    assert [float(r["tlmp_d"]) for r in g3] == pytest.approx([28, 30])
    assert ps.decomposition_residual(tr.specs) <= 1e-12


def test_bad_resource_index(calibrated_trace):
    inst, tr = calibrated_trace
    with pytest.raises(KeyError):
        tlmp(tr.records[0], 7, inst.fleet.true_specs[0])


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_soc_price_identity_and_reduction_on_random_fleets(seed):
    rng = np.random.default_rng(seed)
    ri = random_instance(rng, max_t=8, max_k=6)
    try:
        tr = roll_horizon(ri.fleet, ri.demand, ri.provider(), W=ri.W)
    except WindowInfeasible:
        return
    assert check_prices(tr, PriceSeries.from_trace(tr)) == []
