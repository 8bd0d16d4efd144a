import csv

import numpy as np
import pytest

from storage_pricing.dispatch import WindowInfeasible, roll_horizon
from storage_pricing.harness import ManipulationInstance
from storage_pricing.invariants import check_settlement, random_instance
from storage_pricing.model import EsrSpec, generator_as_esr
from storage_pricing.pricing import PriceSeries
from storage_pricing.settlement import (
    dispatch_feasible, in_market_profit, individual_profit_max, loc, profit_with_scheme, write_settlement_csv,
)


@pytest.fixture(scope="module")
def calibrated():
    inst = ManipulationInstance.from_json()
    tr = roll_horizon(inst.fleet, inst.demand_path, W=2, T=2)
    return inst, tr, PriceSeries.from_trace(tr)


def test_out_of_money_generator_earns_nothing():
    q, pd_, pc_, _ = individual_profit_max(np.full(4, 20.0), generator_as_esr(50, 50, 25, "G"))
    assert q == 0 and np.all(pd_ == 0) and np.all(pc_ == 0)


def test_g3_self_schedule():
    g3 = ManipulationInstance.from_json().fleet.true_specs[2]
    q, pd_, _, _ = individual_profit_max(np.array([25.0, 30.0]), g3)
    assert q == pytest.approx(1.6)
    np.testing.assert_allclose(pd_, [0, 0.8], atol=1e-12)


def test_storage_arbitrage_corner():
    s = EsrSpec("S", cap_d=1, cap_c=1, soc_min=0, soc_max=1, soc_init=0)
    q, pd_, pc_, e = individual_profit_max(np.array([10.0, 50.0]), s)
    assert q == pytest.approx(40)
    np.testing.assert_allclose(pc_, [1, 0])
    np.testing.assert_allclose(pd_, [0, 1])
    np.testing.assert_allclose(e, [1, 0])


def test_split_prices():
    s = EsrSpec("S", cap_d=1, cap_c=1, soc_min=0, soc_max=1, soc_init=0)
    q, *_ = individual_profit_max((np.array([10.0, 50.0]), np.array([30.0, 30.0])), s)
    assert q == pytest.approx(20)


def test_following_the_optimizer_has_no_loc():
    s = EsrSpec("S", cost_d=2, cost_c=1, cap_d=3, cap_c=2, ramp_up_d=2, ramp_down_d=2, soc_min=0, soc_max=4,
                soc_init=1, eff_c=0.9, eff_d=0.95)
    prices = np.array([12.0, 5.0, 40.0, 18.0])
    q, pd_, pc_, _ = individual_profit_max(prices, s)
    res = loc(prices, pd_, pc_, s)
    assert res.loc == 0 and abs(res.raw) < 1e-9 and res.violations == []


def test_calibrated_settlement(calibrated):
    inst, tr, prices = calibrated
    lm = profit_with_scheme("LMP", tr, prices, inst.fleet)
    assert lm.in_market[2] == pytest.approx(1.4, abs=1e-6)
    assert lm.loc[2] == pytest.approx(0.2, abs=1e-6)
    assert lm.total_profit[2] == pytest.approx(1.6, abs=1e-6)
    tl = profit_with_scheme("TLMP", tr, prices, inst.fleet)
    assert abs(tl.loc_raw[2]) <= 1e-6
    assert tl.total_profit[2] == pytest.approx(2.0, abs=1e-6)
    assert check_settlement(tr, prices, {"LMP": lm, "TLMP": tl}) == []


def test_single_generator_zero_profit_zero_surplus():
    g = generator_as_esr(100, 100, 30, "G")
    tr = roll_horizon([g], [40.0, 60.0, 50.0], W=2)
    rep = profit_with_scheme("LMP", tr, PriceSeries.from_trace(tr), [g])
    assert rep.total_profit[0] == pytest.approx(0, abs=1e-9)
    assert rep.merchandising_surplus == pytest.approx(0, abs=1e-9)


def test_unknown_scheme(calibrated):
    inst, tr, prices = calibrated
    with pytest.raises(ValueError):
        profit_with_scheme("PAB", tr, prices, inst.fleet)


def test_dispatch_feasibility_diagnostics():
    g = generator_as_esr(1.0, 0.8, 28, "G3")
    assert dispatch_feasible([0.2, 1.0], [0, 0], g) == []
    assert dispatch_feasible([0.0, 1.0], [0, 0], g) == ["discharge ramp"]
    assert "discharge capacity" in dispatch_feasible([1.2, 1.0], [0, 0], g)
    s = EsrSpec("S", cap_d=2, cap_c=2, soc_min=0, soc_max=1, soc_init=0)
    assert dispatch_feasible([0, 0], [2, 0], s) == ["state of charge"]


def test_in_market_profit_sign():
    s = EsrSpec("S", cost_d=1, cost_c=2, cap_d=1, cap_c=1, soc_min=0, soc_max=5)
    # charge 1 at 10 (values it at 2), discharge 1 at 50 (costs 1)
    assert in_market_profit(np.array([10.0, 50.0]), [0, 1], [1, 0], s) == pytest.approx(-10 + 2 + 50 - 1)


@pytest.mark.parametrize("seed", range(5))
def test_identities_on_random_trials(seed):
    rng = np.random.default_rng(seed)
    while True:
        ri = random_instance(rng, max_t=10, max_k=6)
        try:
            tr = roll_horizon(ri.fleet, ri.demand, ri.provider(), W=ri.W)
            break
        except WindowInfeasible:
            continue
    prices = PriceSeries.from_trace(tr)
    reps = {s: profit_with_scheme(s, tr, prices, ri.fleet) for s in ("LMP", "TLMP")}
    assert check_settlement(tr, prices, reps) == []
    assert np.all(reps["LMP"].loc >= 0)


def test_settlement_csv(tmp_path, calibrated):
    inst, tr, prices = calibrated
    reps = [profit_with_scheme(s, tr, prices, inst.fleet) for s in ("LMP", "TLMP")]
    write_settlement_csv(reps, tmp_path / "s.csv", trial=0)
    rows = list(csv.DictReader(open(tmp_path / "s.csv")))
    assert len(rows) == 2 * (3 + 1)
    assert {r["resource"] for r in rows} == {"G1", "G2", "G3", "ISO"}
