import numpy as np
import pytest

from oracles import extensive_form, jitter_costs, one_shot
from storage_pricing.dispatch import (
    Boundary, WindowInfeasible, WindowProblem, binding_stationarity, build_window, roll_horizon, solve_window,
)
from storage_pricing.harness import ManipulationInstance
from storage_pricing.invariants import check_trace, random_instance
from storage_pricing.model import EsrSpec, generator_as_esr
from storage_pricing.solver import kkt_residuals, solve


@pytest.fixture(scope="module")
def calibrated():
    return ManipulationInstance.from_json()


def first_window(inst, backend="simplex"):
    specs = inst.fleet.reported_specs
    return WindowProblem(specs, 0, Boundary.initial(specs), inst.demand_path[None, :2], np.ones(1)), specs


def test_degenerate_window_is_single_interval_dispatch():
    g = generator_as_esr(100, 100, 17.5, "G")
    rec = solve_window(WindowProblem([g], 0, Boundary.initial([g]), [[60.0]], np.ones(1)))
    assert rec.g_d[0] == pytest.approx(60) and rec.lam == pytest.approx(17.5)


def test_calibrated_first_window(calibrated):
    prob, specs = first_window(calibrated)
    rec = solve_window(prob)
    assert rec.lam == pytest.approx(25, abs=1e-9)
    assert rec.g_d[2] == pytest.approx(0.2, abs=1e-9)
    assert binding_stationarity(rec, specs) <= 1e-9
    assert kkt_residuals(prob.lp, solve(prob.lp)).ok


@pytest.mark.parametrize("backend", ["simplex", "highs"])
def test_calibrated_two_windows(calibrated, backend):
    tr = roll_horizon(calibrated.fleet, calibrated.demand_path, W=2, T=2, backend=backend)
    np.testing.assert_allclose(tr.lam, [25, 30], atol=1e-9)
    np.testing.assert_allclose(tr.g_d[:, 2], [0.2, 1.0], atol=1e-9)
    assert check_trace(tr) == []


def test_constant_demand_one_generator_is_flat():
    g = generator_as_esr(200, 200, 22, "G")
    tr = roll_horizon([g], np.full(6, 80.0), W=3)
    np.testing.assert_allclose(tr.g_d[:, 0], 80)
    np.testing.assert_allclose(tr.lam, 22)


def test_infeasible_window_carries_interval():
    g = generator_as_esr(100, 10, 10, "G", init=50)
    with pytest.raises(WindowInfeasible) as err:
        roll_horizon([g], [50.0, 55.0, 90.0], W=1)
    assert err.value.t == 2


def test_demand_beyond_capability_is_infeasible():
    with pytest.raises(WindowInfeasible):
        roll_horizon([generator_as_esr(10, 10, 1, "G")], [11.0], W=1)


def test_corrupt_boundary_rejected():
    s = EsrSpec("S", cost_d=5, cost_c=1, cap_d=1, cap_c=1, soc_min=0, soc_max=2)
    with pytest.raises(ValueError):
        build_window([s], 0, Boundary(np.array([3.0]), np.zeros(1), np.zeros(1)), [[0.0]])


def two_scenario_fleet(rng):
    specs = [
        generator_as_esr(120, 30, 18, "G1", init=70),
        generator_as_esr(80, 80, 41, "G2"),
        EsrSpec("S", cost_d=12, cost_c=3, cap_d=15, cap_c=15, ramp_up_d=10, ramp_down_d=10, ramp_up_c=8,
                ramp_down_c=8, soc_min=1, soc_max=20, soc_init=9, eff_c=0.92, eff_d=0.9),
    ]
    return jitter_costs(specs, 4, rng)


@pytest.mark.parametrize("seed", range(6))
def test_two_scenario_window_matches_extensive_form(seed):
    rng = np.random.default_rng(seed)
    specs = two_scenario_fleet(rng)
    d0 = 80.0
    scen = np.array([[d0, rng.uniform(60, 140)], [d0, rng.uniform(60, 140)]])
    rec = solve_window(WindowProblem(specs, 0, Boundary.initial(specs), scen, np.array([0.5, 0.5])))
    obj, gd, gc, _ = extensive_form(specs, scen)
    assert rec.objective == pytest.approx(obj, abs=1e-7)
    np.testing.assert_allclose(rec.g_d, gd, atol=1e-6)
    np.testing.assert_allclose(rec.g_c, gc, atol=1e-6)


@pytest.mark.parametrize("seed", range(8))
def test_full_window_matches_one_shot(seed):
    rng = np.random.default_rng(100 + seed)
    while True:
        ri = random_instance(rng, max_t=10)
        specs = jitter_costs(ri.specs, ri.demand.size, rng)
        try:
            tr = roll_horizon(specs, ri.demand, W=ri.demand.size)
            break
        except WindowInfeasible:
            continue
    obj, gd, gc = one_shot(specs, ri.demand)
    np.testing.assert_allclose(tr.g_d, gd, atol=1e-6)
    np.testing.assert_allclose(tr.g_c, gc, atol=1e-6)


def test_replay_is_bitwise(calibrated):
    rng = np.random.default_rng(4)
    ri = random_instance(rng, max_t=8)
    runs = []
    for _ in range(2):
        try:
            tr = roll_horizon(ri.fleet, ri.demand, ri.provider(), W=ri.W)
        except WindowInfeasible:
            pytest.skip("drawn instance infeasible")
        runs.append(tr)
    for name in ("g_d", "g_c", "soc", "lam"):
        assert np.array_equal(getattr(runs[0], name), getattr(runs[1], name))


def test_forecast_must_start_at_realized_demand():
    g = generator_as_esr(100, 100, 1, "G")
    with pytest.raises(ValueError):
        roll_horizon([g], [10.0, 20.0], lambda t, w: (np.array([[99.0] * w]), np.ones(1)), W=2)


def test_lp_dump(tmp_path, calibrated):
    roll_horizon(calibrated.fleet, calibrated.demand_path, W=2, T=2, dump_dir=tmp_path)
    files = sorted(p.name for p in tmp_path.iterdir())
    assert files == ["window_t000.lp", "window_t001.lp"]
    assert "balance" in (tmp_path / files[0]).read_text()


def test_simultaneous_charge_discharge_is_counted_not_hidden():
    # storage that pays more to charge than it asks to discharge: both at once is optimal
    s = EsrSpec("S", cost_d=1, cost_c=50, cap_d=5, cap_c=5, soc_min=0, soc_max=100, soc_init=50,
                eff_c=0.8, eff_d=0.8)
    g = generator_as_esr(100, 100, 10, "G")
    tr = roll_horizon([g, s], [40.0, 40.0], W=1)
    assert not s.cost_order_holds()
    assert tr.g_d[0, 1] > 0 and tr.g_c[0, 1] > 0
    assert tr.simultaneous_count == 0  # only counted where the cost order should have ruled it out
    assert check_trace(tr) == []
