import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from storage_pricing.scenario import (
    DemandModel, ScenarioProvider, deterministic_forecast, forecast_scenarios, generate_demand_traces,
    load_profile,
)


def test_packaged_profile():
    prof = load_profile()
    assert prof.shape == (24,)
    assert prof.min() > 0 and prof.argmax() == 18


def test_profile_from_file(tmp_path):
    p = tmp_path / "p.csv"
    p.write_text("hour,demand_mwh\n0,10\n1,12.5\n")
    np.testing.assert_array_equal(load_profile(p), [10, 12.5])


def test_trace_statistics():
    base = np.full(24, 100.0)
    tr = generate_demand_traces(DemandModel(base, trace_noise_std=0.05, seed=3), 2000)
    resid = tr - base
    assert abs(resid.mean()) < 0.05  # 5 / sqrt(48000) ~ 0.023
    assert resid.std() == pytest.approx(5.0, rel=0.02)


def test_traces_are_keyed_by_trial():
    m = DemandModel(load_profile(), seed=11)
    all_ = generate_demand_traces(m, 6)
    tail = generate_demand_traces(m, 3, first_trial=3)
    np.testing.assert_array_equal(all_[3:], tail)


def test_forecast_errors_grow_with_lead():
    d = np.full(6, 200.0)
    scen, p = forecast_scenarios(d, 0, 5, 4000, 0.02, seed=1)
    assert scen.shape == (4000, 5) and p.sum() == pytest.approx(1)
    assert np.all(scen[:, 0] == 200.0)
    sd = (scen - 200.0).std(axis=0)
    # random walk: lead tau has std sigma*d*sqrt(tau)
    np.testing.assert_allclose(sd[1:], 4.0 * np.sqrt(np.arange(1, 5)), rtol=0.05)
    assert abs((scen[:, 1:] - 200).mean()) < 0.2


def test_zero_sigma_is_perfect_foresight():
    d = np.arange(1.0, 8.0)
    scen, _ = forecast_scenarios(d, 2, 3, 5, 0.0, seed=0)
    np.testing.assert_array_equal(scen, np.tile(d[2:5], (5, 1)))


def test_window_truncates_at_horizon():
    d = np.arange(1.0, 6.0)
    scen, _ = forecast_scenarios(d, 3, 4, 2, 0.01, seed=0)
    assert scen.shape == (2, 2)
    assert deterministic_forecast(d, 4, 4)[0].shape == (1, 1)


def test_provider_modes():
    d = np.linspace(100, 150, 10)
    sto = ScenarioProvider(d, 0.03, 8, seed=5, trial=2)
    smp = ScenarioProvider(d, 0.03, 8, seed=5, trial=2, mode="sample")
    mean = ScenarioProvider(d, 0.03, 8, seed=5, trial=2, mode="mean")
    s, _ = sto(1, 4)
    np.testing.assert_array_equal(smp(1, 4)[0], s[:1])
    np.testing.assert_array_equal(mean(1, 4)[0], d[None, 1:5])
    with pytest.raises(ValueError):
        ScenarioProvider(d, 0.1, 2, mode="oracle")


@pytest.mark.parametrize("kw", [dict(base_profile=[]), dict(base_profile=[1.0, -1.0]),
                                dict(base_profile=[1.0], K=0), dict(base_profile=[1.0], trace_noise_std=-1)])
def test_demand_model_rejects(kw):
    with pytest.raises(ValueError):
        DemandModel(**kw)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), trial=st.integers(0, 1000), t=st.integers(0, 9), K=st.integers(1, 6))
def test_forecasts_replay_exactly(seed, trial, t, K):
    d = np.linspace(50, 80, 10)
    a = forecast_scenarios(d, t, 4, K, 0.01, seed, trial)[0]
    b = forecast_scenarios(d, t, 4, K, 0.01, seed, trial)[0]
    np.testing.assert_array_equal(a, b)
    assert np.all(a >= 0) and np.all(a[:, 0] == d[t])
