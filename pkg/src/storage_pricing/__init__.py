"""Stochastic rolling-window dispatch with LMP/TLMP storage pricing."""
from .dispatch import (
    BindingRecord, Boundary, DispatchTrace, WindowInfeasible, WindowProblem, build_window, roll_horizon,
    solve_window,
)
from .harness import (
    ExperimentConfig, GridSpec, ManipulationInstance, bid_manipulation_grid, export_results, run_case,
)
from .model import (
    BidParameters, EsrSpec, Fleet, dera_as_esr, fleet_from_dict, generator_as_esr, load_fleet, validate_fleet,
)
from .pricing import PriceSeries, lmp, reduces_to_lmp, tlmp
from .scenario import DemandModel, ScenarioProvider, forecast_scenarios, generate_demand_traces, load_profile
from .settlement import individual_profit_max, loc, profit_with_scheme

__all__ = [
    "BidParameters", "BindingRecord", "Boundary", "DemandModel", "DispatchTrace", "EsrSpec",
    "ExperimentConfig", "Fleet", "GridSpec", "ManipulationInstance", "PriceSeries", "ScenarioProvider",
    "WindowInfeasible", "WindowProblem", "bid_manipulation_grid", "build_window", "dera_as_esr",
    "export_results", "fleet_from_dict", "forecast_scenarios", "generate_demand_traces", "generator_as_esr",
    "individual_profit_max", "lmp", "load_fleet", "load_profile", "loc", "profit_with_scheme",
    "reduces_to_lmp", "roll_horizon", "run_case", "solve_window", "tlmp", "validate_fleet",
]
