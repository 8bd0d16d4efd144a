"""Monte Carlo experiments, the bid-manipulation grid and result export.

Case numbering: 1 and 2 dispatch the generators only, 3 and 4 add the
storage unit; 1 and 3 use one forecast path per window, 2 and 4 use K
scenarios.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from importlib import metadata, resources
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy

from .dispatch import WindowInfeasible, roll_horizon
from .model import BidParameters, Fleet, fleet_from_dict, load_fleet
from .pricing import PriceSeries
from .scenario import DemandModel, ScenarioProvider, generate_demand_traces, load_profile
from .settlement import dispatch_feasible, in_market_profit, loc, profit_with_scheme
from .solver import SolverError

log = logging.getLogger(__name__)

CASES = {1: ("deterministic", False), 2: ("stochastic", False), 3: ("deterministic", True), 4: ("stochastic", True)}


def packaged(name: str) -> Path:
    return Path(str(resources.files("storage_pricing.data").joinpath(name)))


@dataclass(frozen=True)
class ExperimentConfig:
    case: int | str = 2
    fleet_path: str | None = None
    profile_path: str | None = None
    T: int = 24
    W: int = 4
    K: int = 30
    sigmas: tuple[float, ...] = (0.001, 0.01, 0.03)
    n_trials: int = 100
    seed: int = 2022
    out_dir: str | None = None
    schemes: tuple[str, ...] = ("LMP", "TLMP")
    trace_noise_std: float = 0.05
    deterministic_forecast: str = "sample"
    include_storage: bool | None = None
    stochastic: bool | None = None
    backend: str = "highs"
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "sigmas", tuple(float(s) for s in self.sigmas))
        object.__setattr__(self, "schemes", tuple(self.schemes))
        if not self.sigmas:
            raise ValueError("sigma list must not be empty")
        if self.case != "custom" and self.case not in CASES:
            raise ValueError(f"unknown case {self.case!r}")
        if self.deterministic_forecast not in ("sample", "mean"):
            raise ValueError("deterministic_forecast must be 'sample' or 'mean'")
        if self.case == "custom" and (self.include_storage is None or self.stochastic is None):
            raise ValueError("a custom case must set include_storage and stochastic")
        if not 1 <= self.W <= self.T:
            raise ValueError("window must satisfy 1 <= W <= T")

    @property
    def is_stochastic(self) -> bool:
        return CASES[self.case][0] == "stochastic" if self.case != "custom" else bool(self.stochastic)

    @property
    def has_storage(self) -> bool:
        return CASES[self.case][1] if self.case != "custom" else bool(self.include_storage)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sigmas"] = list(self.sigmas)
        d["schemes"] = list(self.schemes)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        for k in ("sigmas", "schemes"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)

    def digest(self) -> str:
        """Hash of everything that determines the numbers (not where they go)."""
        d = self.to_dict()
        d.pop("out_dir")
        d.pop("workers")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


def case_fleet(config: ExperimentConfig) -> Fleet:
    fleet = load_fleet(config.fleet_path or packaged("fleet_case.json"))
    if not config.has_storage:
        fleet = fleet.without_kind("esr")
    return replace(fleet, horizon=config.T, window=config.W)


def case_traces(config: ExperimentConfig) -> np.ndarray:
    profile = load_profile(config.profile_path)[: config.T]
    model = DemandModel(profile, config.trace_noise_std, 0.0, config.K, config.seed)
    return generate_demand_traces(model, config.n_trials)


def run_trial(config: ExperimentConfig, fleet: Fleet, trace: np.ndarray, sigma: float, trial: int) -> dict:
    """Dispatch, price and settle one demand realization."""
    if config.is_stochastic:
        provider = ScenarioProvider(trace, sigma, config.K, config.seed, trial, "stochastic")
    else:
        provider = ScenarioProvider(trace, sigma, config.K, config.seed, trial, config.deterministic_forecast)
    try:
        tr = roll_horizon(fleet, trace, provider, "stochastic" if config.is_stochastic else "deterministic",
                          W=config.W, backend=config.backend)
        prices = PriceSeries.from_trace(tr)
        reports = {s: profit_with_scheme(s, tr, prices, fleet, config.backend) for s in config.schemes}
    except (WindowInfeasible, SolverError, ArithmeticError) as exc:
        log.warning("trial %d (sigma=%g) dropped: %s", trial, sigma, exc)
        return {"trial": trial, "sigma": sigma, "ok": False, "reason": str(exc)}
    return {
        "trial": trial, "sigma": sigma, "ok": True, "reason": "",
        "ids": tr.ids, "kinds": [s.kind for s in tr.specs],
        "reports": {s: _report_dict(r) for s, r in reports.items()},
        "simultaneous": tr.simultaneous_count,
    }


def _report_dict(r) -> dict:
    return {
        "in_market": r.in_market.tolist(), "loc": r.loc.tolist(), "loc_raw": r.loc_raw.tolist(),
        "total": r.total_profit.tolist(), "q": r.q.tolist(), "demand_charge": r.demand_charge,
        "surplus_pre_uplift": r.surplus_pre_uplift, "merchandising_surplus": r.merchandising_surplus,
        "payments": r.payments.tolist(),
    }


def _run_one(args):
    return run_trial(*args)


def run_case(config: ExperimentConfig) -> dict:
    """All trials for every sigma; returns per-trial results plus aggregates."""
    fleet = case_fleet(config)
    traces = case_traces(config)
    jobs = [(config, fleet, traces[j], s, j) for s in config.sigmas for j in range(config.n_trials)]
    workers = config.workers if config.workers > 0 else (os.cpu_count() or 1)
    if workers == 1:
        results = [_run_one(a) for a in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    results.sort(key=lambda r: (config.sigmas.index(r["sigma"]), r["trial"]))
    return {"config": config, "trials": results, "summary": aggregate(config, results)}


def _mean_se(values) -> tuple[float, float]:
    v = np.asarray(values, float)
    if v.size == 0:
        return math.nan, math.nan
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    return float(v.mean()), se


def aggregate(config: ExperimentConfig, results: Sequence[dict]) -> dict:
    """Per-sigma means and standard errors, reduced in trial order."""
    out = {"case": config.case, "sigmas": []}
    for s in config.sigmas:
        rs = [r for r in results if r["sigma"] == s]
        ok = [r for r in rs if r["ok"]]
        entry = {"sigma": s, "n_trials": len(ok), "dropped": len(rs) - len(ok), "schemes": {}}
        for scheme in config.schemes:
            m = {}
            if ok:
                kinds = ok[0]["kinds"]
                for kind in sorted(set(kinds)):
                    vals = [sum(l for l, k in zip(r["reports"][scheme]["loc"], kinds) if k == kind) for r in ok]
                    m[f"loc_{kind}"] = _mean_se(vals)
                m["loc_total"] = _mean_se([sum(r["reports"][scheme]["loc"]) for r in ok])
                m["merchandising_surplus"] = _mean_se([r["reports"][scheme]["merchandising_surplus"] for r in ok])
                m["max_abs_loc"] = max(max(map(abs, r["reports"][scheme]["loc_raw"]), default=0.0) for r in ok)
            entry["schemes"][scheme] = {k: ({"mean": v[0], "stderr": v[1]} if isinstance(v, tuple) else v)
                                        for k, v in m.items()}
        out["sigmas"].append(entry)
    return out


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


TRIAL_COLUMNS = ["case", "sigma", "trial", "resource", "kind", "scheme", "in_market", "loc", "total"]
LONG_COLUMNS = ["case", "sigma", "scheme", "metric", "mean", "stderr", "n_trials"]


def export_results(metrics: dict, out_dir: str | Path, format: str = "csv") -> list[Path]:
    """Write trial and summary tables plus a replay manifest."""
    if format != "csv":
        raise ValueError("only csv export is supported")
    cfg: ExperimentConfig = metrics["config"]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tag = f"case{cfg.case}"
    paths = []

    p = out / f"{tag}_trials.csv"
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRIAL_COLUMNS)
        for r in metrics["trials"]:
            if not r["ok"]:
                continue
            for scheme, rep in r["reports"].items():
                for i, rid in enumerate(r["ids"]):
                    w.writerow([cfg.case, _fmt(r["sigma"]), r["trial"], rid, r["kinds"][i], scheme,
                                _fmt(rep["in_market"][i]), _fmt(rep["loc"][i]), _fmt(rep["total"][i])])
                w.writerow([cfg.case, _fmt(r["sigma"]), r["trial"], "ISO", "iso", scheme, "", "",
                            _fmt(rep["merchandising_surplus"])])
    paths.append(p)

    p = out / f"{tag}_summary_long.csv"
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LONG_COLUMNS)
        for e in metrics["summary"]["sigmas"]:
            for scheme, m in e["schemes"].items():
                for metric, v in m.items():
                    if isinstance(v, dict):
                        w.writerow([cfg.case, _fmt(e["sigma"]), scheme, metric, _fmt(v["mean"]),
                                    _fmt(v["stderr"]), e["n_trials"]])
    paths.append(p)

    p = out / f"{tag}_summary.json"
    p.write_text(json.dumps(metrics["summary"], indent=2, sort_keys=True) + "\n")
    paths.append(p)

    p = out / f"{tag}_manifest.json"
    p.write_text(json.dumps(manifest(cfg), indent=2, sort_keys=True) + "\n")
    paths.append(p)
    return paths


def manifest(cfg: ExperimentConfig) -> dict:
    try:
        version = metadata.version("storage-pricing")
    except metadata.PackageNotFoundError:
        version = "unknown"
    return {
        "config": cfg.to_dict(), "config_hash": cfg.digest(), "seed": cfg.seed,
        "rng": "numpy Philox4x64 keyed by SeedSequence(seed, stream, trial[, t])",
        "versions": {"storage_pricing": version, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
    }


def config_from_manifest(path: str | Path) -> ExperimentConfig:
    doc = json.loads(Path(path).read_text())
    cfg = ExperimentConfig.from_dict(doc["config"])
    if cfg.digest() != doc["config_hash"]:
        raise ValueError("manifest config does not match its hash")
    return cfg


# --- bid manipulation --------------------------------------------------------

@dataclass(frozen=True)
class ManipulationInstance:
    fleet: Fleet
    demand_path: np.ndarray
    T: int
    lmp: np.ndarray
    tlmp_d: np.ndarray
    tlmp_c: np.ndarray
    derivation: str = ""

    @classmethod
    def from_json(cls, path: str | Path | None = None) -> "ManipulationInstance":
        doc = json.loads(Path(path or packaged("manipulation_instance.json")).read_text())
        unknown = set(doc) - {"fleet", "demand_path", "T", "fixed_prices", "derivation"}
        if unknown:
            raise ValueError(f"unknown instance keys: {sorted(unknown)}")
        fp = doc["fixed_prices"]
        return cls(fleet_from_dict(doc["fleet"]), np.asarray(doc["demand_path"], float), int(doc["T"]),
                   np.asarray(fp["lmp"], float), np.asarray(fp["tlmp_d"], float),
                   np.asarray(fp.get("tlmp_c", fp["tlmp_d"]), float), doc.get("derivation", ""))


@dataclass(frozen=True)
class GridSpec:
    resource: str
    cost_values: tuple[float, ...]
    ramp_values: tuple[float, ...]

    def __post_init__(self):
        for name in ("cost_values", "ramp_values"):
            v = tuple(float(x) for x in getattr(self, name))
            if not v or not all(math.isfinite(x) for x in v) or list(v) != sorted(v):
                raise ValueError(f"{name} must be finite, non-empty and sorted")
            object.__setattr__(self, name, v)


@dataclass
class GridResult:
    spec: GridSpec
    pi_lmp: np.ndarray
    pi_tlmp: np.ndarray
    status: np.ndarray
    g_d: np.ndarray = field(repr=False, default=None)

    def truthful_index(self, cost: float, ramp: float) -> tuple[int, int]:
        return (int(np.argmin(np.abs(np.asarray(self.spec.cost_values) - cost))),
                int(np.argmin(np.abs(np.asarray(self.spec.ramp_values) - ramp))))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["cost", "ramp", "status", "pi_lmp", "pi_tlmp"])
            for a, c in enumerate(self.spec.cost_values):
                for b, r in enumerate(self.spec.ramp_values):
                    w.writerow([_fmt(c), _fmt(r), self.status[a, b], _fmt(self.pi_lmp[a, b]), _fmt(self.pi_tlmp[a, b])])


def bid_manipulation_grid(grid: GridSpec, instance: ManipulationInstance, backend="simplex") -> GridResult:
    """Profit of one price-taking resource for each (bid cost, bid ramp) pair.

    Prices stay at the instance's fixed values. The uplift under LMP is the
    LOC the operator computes from the reported parameters; profits use the
    true costs. Status is ``ok``, ``infeasible`` (the bid makes dispatch
    infeasible) or ``undeliverable`` (the dispatch breaks true limits).
    """
    fleet = instance.fleet
    i = fleet.index(grid.resource)
    true = fleet.true_specs[i]
    shape = (len(grid.cost_values), len(grid.ramp_values))
    pi_l, pi_t = np.full(shape, np.nan), np.full(shape, np.nan)
    status = np.full(shape, "ok", dtype=object)
    g_all = np.full(shape + (instance.T,), np.nan)
    for a, c in enumerate(grid.cost_values):
        for b, r in enumerate(grid.ramp_values):
            bid = BidParameters(cost_d=c, ramp_up_d=r, ramp_down_d=r)
            f = fleet.with_bid(grid.resource, bid)
            try:
                tr = roll_horizon(f, instance.demand_path, W=fleet.window, T=instance.T, backend=backend)
            except WindowInfeasible:
                status[a, b] = "infeasible"
                continue
            gd, gc = tr.g_d[:, i], tr.g_c[:, i]
            g_all[a, b] = gd
            if dispatch_feasible(gd, gc, true):
                status[a, b] = "undeliverable"
            upl = loc(instance.lmp, gd, gc, f.reported_specs[i], backend).loc
            pi_l[a, b] = in_market_profit(instance.lmp, gd, gc, true) + upl
            pi_t[a, b] = in_market_profit((instance.tlmp_d, instance.tlmp_c), gd, gc, true)
    return GridResult(grid, pi_l, pi_t, status, g_all)




TRACE_COLUMNS = ["trial", "t", "resource", "g_d", "g_c", "soc", "lmp", "tlmp_c", "tlmp_d", "phi", "delta_c", "delta_d"]


def write_trace_csv(path: str | Path, items) -> None:
    """One row per (trial, t, resource); ``items`` yields ``(trial, trace, prices)``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for trial, tr, pr in items:
            for t, r in enumerate(tr.records):
                for i, rid in enumerate(tr.ids):
                    w.writerow([trial, t, rid] + [_fmt(float(v)) for v in (
                        r.g_d[i], r.g_c[i], r.soc[i], pr.lmp[t], pr.tlmp_c[t, i], pr.tlmp_d[t, i],
                        pr.phi[t, i], pr.delta_c[t, i], pr.delta_d[t, i])])
