"""Invariant checks shared by the ``check`` command and the test suite.

Each check returns a list of human-readable violations; an empty list means
the invariant holds.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dispatch import DispatchTrace, roll_horizon
from .model import EsrSpec, Fleet, generator_as_esr
from .pricing import PriceSeries, reduces_to_lmp, soc_price_via_limits
from .scenario import ScenarioProvider
from .settlement import SettlementReport, profit_with_scheme, tlmp_surplus_identity

TOL = 1e-6


def check_trace(trace: DispatchTrace, tol: float = TOL) -> list[str]:
    """Balance, SOC recursion and SOC limits along a trace.

    Simultaneous charging and discharging is not a violation here; it is
    counted on the trace (``simultaneous_count``) and reported by callers.
    """
    out = []
    net = trace.g_d.sum(axis=1) - trace.g_c.sum(axis=1)
    bad = np.abs(net - trace.demand) > 1e-7 * (1 + np.abs(trace.demand))
    for t in np.flatnonzero(bad):
        out.append(f"t={t}: power balance off by {net[t] - trace.demand[t]:.3g}")
    prev = np.array([s.soc_init for s in trace.specs])
    for t, r in enumerate(trace.records):
        for i, s in enumerate(trace.specs):
            exp = prev[i] + s.eff_c * r.g_c[i] - r.g_d[i] / s.eff_d
            if abs(r.soc[i] - exp) > 1e-7 * (1 + abs(exp)):
                out.append(f"t={t} {s.id}: SOC recursion off by {r.soc[i] - exp:.3g}")
            if r.soc[i] < s.soc_min - 1e-7 or r.soc[i] > s.soc_max + 1e-7:
                out.append(f"t={t} {s.id}: SOC {r.soc[i]} outside limits")
        prev = r.soc
    return out


def check_prices(trace: DispatchTrace, prices: PriceSeries, tol: float = TOL) -> list[str]:
    """SOC-price identity, TLMP-to-LMP reduction and price decomposition."""
    out = []
    for r in trace.records:
        for i, s in enumerate(trace.specs):
            via = soc_price_via_limits(r, i)
            if abs(via - r.phi[i]) > tol:
                out.append(f"t={r.t} {s.id}: SOC price {r.phi[i]} but limit duals sum to {via}")
            try:
                reduces_to_lmp(r, i, s, tol)
            except AssertionError as exc:
                out.append(str(exc))
    res = prices.decomposition_residual(trace.specs)
    if res > 1e-12:
        out.append(f"price decomposition residual {res:.3g}")
    return out


def check_settlement(trace: DispatchTrace, prices: PriceSeries, reports: dict[str, SettlementReport],
                     tol: float = TOL) -> list[str]:
    out = []
    lmp_rep = reports.get("LMP")
    if lmp_rep is not None:
        scale = 1.0 + lmp_rep.demand_charge + float(np.abs(lmp_rep.payments).sum())
        if abs(lmp_rep.surplus_pre_uplift) > 1e-9 * scale:
            out.append(f"LMP surplus before uplift is {lmp_rep.surplus_pre_uplift:.3g}, not 0")
        gap = lmp_rep.merchandising_surplus + lmp_rep.loc.sum()
        if abs(gap) > 1e-9 * scale:
            out.append(f"LMP surplus after uplift differs from -sum(LOC) by {gap:.3g}")
        if np.any(lmp_rep.loc_raw < -tol * (1 + np.abs(lmp_rep.q))):
            out.append("negative LOC under LMP beyond tolerance")
    t_rep = reports.get("TLMP")
    if t_rep is not None:
        for i, rid in enumerate(t_rep.ids):
            if abs(t_rep.loc_raw[i]) > tol * (1 + abs(t_rep.q[i])):
                out.append(f"{rid}: LOC under TLMP is {t_rep.loc_raw[i]:.3g}")
        ident = tlmp_surplus_identity(trace, prices)
        scale = 1.0 + t_rep.demand_charge
        if abs(ident - t_rep.merchandising_surplus) > 1e-9 * scale:
            out.append(f"TLMP surplus {t_rep.merchandising_surplus} differs from price-gap sum {ident}")
    return out


def check_all(fleet, demand, provider=None, *, W: int, T: int | None = None, backend="simplex") -> list[str]:
    """Dispatch, price and settle one instance, then run every check."""
    trace = roll_horizon(fleet, demand, provider, W=W, T=T, backend=backend)
    prices = PriceSeries.from_trace(trace)
    reports = {s: profit_with_scheme(s, trace, prices, fleet, backend) for s in ("LMP", "TLMP")}
    return check_trace(trace) + check_prices(trace, prices) + check_settlement(trace, prices, reports)


@dataclass
class RandomInstance:
    specs: list[EsrSpec]
    demand: np.ndarray
    W: int
    K: int
    sigma: float
    seed: int

    def provider(self):
        mode = "stochastic" if self.K > 1 else "sample"
        return ScenarioProvider(self.demand, self.sigma, self.K, self.seed, 0, mode)

    @property
    def fleet(self) -> Fleet:
        return Fleet.from_specs(self.specs, self.demand.size, self.W)


def random_instance(rng: np.random.Generator, *, max_n: int = 5, max_t: int = 24, max_w: int = 4,
                    max_k: int = 20, sigmas=(0.0, 0.01, 0.03)) -> RandomInstance:
    """A random fleet and demand path.

    A fast, expensive backstop generator with ample capacity covers any
    demand increase; the other resources are drawn at random so that ramp
    and SOC limits bind. Fast demand drops can still be infeasible, so
    callers redraw on :class:`~storage_pricing.dispatch.WindowInfeasible`.
    """
    N = int(rng.integers(2, max_n + 1))
    T = int(rng.integers(2, max_t + 1))
    W = int(rng.integers(1, min(max_w, T) + 1))
    K = int(rng.integers(1, max_k + 1))
    sigma = float(rng.choice(sigmas))
    base = rng.uniform(50, 150)
    demand = np.round(base + rng.normal(0, 0.2 * base, T).cumsum() * 0.3 + rng.normal(0, 5, T), 3)
    demand = np.clip(demand, 5.0, None)
    peak = float(demand.max()) * 1.5
    specs = [generator_as_esr(peak * 3, peak * 3, float(np.round(rng.uniform(60, 90), 2)), "B", init=0.0)]
    specs[0] = EsrSpec(**{**specs[0].__dict__, "ramp_down_d": peak * 3})
    for j in range(1, N):
        kind = rng.choice(["generator", "esr", "dera"])
        cd = float(np.round(rng.uniform(5, 55), 2))
        cap = float(np.round(rng.uniform(5, 0.6 * base), 2))
        ramp = float(np.round(rng.uniform(0.1, 1.0) * cap, 2))
        if kind == "generator":
            init = float(np.round(rng.uniform(0, min(cap, demand[0] * 0.3)), 2))
            specs.append(generator_as_esr(cap, ramp, cd, f"R{j}", ramp_down=float(np.round(rng.uniform(0.1, 1) * cap, 2)),
                                          init=init))
            continue
        eff_c = float(np.round(rng.uniform(0.8, 1.0), 3))
        eff_d = float(np.round(rng.uniform(0.8, 1.0), 3))
        cc = float(np.round(rng.uniform(0, cd * eff_c * eff_d * 0.95), 2))
        capc = float(np.round(rng.uniform(1, cap), 2))
        if kind == "esr":
            emax = float(np.round(rng.uniform(2, 4 * cap), 2))
            soc = dict(soc_min=float(np.round(rng.uniform(0, 0.2 * emax), 2)), soc_max=emax)
            soc["soc_init"] = float(np.round(rng.uniform(soc["soc_min"], emax), 2))
        else:
            soc = dict(soc_min=-np.inf, soc_max=np.inf, soc_init=0.0)
        specs.append(EsrSpec(
            id=f"R{j}", kind=str(kind), cost_d=cd, cost_c=cc, cap_d=cap, cap_c=capc,
            ramp_up_d=ramp, ramp_down_d=float(np.round(rng.uniform(0.1, 1) * cap, 2)),
            ramp_up_c=float(np.round(rng.uniform(0.1, 1) * capc, 2)),
            ramp_down_c=float(np.round(rng.uniform(0.1, 1) * capc, 2)),
            eff_c=eff_c, eff_d=eff_d, **soc,
        ))
    return RandomInstance(specs, demand, W, K, sigma, int(rng.integers(0, 2**31)))
