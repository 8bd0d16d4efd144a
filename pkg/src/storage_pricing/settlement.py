"""Ex-post settlement: self-scheduling benchmark, lost opportunity cost, surplus.

``Q(prices)`` is the best profit a price-taking resource could make over the
whole horizon by scheduling itself against the realized prices, subject to
its own limits and starting from its true initial output and SOC. LOC is
the gap between ``Q`` and the profit of following the dispatch.

Who knows what: the market operator computes the uplift from the parameters
a resource reported, while the resource's actual profit uses its true costs.
For a truthful bidder the two coincide.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .dispatch import DispatchTrace
from .model import EsrSpec, Fleet
from .pricing import PriceSeries
from .solver import LinearProgram, SolverError, solve

log = logging.getLogger(__name__)

SCHEMES = ("LMP", "TLMP")


def _price_pair(prices, T):
    """Normalize to ``(discharge prices, charge prices)`` of length T."""
    if isinstance(prices, tuple) and len(prices) == 2:
        pd_, pc_ = (np.broadcast_to(np.asarray(p, float), (T,)).copy() for p in prices)
    else:
        pd_ = np.broadcast_to(np.asarray(prices, float), (T,)).copy()
        pc_ = pd_.copy()
    return pd_, pc_


def individual_profit_max(prices, spec: EsrSpec, T: int | None = None, backend="simplex"):
    """Self-scheduled optimum ``(Q, p_d, p_c, e)`` at fixed prices.

    ``prices`` is one vector (uniform price) or a ``(discharge, charge)``
    pair of vectors.
    """
    if T is None:
        T = len(prices[0]) if isinstance(prices, tuple) else len(prices)
    pd_, pc_ = _price_pair(prices, T)
    s = spec
    if s.has_soc_limits and not s.soc_min <= s.soc_init <= s.soc_max:
        raise ValueError(f"{s.id}: initial SOC outside its limits")
    lp = LinearProgram(f"selfsched_{s.id}")
    d = [lp.add_var(("pd", t), 0.0, s.cap_d, s.discharge_curve.marginal(t) - pd_[t]) if s.can_discharge else None
         for t in range(T)]
    c = [lp.add_var(("pc", t), 0.0, s.cap_c, pc_[t] - s.charge_curve.marginal(t)) if s.can_charge else None
         for t in range(T)]
    e = [lp.add_var(("e", t), s.soc_min, s.soc_max) if s.has_soc_limits else None for t in range(T)]
    for t in range(T):
        if s.has_soc_limits:
            row = {e[t]: -1.0}
            if t:
                row[e[t - 1]] = 1.0
            if c[t] is not None:
                row[c[t]] = s.eff_c
            if d[t] is not None:
                row[d[t]] = -1.0 / s.eff_d
            rhs = -s.soc_init if t == 0 else 0.0
            lp.add_row(("soc", t), row, rhs, rhs)
        for tag, col, up, down, g0 in (("rd", d, s.ramp_up_d, s.ramp_down_d, s.init_d),
                                       ("rc", c, s.ramp_up_c, s.ramp_down_c, s.init_c)):
            if col[t] is None or (math.isinf(up) and math.isinf(down)):
                continue
            if t == 0:
                lp.add_row((tag, t), {col[0]: 1.0}, g0 - down, g0 + up)
            else:
                lp.add_row((tag, t), {col[t]: 1.0, col[t - 1]: -1.0}, -down, up)
    sol = solve(lp, backend)
    if not sol.optimal:
        raise SolverError(f"self-schedule LP for {s.id} is {sol.status.value}")
    x = sol.x
    p_d = np.array([x[j] if j is not None else 0.0 for j in d])
    p_c = np.array([x[j] if j is not None else 0.0 for j in c])
    soc = np.cumsum(s.eff_c * p_c - p_d / s.eff_d) + s.soc_init
    return -sol.objective, p_d, p_c, soc


def in_market_profit(prices, g_d, g_c, spec: EsrSpec) -> float:
    """Credit for following the dispatch minus the bid-curve cost of ``spec``."""
    g_d, g_c = np.asarray(g_d, float), np.asarray(g_c, float)
    T = g_d.size
    pd_, pc_ = _price_pair(prices, T)
    cd = np.array([spec.discharge_curve.marginal(t) for t in range(T)])
    cc = np.array([spec.charge_curve.marginal(t) for t in range(T)])
    return float(pd_ @ g_d - pc_ @ g_c - cd @ g_d + cc @ g_c)


def dispatch_feasible(g_d, g_c, spec: EsrSpec, tol: float = 1e-6) -> list[str]:
    """Limits of ``spec`` that the dispatch schedule breaks (empty if none)."""
    g_d, g_c = np.asarray(g_d, float), np.asarray(g_c, float)
    out = []
    if np.any(g_d > spec.cap_d + tol) or np.any(g_d < -tol):
        out.append("discharge capacity")
    if np.any(g_c > spec.cap_c + tol) or np.any(g_c < -tol):
        out.append("charge capacity")
    for name, g, g0, up, down in (("discharge ramp", g_d, spec.init_d, spec.ramp_up_d, spec.ramp_down_d),
                                  ("charge ramp", g_c, spec.init_c, spec.ramp_up_c, spec.ramp_down_c)):
        step = np.diff(np.concatenate([[g0], g]))
        if np.any(step > up + tol) or np.any(-step > down + tol):
            out.append(name)
    soc = spec.soc_init + np.cumsum(spec.eff_c * g_c - g_d / spec.eff_d)
    if np.any(soc < spec.soc_min - tol) or np.any(soc > spec.soc_max + tol):
        out.append("state of charge")
    return out


@dataclass
class LocResult:
    loc: float
    raw: float
    q: float
    realized: float
    violations: list[str] = field(default_factory=list)


def loc(prices, g_d, g_c, spec: EsrSpec, backend="simplex", tol: float = 1e-6) -> LocResult:
    """Lost opportunity cost of following ``(g_d, g_c)`` at ``prices``.

    Negative values within ``tol * (1 + |Q|)`` are floored at 0; the raw
    value is kept on the result.
    """
    g_d = np.asarray(g_d, float)
    q, *_ = individual_profit_max(prices, spec, g_d.size, backend)
    realized = in_market_profit(prices, g_d, g_c, spec)
    raw = q - realized
    viol = dispatch_feasible(g_d, g_c, spec)
    if viol:
        log.warning("%s: dispatch breaks %s", spec.id, ", ".join(viol))
    value = raw
    if -tol * (1 + abs(q)) <= raw < 0:
        log.debug("%s: floored LOC %.3g to 0", spec.id, raw)
        value = 0.0
    return LocResult(value, raw, q, realized, viol)


@dataclass
class SettlementReport:
    scheme: str
    ids: list[str]
    in_market: np.ndarray
    loc: np.ndarray
    loc_raw: np.ndarray
    uplift: np.ndarray
    total_profit: np.ndarray
    payments: np.ndarray
    demand_charge: float
    surplus_pre_uplift: float
    merchandising_surplus: float
    q: np.ndarray

    def rows(self):
        for i, rid in enumerate(self.ids):
            yield {"resource": rid, "scheme": self.scheme, "in_market": self.in_market[i],
                   "loc": self.loc[i], "total": self.total_profit[i]}
        yield {"resource": "ISO", "scheme": self.scheme, "in_market": "", "loc": "",
               "total": self.merchandising_surplus}


SETTLEMENT_COLUMNS = ["resource", "scheme", "in_market", "loc", "total"]


def profit_with_scheme(scheme: str, trace: DispatchTrace, prices: PriceSeries, fleet,
                       backend="simplex") -> SettlementReport:
    """Settle a dispatch trace under ``"LMP"`` (with LOC uplift) or ``"TLMP"``.

    ``fleet`` is a :class:`Fleet` (true and reported parameters) or a list of
    specs used as both. Demand pays the LMP under both schemes.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown pricing scheme {scheme!r}")
    if isinstance(fleet, Fleet):
        true_specs, bid_specs = fleet.true_specs, fleet.reported_specs
    else:
        true_specs = bid_specs = list(fleet)
    gd, gc = trace.g_d, trace.g_c
    lam = prices.lmp
    N = len(true_specs)
    in_mkt, locs, raws, qs, pay = (np.zeros(N) for _ in range(5))
    for i in range(N):
        if scheme == "LMP":
            pr = lam
        else:
            pr = (prices.tlmp_d[:, i], prices.tlmp_c[:, i])
        in_mkt[i] = in_market_profit(pr, gd[:, i], gc[:, i], true_specs[i])
        res = loc(pr, gd[:, i], gc[:, i], bid_specs[i], backend)
        locs[i], raws[i], qs[i] = res.loc, res.raw, res.q
        pd_, pc_ = _price_pair(pr, lam.size)
        pay[i] = float(pd_ @ gd[:, i] - pc_ @ gc[:, i])
    uplift = locs if scheme == "LMP" else np.zeros(N)
    demand_charge = float(lam @ trace.demand)
    pre = demand_charge - float(pay.sum())
    return SettlementReport(
        scheme, [s.id for s in true_specs], in_mkt, locs, raws, uplift, in_mkt + uplift, pay,
        demand_charge, pre, pre - float(uplift.sum()), qs,
    )


def tlmp_surplus_identity(trace: DispatchTrace, prices: PriceSeries) -> float:
    """Surplus under TLMP written as the per-resource price-gap sum."""
    lam = prices.lmp[:, None]
    return float(((lam - prices.tlmp_d) * trace.g_d + (prices.tlmp_c - lam) * trace.g_c).sum())


def write_settlement_csv(reports: Sequence[SettlementReport], path: str | Path, trial: int | None = None) -> None:
    cols = (["trial"] if trial is not None else []) + SETTLEMENT_COLUMNS
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for rep in reports:
            for row in rep.rows():
                if trial is not None:
                    row = {"trial": trial, **row}
                w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in row.items()})
