"""Scenario-based rolling-window dispatch.

One window LP at interval ``t`` has a binding node (interval ``t``) shared by
K scenario branches; branch ``k`` carries advisory copies of every variable
for ``t+1 .. t+L-1``. Constraints are written unweighted, and the scenario
probabilities appear in the objective only, so the row duals of different
branches can be summed directly.

Row forms (``y`` is the signed row dual, see :mod:`storage_pricing.solver.lp`):

* ``balance``: ``sum_i (gD - gC) = d``, so ``lambda = y``.
* ``soc_tr``: ``-E_n + E_parent + effC*gC - gD/effD = rhs`` with
  ``rhs = -E_boundary`` at the binding node (``E_parent`` absent) and 0
  elsewhere, so the SOC price is ``phi = y``.
* ``ramp_d`` / ``ramp_c``: ``g_n - g_parent`` in ``[-ramp_down, ramp_up]`` on
  advisory nodes. The upper dual is ``max(-y, 0)`` and the lower dual
  ``max(y, 0)``.
* Capacity and SOC limits are variable bounds; their duals are the split
  reduced costs. At the binding node the boundary ramp limit
  ``g0 - ramp_down <= g_t <= g0 + ramp_up`` also acts on a single variable,
  so it is merged into the bounds. The bound dual is credited to the
  capacity limit when that limit is at least as tight as the ramp limit and
  to the ramp otherwise. Both are valid duals when the two limits coincide,
  and crediting capacity first makes the choice independent of the backend.

Rows for limits that are unbounded on both sides are not written at all.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .model import EsrSpec, Fleet, specs_of
from .scenario import deterministic_forecast
from .solver import DEFAULT_TOLERANCES, INF, LinearProgram, LpSolution, Tolerances, solve

BINDING_SLACK = 1e-6


class WindowInfeasible(RuntimeError):
    def __init__(self, t: int, message: str = ""):
        super().__init__(f"dispatch window at interval {t} is infeasible" + (f": {message}" if message else ""))
        self.t = t


@dataclass(frozen=True)
class Boundary:
    """State left behind by the previous binding interval."""

    soc: np.ndarray
    g_d: np.ndarray
    g_c: np.ndarray

    @classmethod
    def initial(cls, specs: Sequence[EsrSpec]) -> "Boundary":
        return cls(
            np.array([s.soc_init for s in specs], float),
            np.array([s.init_d for s in specs], float),
            np.array([s.init_c for s in specs], float),
        )


@dataclass
class WindowIndex:
    """Column/row positions per (resource, node); -1 where absent."""

    n_nodes: int
    gd: np.ndarray
    gc: np.ndarray
    soc: np.ndarray
    soc_row: np.ndarray
    ramp_d: np.ndarray
    ramp_c: np.ndarray
    balance: np.ndarray
    ramp_owns_lo: np.ndarray = None
    ramp_owns_up: np.ndarray = None


@dataclass
class WindowProblem:
    specs: list[EsrSpec]
    t: int
    boundary: Boundary
    scenarios: np.ndarray
    probabilities: np.ndarray
    lp: LinearProgram | None = None
    index: WindowIndex | None = None

    def __post_init__(self):
        self.scenarios = np.atleast_2d(np.asarray(self.scenarios, float))
        self.probabilities = np.asarray(self.probabilities, float)
        K, L = self.scenarios.shape
        if K == 0 or L == 0:
            raise ValueError("a window needs at least one scenario and one interval")
        if self.probabilities.shape != (K,) or np.any(self.probabilities < 0) \
                or abs(self.probabilities.sum() - 1) > 1e-9:
            raise ValueError("scenario probabilities must be non-negative and sum to 1")
        if np.any(self.scenarios[:, 0] != self.scenarios[0, 0]):
            raise ValueError("all scenarios must share the realized binding-interval demand")

    @property
    def K(self) -> int:
        return self.scenarios.shape[0]

    @property
    def L(self) -> int:
        return self.scenarios.shape[1]

    @property
    def demand(self) -> float:
        return float(self.scenarios[0, 0])

    def node(self, tau: int, k: int) -> int:
        return 0 if tau == 0 else 1 + (tau - 1) * self.K + k

    def build(self) -> LinearProgram:
        if self.lp is None:
            self.lp, self.index = _build(self)
        return self.lp


def build_window(fleet, t: int, boundary: Boundary, scenarios, probabilities=None) -> LinearProgram:
    """The window LP at interval ``t`` for the reported parameters of ``fleet``."""
    scenarios = np.atleast_2d(np.asarray(scenarios, float))
    if probabilities is None:
        probabilities = np.full(scenarios.shape[0], 1.0 / scenarios.shape[0])
    return WindowProblem(specs_of(fleet), t, boundary, scenarios, probabilities).build()


def _node_tag(t, tau, k):
    return (t,) if tau == 0 else (t + tau, k)


def _build(p: WindowProblem):
    specs, t, K, L = p.specs, p.t, p.K, p.L
    N = len(specs)
    n_nodes = 1 + (L - 1) * K
    idx = WindowIndex(
        n_nodes,
        *(np.full((N, n_nodes), -1, np.int64) for _ in range(6)),
        np.full(n_nodes, -1, np.int64),
        np.zeros((N, 2), bool), np.zeros((N, 2), bool),
    )
    lp = LinearProgram(f"window_t{t}")
    nodes = [(0, 0)] + [(tau, k) for tau in range(1, L) for k in range(K)]
    weight = [1.0] + [float(p.probabilities[k]) for tau, k in nodes[1:]]

    for i, s in enumerate(specs):
        e0 = p.boundary.soc[i]
        tol = DEFAULT_TOLERANCES.feas
        if s.has_soc_limits and not (s.soc_min - tol <= e0 <= s.soc_max + tol):
            raise ValueError(f"boundary SOC {e0} of {s.id} outside [{s.soc_min}, {s.soc_max}] at t={t}")
        bd = _binding_bounds(s.cap_d, s.ramp_up_d, s.ramp_down_d, p.boundary.g_d[i])
        bc = _binding_bounds(s.cap_c, s.ramp_up_c, s.ramp_down_c, p.boundary.g_c[i])
        idx.ramp_owns_lo[i] = bd[2], bc[2]
        idx.ramp_owns_up[i] = bd[3], bc[3]
        for n, (tau, k) in enumerate(nodes):
            tag = _node_tag(t, tau, k)
            tt = t + tau
            if s.can_discharge:
                lo, hi = bd[:2] if n == 0 else (0.0, s.cap_d)
                idx.gd[i, n] = lp.add_var(("gd", i) + tag, lo, hi, weight[n] * s.discharge_curve.marginal(tt))
            if s.can_charge:
                lo, hi = bc[:2] if n == 0 else (0.0, s.cap_c)
                idx.gc[i, n] = lp.add_var(("gc", i) + tag, lo, hi, -weight[n] * s.charge_curve.marginal(tt))
            if s.has_soc_limits:
                idx.soc[i, n] = lp.add_var(("soc", i) + tag, s.soc_min, s.soc_max, 0.0)

    def parent(n):
        tau, k = nodes[n]
        return 0 if tau == 1 else (None if tau == 0 else p.node(tau - 1, k))

    for n, (tau, k) in enumerate(nodes):
        tag = _node_tag(t, tau, k)
        coeffs = {}
        for i in range(N):
            if idx.gd[i, n] >= 0:
                coeffs[int(idx.gd[i, n])] = 1.0
            if idx.gc[i, n] >= 0:
                coeffs[int(idx.gc[i, n])] = -1.0
        d = float(p.scenarios[0 if tau == 0 else k, tau])
        idx.balance[n] = lp.add_row(("balance",) + tag, coeffs, d, d)

        for i, s in enumerate(specs):
            par = parent(n)
            if s.has_soc_limits:
                c = {int(idx.soc[i, n]): -1.0}
                if par is not None:
                    c[int(idx.soc[i, par])] = 1.0
                if idx.gc[i, n] >= 0:
                    c[int(idx.gc[i, n])] = s.eff_c
                if idx.gd[i, n] >= 0:
                    c[int(idx.gd[i, n])] = -1.0 / s.eff_d
                rhs = -float(p.boundary.soc[i]) if par is None else 0.0
                idx.soc_row[i, n] = lp.add_row(("soc_tr", i) + tag, c, rhs, rhs)
            for side, col, up, down, g0, out in (
                ("ramp_d", idx.gd, s.ramp_up_d, s.ramp_down_d, p.boundary.g_d[i], idx.ramp_d),
                ("ramp_c", idx.gc, s.ramp_up_c, s.ramp_down_c, p.boundary.g_c[i], idx.ramp_c),
            ):
                if par is None or col[i, n] < 0 or (math.isinf(up) and math.isinf(down)):
                    continue
                out[i, n] = lp.add_row((side, i) + tag, {int(col[i, n]): 1.0, int(col[i, par]): -1.0}, -down, up)
    return lp, idx


def _binding_bounds(cap, up, down, g0):
    """Binding-node bounds and whether the ramp (not capacity) owns each side."""
    lo_r, hi_r = g0 - down, g0 + up
    lo, hi = max(0.0, lo_r), min(cap, hi_r)
    if lo > hi:
        # only reachable when the boundary state itself breaks the limits
        raise ValueError(f"boundary output {g0} is incompatible with capacity {cap}")
    return lo, hi, lo_r > 0.0, hi_r < cap


@dataclass
class BindingRecord:
    """Binding-interval dispatch and the duals that define its prices.

    Per-resource arrays have length N. ``*_next`` arrays are ``(N, K)`` duals
    of the first advisory ramp step; ``delta_*_adv`` are ``(N, L-1, K)``
    SOC-limit duals of advisory nodes. Every dual is non-negative.
    """

    t: int
    demand: float
    ids: list[str]
    g_d: np.ndarray
    g_c: np.ndarray
    soc: np.ndarray
    lam: float
    phi: np.ndarray
    mu_up_d: np.ndarray
    mu_lo_d: np.ndarray
    mu_up_c: np.ndarray
    mu_lo_c: np.ndarray
    mu_up_d_next: np.ndarray
    mu_lo_d_next: np.ndarray
    mu_up_c_next: np.ndarray
    mu_lo_c_next: np.ndarray
    delta_up: np.ndarray
    delta_lo: np.ndarray
    delta_up_adv: np.ndarray
    delta_lo_adv: np.ndarray
    rho_up_d: np.ndarray
    rho_lo_d: np.ndarray
    rho_up_c: np.ndarray
    rho_lo_c: np.ndarray
    ramp_binding: np.ndarray
    soc_binding: np.ndarray
    simultaneous: np.ndarray
    objective: float
    probabilities: np.ndarray
    window_len: int
    stationarity_residual: float = 0.0
    iterations: int = 0
    backend: str = ""

    @property
    def delta_ramp_d(self) -> np.ndarray:
        """``sum_k (mu_up - mu_lo)[t+1,k] - (mu_up - mu_lo)[t]`` for discharge."""
        return (self.mu_up_d_next - self.mu_lo_d_next).sum(axis=1) - (self.mu_up_d - self.mu_lo_d)

    @property
    def delta_ramp_c(self) -> np.ndarray:
        return (self.mu_up_c_next - self.mu_lo_c_next).sum(axis=1) - (self.mu_up_c - self.mu_lo_c)


def _split(v):
    return np.maximum(v, 0.0), np.maximum(-v, 0.0)


def _take(vec, pos):
    out = np.zeros(pos.shape)
    m = pos >= 0
    out[m] = vec[pos[m]]
    return out


def _slack_binding(act, lo, hi, pos):
    m = pos >= 0
    out = np.zeros(pos.shape, bool)
    out[m] = (act[pos[m]] - lo[pos[m]] <= BINDING_SLACK) | (hi[pos[m]] - act[pos[m]] <= BINDING_SLACK)
    return out


def solve_window(problem: WindowProblem, backend="simplex", tol: Tolerances = DEFAULT_TOLERANCES) -> BindingRecord:
    lp = problem.build()
    sol = solve(lp, backend)
    if not sol.optimal:
        raise WindowInfeasible(problem.t, sol.status.value)
    return extract_record(problem, sol, tol)


def extract_record(problem: WindowProblem, sol: LpSolution, tol: Tolerances = DEFAULT_TOLERANCES) -> BindingRecord:
    ix, specs, K, L = problem.index, problem.specs, problem.K, problem.L
    N = len(specs)
    x, y, z = sol.x, sol.y, sol.z
    lp = problem.lp
    row_lo, row_hi = np.asarray(lp.row_lo), np.asarray(lp.row_hi)
    lb, ub = np.asarray(lp.lb), np.asarray(lp.ub)
    act = lp.matrix() @ x

    g_d = _take(x, ix.gd[:, 0])
    g_c = _take(x, ix.gc[:, 0])
    eff_c = np.array([s.eff_c for s in specs])
    eff_d = np.array([s.eff_d for s in specs])
    soc = np.where(ix.soc[:, 0] >= 0, _take(x, ix.soc[:, 0]), problem.boundary.soc + eff_c * g_c - g_d / eff_d)

    lam = float(y[ix.balance[0]])
    phi = _take(y, ix.soc_row[:, 0])
    zd_lo, zd_up = _split(_take(z, ix.gd[:, 0]))
    zc_lo, zc_up = _split(_take(z, ix.gc[:, 0]))
    own_lo, own_up = ix.ramp_owns_lo, ix.ramp_owns_up
    mu_lo_d, rho_lo_d = np.where(own_lo[:, 0], zd_lo, 0.0), np.where(own_lo[:, 0], 0.0, zd_lo)
    mu_up_d, rho_up_d = np.where(own_up[:, 0], zd_up, 0.0), np.where(own_up[:, 0], 0.0, zd_up)
    mu_lo_c, rho_lo_c = np.where(own_lo[:, 1], zc_lo, 0.0), np.where(own_lo[:, 1], 0.0, zc_lo)
    mu_up_c, rho_up_c = np.where(own_up[:, 1], zc_up, 0.0), np.where(own_up[:, 1], 0.0, zc_up)
    first = ix.ramp_d[:, 1:1 + K] if L > 1 else np.full((N, K), -1)
    mu_lo_d_n, mu_up_d_n = _split(_take(y, first))
    first = ix.ramp_c[:, 1:1 + K] if L > 1 else np.full((N, K), -1)
    mu_lo_c_n, mu_up_c_n = _split(_take(y, first))
    delta_lo, delta_up = _split(_take(z, ix.soc[:, 0]))
    adv = ix.soc[:, 1:].reshape(N, L - 1, K)
    delta_lo_adv, delta_up_adv = _split(_take(z, adv))

    ramp_rows = np.concatenate([ix.ramp_d[:, 1:1 + K], ix.ramp_c[:, 1:1 + K]], axis=1)
    ramp_binding = _slack_binding(act, row_lo, row_hi, ramp_rows).any(axis=1)
    b = problem.boundary
    for i, s in enumerate(specs):
        for ok, g, g0, up, down in ((s.can_discharge, g_d[i], b.g_d[i], s.ramp_up_d, s.ramp_down_d),
                                    (s.can_charge, g_c[i], b.g_c[i], s.ramp_up_c, s.ramp_down_c)):
            if ok and (g - (g0 - down) <= BINDING_SLACK or (g0 + up) - g <= BINDING_SLACK):
                ramp_binding[i] = True
    soc_binding = _slack_binding(x, lb, ub, ix.soc).any(axis=1)

    cost_order = np.array([s.cost_order_holds() for s in specs])
    simultaneous = (g_d * g_c > tol.feas) & cost_order

    rec = BindingRecord(
        t=problem.t, demand=problem.demand, ids=[s.id for s in specs],
        g_d=g_d, g_c=g_c, soc=soc, lam=lam, phi=phi,
        mu_up_d=mu_up_d, mu_lo_d=mu_lo_d, mu_up_c=mu_up_c, mu_lo_c=mu_lo_c,
        mu_up_d_next=mu_up_d_n, mu_lo_d_next=mu_lo_d_n, mu_up_c_next=mu_up_c_n, mu_lo_c_next=mu_lo_c_n,
        delta_up=delta_up, delta_lo=delta_lo, delta_up_adv=delta_up_adv, delta_lo_adv=delta_lo_adv,
        rho_up_d=rho_up_d, rho_lo_d=rho_lo_d, rho_up_c=rho_up_c, rho_lo_c=rho_lo_c,
        ramp_binding=ramp_binding, soc_binding=soc_binding, simultaneous=simultaneous,
        objective=sol.objective, probabilities=problem.probabilities.copy(), window_len=L,
        iterations=sol.iterations, backend=sol.backend,
    )
    res = binding_stationarity(rec, specs)
    rec.stationarity_residual = res
    scale = 1.0 + max([abs(lam)] + [abs(s.discharge_curve.marginal(problem.t)) for s in specs]
                      + [abs(s.charge_curve.marginal(problem.t)) for s in specs])
    if res > tol.kkt * scale:
        raise ArithmeticError(f"binding stationarity residual {res:.3g} at t={problem.t}")
    return rec


def binding_stationarity(rec: BindingRecord, specs: Sequence[EsrSpec]) -> float:
    """Max residual of the binding-interval stationarity conditions.

    Discharge: ``cD - lam + phi/effD - DeltaD + (rho_up - rho_lo) = 0``.
    Charge: ``-cC + lam - effC*phi - DeltaC + (rho_up - rho_lo) = 0``.
    """
    worst = 0.0
    dd, dc = rec.delta_ramp_d, rec.delta_ramp_c
    for i, s in enumerate(specs):
        if s.can_discharge:
            r = (s.discharge_curve.marginal(rec.t) - rec.lam + rec.phi[i] / s.eff_d - dd[i]
                 + rec.rho_up_d[i] - rec.rho_lo_d[i])
            worst = max(worst, abs(r))
        if s.can_charge:
            r = (-s.charge_curve.marginal(rec.t) + rec.lam - s.eff_c * rec.phi[i] - dc[i]
                 + rec.rho_up_c[i] - rec.rho_lo_c[i])
            worst = max(worst, abs(r))
    return worst


@dataclass
class DispatchTrace:
    records: list[BindingRecord]
    demand: np.ndarray
    specs: list[EsrSpec]
    diagnostics: list[dict] = field(default_factory=list)

    @property
    def T(self) -> int:
        return len(self.records)

    @property
    def ids(self) -> list[str]:
        return [s.id for s in self.specs]

    def _stack(self, name):
        return np.array([getattr(r, name) for r in self.records])

    @property
    def g_d(self) -> np.ndarray:
        return self._stack("g_d")

    @property
    def g_c(self) -> np.ndarray:
        return self._stack("g_c")

    @property
    def soc(self) -> np.ndarray:
        return self._stack("soc")

    @property
    def lam(self) -> np.ndarray:
        return self._stack("lam")

    @property
    def simultaneous_count(self) -> int:
        return int(sum(r.simultaneous.sum() for r in self.records))


ForecastProvider = Callable[[int, int], tuple]


def roll_horizon(fleet, demand_path, forecast_provider: ForecastProvider | None = None,
                 mode: str = "stochastic", *, W: int | None = None, T: int | None = None,
                 backend="simplex", tol: Tolerances = DEFAULT_TOLERANCES,
                 dump_dir: str | Path | None = None) -> DispatchTrace:
    """Solve windows ``t = 0 .. T-1`` and thread the binding solution forward.

    ``forecast_provider(t, W)`` returns ``(scenarios, probabilities)`` with
    ``scenarios`` shaped ``(K, L)``; by default the true path is used.
    ``demand_path`` may extend past ``T`` to give the last windows a
    look-ahead; otherwise windows are truncated at the end of the path.
    With ``dump_dir`` set, every window LP is also written there as text.
    """
    if mode not in ("stochastic", "deterministic"):
        raise ValueError(f"unknown dispatch mode {mode!r}")
    specs = specs_of(fleet)
    path = np.asarray(demand_path, float)
    if W is None:
        if not isinstance(fleet, Fleet):
            raise ValueError("window length W is required when passing bare specs")
        W = fleet.window
    if T is None:
        T = path.size
    if forecast_provider is None:
        forecast_provider = lambda t, w: deterministic_forecast(path, t, w)  # noqa: E731
    boundary = Boundary.initial(specs)
    records, diags = [], []
    for t in range(T):
        scen, prob = forecast_provider(t, min(W, path.size - t))
        scen = np.atleast_2d(np.asarray(scen, float))
        if mode == "deterministic" and scen.shape[0] != 1:
            raise ValueError("deterministic mode needs exactly one scenario per window")
        if scen[0, 0] != path[t]:
            raise ValueError(f"forecast at t={t} does not start at the realized demand")
        problem = WindowProblem(specs, t, boundary, scen, prob)
        if dump_dir is not None:
            Path(dump_dir).mkdir(parents=True, exist_ok=True)
            (Path(dump_dir) / f"window_t{t:03d}.lp").write_text(problem.build().to_text())
        rec = solve_window(problem, backend, tol)
        records.append(rec)
        diags.append({"t": t, "iterations": rec.iterations, "backend": rec.backend,
                      "rows": problem.lp.n_rows, "cols": problem.lp.n_vars,
                      "simultaneous": int(rec.simultaneous.sum())})
        boundary = Boundary(rec.soc.copy(), rec.g_d.copy(), rec.g_c.copy())
    return DispatchTrace(records, path[:T].copy(), list(specs), diags)


__all__ = [
    "Boundary", "BindingRecord", "DispatchTrace", "WindowInfeasible", "WindowProblem",
    "binding_stationarity", "build_window", "extract_record", "roll_horizon", "solve_window",
    "BINDING_SLACK", "INF",
]
