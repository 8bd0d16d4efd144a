"""KKT residuals of a solved LP in the package's dual convention."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lp import DEFAULT_TOLERANCES, LinearProgram, LpSolution, Tolerances


@dataclass
class KKTReport:
    stationarity: float
    complementarity: float
    primal_infeasibility: float
    dual_infeasibility: float
    duality_gap: float
    tolerances: Tolerances = DEFAULT_TOLERANCES

    @property
    def ok(self) -> bool:
        t = self.tolerances
        return (
            self.stationarity <= t.kkt
            and self.complementarity <= t.kkt
            and self.primal_infeasibility <= t.feas
            and self.dual_infeasibility <= t.dual
            and self.duality_gap <= t.kkt
        )


def kkt_residuals(lp: LinearProgram, sol: LpSolution, tol: Tolerances = DEFAULT_TOLERANCES) -> KKTReport:
    """Max-norm residuals of stationarity, complementarity and feasibility.

    ``z`` is taken as stored on the solution, so a perturbed dual shows up
    in the stationarity residual rather than being silently recomputed.
    The duality gap is relative: ``|primal - dual| / (1 + |primal|)``.
    """
    if not sol.optimal:
        raise ValueError("KKT residuals need an optimal solution")
    c, A, lo, hi, lb, ub = lp.arrays()
    x, y, z = sol.x, sol.y, sol.z
    ax = A @ x

    stat = np.abs(c - A.T @ y - z)
    stationarity = float(stat.max()) if stat.size else 0.0

    with np.errstate(invalid="ignore"):
        viol = np.concatenate([
            np.maximum(lo - ax, 0), np.maximum(ax - hi, 0),
            np.maximum(lb - x, 0), np.maximum(x - ub, 0),
        ])
    primal = float(viol.max()) if viol.size else 0.0

    y_lo, y_up = np.maximum(y, 0), np.maximum(-y, 0)
    z_lo, z_up = np.maximum(z, 0), np.maximum(-z, 0)
    # a dual on an infinite side is a dual infeasibility
    dual_inf = np.concatenate([
        y_lo[np.isinf(lo)], y_up[np.isinf(hi)], z_lo[np.isinf(lb)], z_up[np.isinf(ub)],
    ])
    dual_infeasibility = float(dual_inf.max()) if dual_inf.size else 0.0

    with np.errstate(invalid="ignore"):
        comp = np.concatenate([
            _prod(y_lo, ax - lo), _prod(y_up, hi - ax),
            _prod(z_lo, x - lb), _prod(z_up, ub - x),
        ])
    complementarity = float(comp.max()) if comp.size else 0.0

    dual_obj = sol.dual_objective() if dual_infeasibility <= tol.dual else np.nan
    gap = abs(sol.objective - dual_obj) / (1 + abs(sol.objective)) if np.isfinite(dual_obj) else np.inf
    return KKTReport(stationarity, complementarity, primal, dual_infeasibility, float(gap), tol)


def _prod(dual, slack):
    # infinite slacks are covered by the dual-infeasibility check
    out = np.zeros_like(dual)
    m = (dual > 0) & np.isfinite(slack)
    out[m] = dual[m] * np.abs(slack[m])
    return out
