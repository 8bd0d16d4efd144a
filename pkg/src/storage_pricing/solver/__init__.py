"""LP construction, solving and KKT checking."""
from __future__ import annotations

from typing import Callable

from .kkt import KKTReport, kkt_residuals
from .lp import (
    DEFAULT_TOLERANCES, INF, LinearProgram, LpSolution, SolverError, Status, Tolerances,
)
from .simplex import solve_simplex

Backend = Callable[[LinearProgram], LpSolution]


def _highs(lp: LinearProgram) -> LpSolution:
    from .highs import solve_highs
    return solve_highs(lp)


BACKENDS: dict[str, Backend] = {"simplex": solve_simplex, "highs": _highs}


def solve(lp: LinearProgram, backend: str | Backend = "simplex") -> LpSolution:
    """Solve ``lp``; infeasible/unbounded come back as a status, not an exception."""
    fn = BACKENDS[backend] if isinstance(backend, str) else backend
    return fn(lp)


__all__ = [
    "BACKENDS", "DEFAULT_TOLERANCES", "INF", "KKTReport", "LinearProgram", "LpSolution",
    "SolverError", "Status", "Tolerances", "kkt_residuals", "solve", "solve_simplex",
]
