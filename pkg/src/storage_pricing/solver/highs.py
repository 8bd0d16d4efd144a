"""Optional backend: scipy's HiGHS through ``linprog``.

Used for the larger Monte Carlo runs where the dense bundled simplex is too
slow. Marginals are mapped onto the same signed ``y``/``z`` convention.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .lp import LinearProgram, LpSolution, SolverError, Status


def solve_highs(lp: LinearProgram) -> LpSolution:
    c, A, lo, hi, lb, ub = lp.arrays()
    m = A.shape[0]
    eq = lo == hi
    up = ~eq & np.isfinite(hi)
    dn = ~eq & np.isfinite(lo)
    A = A.tocsr()
    A_ub = sp.vstack([A[up], -A[dn]], format="csr") if (up.any() or dn.any()) else None
    b_ub = np.concatenate([hi[up], -lo[dn]]) if A_ub is not None else None
    A_eq = A[eq] if eq.any() else None
    b_eq = lo[eq] if eq.any() else None
    kw = dict(A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=np.column_stack([lb, ub]), method="highs")
    res = linprog(c, **kw)
    if res.status == 4:
        # presolve could not tell infeasible from unbounded; the plain solve can
        res = linprog(c, options={"presolve": False}, **kw)
    if res.status == 2:
        return LpSolution(Status.INFEASIBLE, backend="highs", lp=lp)
    if res.status == 3:
        return LpSolution(Status.UNBOUNDED, backend="highs", lp=lp)
    if res.status != 0:
        raise SolverError(f"HiGHS failed on {lp.name}: {res.message}")

    y = np.zeros(m)
    if A_eq is not None:
        y[eq] = res.eqlin.marginals
    if A_ub is not None:
        marg = res.ineqlin.marginals
        nu = int(up.sum())
        y[up] += marg[:nu]          # <= rows: marginal <= 0
        y[dn] -= marg[nu:]          # >= rows flipped to <=
    z = c - A.T @ y
    return LpSolution(
        Status.OPTIMAL, x=np.asarray(res.x, float), y=y, z=np.asarray(z).ravel(),
        objective=float(res.fun) + lp.objective_constant, iterations=int(res.nit),
        backend="highs", lp=lp,
    )
