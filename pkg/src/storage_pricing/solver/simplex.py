"""Bounded-variable revised simplex with an explicit basis inverse.

The LP ``min c.x  s.t.  lo <= A x <= hi,  lb <= x <= ub`` is put in the form
``A x - s = 0`` with one logical column ``s`` per row carrying the row bounds.
The all-logical basis is the starting point; phase 1 minimizes the sum of
bound violations of the basic variables (composite rule, re-priced every
iteration) and phase 2 minimizes ``c.x``.

Pricing is Dantzig's rule with a Harris two-pass ratio test. After a run of
non-improving pivots the method switches to Bland's smallest-index rule until
the objective moves again, which rules out cycling. Ties are always broken by
index, so a given LP yields the same basis, primal and duals on every call.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .lp import LinearProgram, LpSolution, SolverError, Status

_PRIMAL_TOL = 1e-9
_DUAL_TOL = 1e-9
_PIVOT_TOL = 1e-9
_REFACTOR_EVERY = 64
_STALL_LIMIT = 40


def solve_simplex(lp: LinearProgram, max_iter: int | None = None) -> LpSolution:
    c, A, row_lo, row_hi, lb, ub = lp.arrays()
    m, n = A.shape
    if m == 0:
        return _solve_bounds_only(lp, c, lb, ub)

    ntot = n + m
    cost = np.concatenate([c, np.zeros(m)])
    lo = np.concatenate([lb, row_lo])
    hi = np.concatenate([ub, row_hi])
    A_csc = sp.hstack([A, -sp.identity(m, format="csr")], format="csc")
    A_T = A_csc.T.tocsr()
    indptr, indices, data = A_csc.indptr, A_csc.indices, A_csc.data

    x = np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0))
    basis = np.arange(n, ntot)
    is_basic = np.zeros(ntot, bool)
    is_basic[basis] = True
    Binv = -np.eye(m)
    fixed = lo == hi

    if max_iter is None:
        max_iter = 50 * (ntot + 10)

    since_refactor = 0
    bland = False
    best_obj = np.inf
    stall = 0
    last_phase = None

    for it in range(max_iter):
        # basic values from scratch: B xB = -N xN
        xn = np.where(is_basic, 0.0, x)
        x[basis] = -Binv @ (A_csc @ xn)

        xb = x[basis]
        lob, hib = lo[basis], hi[basis]
        below = xb < lob - _PRIMAL_TOL
        above = xb > hib + _PRIMAL_TOL
        phase1 = bool(below.any() or above.any())

        if phase1:
            cb = np.where(below, -1.0, np.where(above, 1.0, 0.0))
            c_ph = np.zeros(ntot)
            obj = float(np.sum(lob[below] - xb[below]) + np.sum(xb[above] - hib[above]))
        else:
            cb = cost[basis]
            c_ph = cost
            obj = float(cost @ x)
        if phase1 != last_phase:
            best_obj, stall, bland, last_phase = np.inf, 0, False, phase1

        if obj < best_obj - 1e-12 * (1 + abs(best_obj) if np.isfinite(best_obj) else 1):
            best_obj, stall = obj, 0
            bland = False
        else:
            stall += 1
            if stall > _STALL_LIMIT:
                bland = True

        y = cb @ Binv
        d = c_ph - A_T @ y
        d[is_basic] = 0.0
        d[fixed] = 0.0

        can_inc = x < hi - _PRIMAL_TOL
        can_dec = x > lo + _PRIMAL_TOL
        inc = (d < -_DUAL_TOL) & can_inc & ~is_basic
        dec = (d > _DUAL_TOL) & can_dec & ~is_basic
        eligible = inc | dec
        if not eligible.any():
            if phase1:
                return LpSolution(Status.INFEASIBLE, iterations=it, backend="simplex", lp=lp)
            return _finish(lp, x[:n], y, c, A, cost @ x, it)

        if bland:
            j = int(np.flatnonzero(eligible)[0])
        else:
            score = np.where(eligible, np.abs(d), -1.0)
            j = int(np.argmax(score))
        direction = 1.0 if inc[j] else -1.0

        lo_, hi_ = indptr[j], indptr[j + 1]
        alpha = Binv[:, indices[lo_:hi_]] @ data[lo_:hi_]
        rate = -direction * alpha

        theta, r = _ratio_test(xb, lob, hib, rate, below, above, bland, basis)
        flip = hi[j] - lo[j]
        if np.isfinite(flip) and flip <= theta:
            x[j] += direction * flip
            continue
        if not np.isfinite(theta):
            if phase1:
                raise SolverError("phase 1 ray without blocking variable")
            return LpSolution(Status.UNBOUNDED, iterations=it, backend="simplex", lp=lp)

        leaving = basis[r]
        # leaving variable parks at the bound it reached
        if rate[r] < 0:
            x[leaving] = hib[r] if above[r] else lob[r]
        else:
            x[leaving] = lob[r] if below[r] else hib[r]
        x[j] += direction * theta
        basis[r] = j
        is_basic[leaving] = False
        is_basic[j] = True

        since_refactor += 1
        if since_refactor >= _REFACTOR_EVERY:
            Binv = _invert(A_csc, basis)
            since_refactor = 0
        else:
            piv = alpha[r]
            row = Binv[r] / piv
            Binv -= np.outer(alpha, row)
            Binv[r] = row

    raise SolverError(f"simplex iteration limit ({max_iter}) reached on {lp.name}")


def _ratio_test(xb, lob, hib, rate, below, above, bland, basis):
    """Harris two-pass ratio test; returns (step, leaving position)."""
    down = rate < -_PIVOT_TOL
    up = rate > _PIVOT_TOL
    target = np.full(xb.shape, np.nan)
    # infeasible basics stop when they reach the bound they violate
    target = np.where(down & above, hib, target)
    target = np.where(down & ~above & ~below, lob, target)
    target = np.where(up & below, lob, target)
    target = np.where(up & ~below & ~above, hib, target)
    ok = np.isfinite(target)
    if not ok.any():
        return np.inf, -1
    idx = np.flatnonzero(ok)
    rt = rate[idx]
    gap = target[idx] - xb[idx]
    relaxed = (gap + np.sign(rt) * _PRIMAL_TOL) / rt
    theta_max = max(float(relaxed.min()), 0.0)
    strict = np.maximum(gap / rt, 0.0)
    cand = strict <= theta_max
    if bland:
        tmin = strict[cand].min()
        tied = idx[cand & (strict <= tmin + 1e-12)]
        pos = tied[np.argmin(basis[tied])]
        return float(strict[np.searchsorted(idx, pos)]), int(pos)
    mags = np.where(cand, np.abs(rt), -1.0)
    k = int(np.argmax(mags))
    return float(strict[k]), int(idx[k])


def _invert(A_csc, basis):
    B = A_csc[:, basis].toarray()
    try:
        return np.linalg.inv(B)
    except np.linalg.LinAlgError as exc:
        raise SolverError("singular basis during refactorization") from exc


def _finish(lp, x, y, c, A, obj, it):
    z = c - A.T @ y
    return LpSolution(
        Status.OPTIMAL, x=x.copy(), y=y.copy(), z=np.asarray(z).ravel(),
        objective=float(obj) + lp.objective_constant, iterations=it, backend="simplex", lp=lp,
    )


def _solve_bounds_only(lp, c, lb, ub):
    x = np.where(c > 0, lb, np.where(c < 0, ub, np.where(np.isfinite(lb), lb, np.where(np.isfinite(ub), ub, 0.0))))
    if not np.all(np.isfinite(x)):
        return LpSolution(Status.UNBOUNDED, backend="simplex", lp=lp)
    return LpSolution(
        Status.OPTIMAL, x=x, y=np.empty(0), z=c.copy(),
        objective=float(c @ x) + lp.objective_constant, backend="simplex", lp=lp,
    )
