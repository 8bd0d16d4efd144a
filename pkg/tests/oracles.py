"""Independent extensive-form LPs built directly for scipy's linprog.

Nothing here touches the package's LP builder: variables are laid out by
hand as dense arrays, so agreement with the rolling dispatch is a real
cross-check rather than the same code run twice.
"""
import numpy as np
from scipy.optimize import linprog


def extensive_form(specs, scenarios, probabilities=None, soc0=None, gd0=None, gc0=None, t0=0):
    """Two-stage tree: one root interval shared by K branches of length L-1.

    Returns ``(objective, gd_root, gc_root)`` or ``None`` if infeasible.
    """
    scen = np.atleast_2d(np.asarray(scenarios, float))
    K, L = scen.shape
    p = np.full(K, 1.0 / K) if probabilities is None else np.asarray(probabilities, float)
    N = len(specs)
    soc0 = np.array([s.soc_init for s in specs]) if soc0 is None else np.asarray(soc0)
    gd0 = np.array([s.init_d for s in specs]) if gd0 is None else np.asarray(gd0)
    gc0 = np.array([s.init_c for s in specs]) if gc0 is None else np.asarray(gc0)

    # nodes: 0 = root, then (tau, k) for tau = 1..L-1
    nodes = [(0, None)] + [(tau, k) for tau in range(1, L) for k in range(K)]
    nid = {nd: j for j, nd in enumerate(nodes)}
    nn = len(nodes)

    def parent(nd):
        tau, k = nd
        if tau == 0:
            return None
        return (0, None) if tau == 1 else (tau - 1, k)

    def weight(nd):
        return 1.0 if nd[0] == 0 else p[nd[1]]

    def col(kind, i, nd):  # kind 0 = gd, 1 = gc, 2 = soc
        return (nid[nd] * N + i) * 3 + kind

    nv = nn * N * 3
    c = np.zeros(nv)
    bounds = [(0.0, 0.0)] * nv
    A_eq, b_eq, A_ub, b_ub = [], [], [], []
    for nd in nodes:
        w = weight(nd)
        d = scen[0, 0] if nd[0] == 0 else scen[nd[1], nd[0]]
        row = np.zeros(nv)
        for i, s in enumerate(specs):
            c[col(0, i, nd)] = w * s.discharge_curve.marginal(t0 + nd[0])
            c[col(1, i, nd)] = -w * s.charge_curve.marginal(t0 + nd[0])
            bounds[col(0, i, nd)] = (0.0, s.cap_d)
            bounds[col(1, i, nd)] = (0.0, s.cap_c)
            lo = None if np.isinf(s.soc_min) else s.soc_min
            hi = None if np.isinf(s.soc_max) else s.soc_max
            bounds[col(2, i, nd)] = (lo, hi)
            row[col(0, i, nd)], row[col(1, i, nd)] = 1.0, -1.0
            # SOC transition
            tr = np.zeros(nv)
            tr[col(2, i, nd)] = 1.0
            tr[col(1, i, nd)] = -s.eff_c
            tr[col(0, i, nd)] = 1.0 / s.eff_d
            par = parent(nd)
            if par is None:
                rhs = soc0[i]
            else:
                tr[col(2, i, par)] = -1.0
                rhs = 0.0
            A_eq.append(tr)
            b_eq.append(rhs)
            # ramps, both directions
            for kind, g0, up, down in ((0, gd0[i], s.ramp_up_d, s.ramp_down_d),
                                       (1, gc0[i], s.ramp_up_c, s.ramp_down_c)):
                r = np.zeros(nv)
                r[col(kind, i, nd)] = 1.0
                base = 0.0
                if par is None:
                    base = g0
                else:
                    r[col(kind, i, par)] = -1.0
                if np.isfinite(up):
                    A_ub.append(r.copy())
                    b_ub.append(up + base)
                if np.isfinite(down):
                    A_ub.append(-r)
                    b_ub.append(down - base)
        A_eq.append(row)
        b_eq.append(d)
    res = linprog(c, A_ub=np.array(A_ub) if A_ub else None, b_ub=b_ub or None,
                  A_eq=np.array(A_eq), b_eq=b_eq, bounds=bounds, method="highs")
    if res.status != 0:
        return None
    x = res.x
    root = (0, None)
    gd = np.array([x[col(0, i, root)] for i in range(N)])
    gc = np.array([x[col(1, i, root)] for i in range(N)])
    full = {nd: (np.array([x[col(0, i, nd)] for i in range(N)]), np.array([x[col(1, i, nd)] for i in range(N)]))
            for nd in nodes}
    return res.fun, gd, gc, full


def one_shot(specs, demand):
    """Whole-horizon perfect-foresight dispatch; returns ``(objective, gd, gc)`` with (T, N) arrays."""
    demand = np.asarray(demand, float)
    out = extensive_form(specs, demand[None, :])
    if out is None:
        return None
    obj, gd0, gc0, full = out
    T = demand.size
    gd = np.array([full[(0, None) if t == 0 else (t, 0)][0] for t in range(T)])
    gc = np.array([full[(0, None) if t == 0 else (t, 0)][1] for t in range(T)])
    return obj, gd, gc


def jitter_costs(specs, T, rng, scale=0.5):
    """Give every resource generic per-interval bid costs so the optimum is unique."""
    from dataclasses import replace
    out = []
    for s in specs:
        od = tuple((t, round(s.cost_d + rng.uniform(0, scale), 6)) for t in range(T))
        oc = tuple((t, round(max(s.cost_c - rng.uniform(0, scale), 0.0), 6)) for t in range(T)) if s.can_charge else ()
        out.append(replace(s, cost_d_overrides=od, cost_c_overrides=oc))
    return out
