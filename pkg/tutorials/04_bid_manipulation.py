"""
Misreporting a cost or a ramp limit
===================================

G3 is a price taker facing the prices of the two-window example. It tries
every (cost, ramp) bid on a grid and keeps its true cost of 28 $/MWh and
true ramp of 0.8 MW/h. Under LMP with uplift, overstating its cost pays;
under TLMP the truthful bid is at least as good as every neighbour.
"""

import numpy as np

from storage_pricing import GridSpec, ManipulationInstance, bid_manipulation_grid

inst = ManipulationInstance.from_json()
costs = tuple(np.round(np.arange(26.0, 32.01, 1.0), 2))
ramps = tuple(np.round(np.arange(0.4, 1.21, 0.2), 2))
res = bid_manipulation_grid(GridSpec("G3", costs, ramps), inst)


def show(name, table):
    print(name)
    print("cost\\ramp " + " ".join(f"{r:>7}" for r in ramps))
    for c, row, st in zip(costs, table, res.status):
        cells = [f"{v:7.3f}" if s == "ok" else f"{s[:7]:>7}" for v, s in zip(row, st)]
        print(f"{c:>9} " + " ".join(cells))


show("profit under LMP plus uplift", res.pi_lmp)
show("profit under TLMP", res.pi_tlmp)
