"""
Two windows, three generators, two prices
=========================================

A small system where the uniform price leaves a ramp-limited unit short.
G3 is cheap to start but slow to ramp: to reach 1 MW in the second interval
it must already run at 0.2 MW in the first, when the price (25 $/MWh) is
below its cost (28 $/MWh).
"""

import numpy as np

from storage_pricing import ManipulationInstance, PriceSeries, profit_with_scheme, roll_horizon

np.set_printoptions(suppress=True)

inst = ManipulationInstance.from_json()
for s in inst.fleet.true_specs:
    print(f"{s.id}: cost {s.cost_d:5.1f} $/MWh, cap {s.cap_d:6.1f} MW, ramp {s.ramp_up_d:6.1f} MW/h, "
          f"starts at {s.init_d} MW")
print("demand:", inst.demand_path)

# %%
# Rolling dispatch with a two-interval window and a perfect forecast.
trace = roll_horizon(inst.fleet, inst.demand_path, W=2, T=inst.T)
print("dispatch (MW) by interval and unit:\n", trace.g_d.round(3))

# %%
# The uniform price is the balance dual; the unit-specific price adds the
# ramp term, which is what moves G3's first-interval price from 25 to 28.
prices = PriceSeries.from_trace(trace)
print("LMP         :", prices.lmp)
print("TLMP for G3 :", prices.tlmp_d[:, 2])
print("ramp term   :", prices.delta_d[:, 2])

# %%
# Settlement. Under LMP, G3 loses 0.6 $ in the first interval and is paid a
# 0.2 $ uplift so that following the dispatch matches its best self-schedule.
# G2 is held at 49 MW for the same reason and is owed a much larger uplift.
# Under TLMP no uplift is needed.
for scheme in ("LMP", "TLMP"):
    rep = profit_with_scheme(scheme, trace, prices, inst.fleet)
    print(f"{scheme:4s}  in-market {np.round(rep.in_market, 3)}  LOC {np.round(rep.loc, 3) + 0.0}  "
          f"surplus {rep.merchandising_surplus:.3f}")
