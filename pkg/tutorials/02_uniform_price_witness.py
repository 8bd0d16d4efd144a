"""
When no single price works
==========================

Two storage units charge at the same time, both between their limits, but
they bid different charging values (8 and 11 $/MWh). A single price cannot
make both schedules self-optimal, so at least one of them needs an uplift.
"""

import json

from storage_pricing import PriceSeries, profit_with_scheme, roll_horizon
from storage_pricing.harness import packaged
from storage_pricing.model import fleet_from_dict

doc = json.loads(packaged("uniform_price_witness.json").read_text())
fleet = fleet_from_dict(doc["fleet"])
trace = roll_horizon(fleet, doc["demand_path"], W=fleet.window, T=doc["T"])
prices = PriceSeries.from_trace(trace)

print("charging (MW):\n", trace.g_c[:, 2:])
print("LMP:", prices.lmp)
print("TLMP charge price of S1, S2:\n", prices.tlmp_c[:, 2:])

# %%
# S2 would rather have charged less at 8 $/MWh given later prices; under a
# uniform price it is owed the gap. TLMP prices it at 11 in interval 0 instead.
for scheme in ("LMP", "TLMP"):
    rep = profit_with_scheme(scheme, trace, prices, fleet)
    print(scheme, {rid: round(float(v), 6) + 0.0 for rid, v in zip(rep.ids, rep.loc)})
