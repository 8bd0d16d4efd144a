"""
Forecast error and uplift
=========================

A reduced version of the four-case experiment: with and without storage,
with point forecasts or 30 scenarios. The full run is
``dispatch-sim run --case N --out DIR`` for N = 1..4.
"""

from storage_pricing import ExperimentConfig, run_case

TRIALS = 10  # raise to 100 for the full experiment

rows = []
for case in (1, 2, 3, 4):
    cfg = ExperimentConfig(case=case, n_trials=TRIALS, K=30)
    summary = run_case(cfg)["summary"]
    for e in summary["sigmas"]:
        lmp = e["schemes"]["LMP"]
        tl = e["schemes"]["TLMP"]
        rows.append((case, e["sigma"], lmp["loc_total"]["mean"], tl["loc_total"]["mean"],
                     tl["merchandising_surplus"]["mean"], e["dropped"]))

print(f"{'case':>4} {'sigma':>6} {'LOC LMP':>10} {'LOC TLMP':>10} {'MS TLMP':>10} {'dropped':>8}")
for r in rows:
    print(f"{r[0]:>4} {r[1]:>6.3f} {r[2]:>10.2f} {r[3]:>10.2g} {r[4]:>10.2f} {r[5]:>8}")

# %%
# Uplift grows with forecast error and shrinks when the dispatch sees
# several scenarios (cases 2 and 4 against 1 and 3). TLMP never needs one.
