"""Command-line entry point: ``dispatch-sim run | grid | check``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .dispatch import WindowInfeasible, roll_horizon
from .harness import (
    ExperimentConfig, GridSpec, ManipulationInstance, bid_manipulation_grid, case_fleet, case_traces,
    config_from_manifest, export_results, packaged, run_case, write_trace_csv,
)
from .invariants import check_all, random_instance
from .model import fleet_from_dict
from .pricing import PriceSeries
from .scenario import ScenarioProvider

log = logging.getLogger("storage_pricing")


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _range(text: str) -> tuple[float, ...]:
    """``a:b:step`` inclusive of ``b`` (up to rounding)."""
    parts = [float(x) for x in text.split(":")]
    if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
        raise argparse.ArgumentTypeError(f"bad range {text!r}, expected a:b:step with a <= b and step > 0")
    a, b, step = parts
    n = int(np.floor((b - a) / step + 1e-9)) + 1
    return tuple(float(np.round(a + k * step, 10)) for k in range(n))


def cmd_run(args) -> int:
    if args.manifest:
        cfg = config_from_manifest(args.manifest)
    else:
        cfg = ExperimentConfig(
            case=args.case, fleet_path=args.config, profile_path=args.profile,
            T=args.horizon, W=args.window, K=args.scenarios, sigmas=tuple(args.sigma), n_trials=args.trials,
            seed=args.seed, trace_noise_std=args.trace_noise, deterministic_forecast=args.deterministic_forecast,
            backend=args.backend,
        )
    out = Path(args.out)
    cfg = replace(cfg, out_dir=str(out), workers=args.workers)
    metrics = run_case(cfg)
    for p in export_results(metrics, out):
        print(f"wrote {p}")
    if args.traces or args.dump_lp:
        fleet, traces = case_fleet(cfg), case_traces(cfg)
        mode = "stochastic" if cfg.is_stochastic else cfg.deterministic_forecast
        items = []
        for j in range(min(args.traces or 1, cfg.n_trials)):
            prov = ScenarioProvider(traces[j], cfg.sigmas[0], cfg.K, cfg.seed, j, mode)
            try:
                tr = roll_horizon(fleet, traces[j], prov, W=cfg.W, backend=cfg.backend,
                                  dump_dir=(out / "lp" if args.dump_lp and j == 0 else None))
            except WindowInfeasible:
                continue
            items.append((j, tr, PriceSeries.from_trace(tr)))
        if args.traces:
            write_trace_csv(out / f"case{cfg.case}_traces.csv", items)
    for e in metrics["summary"]["sigmas"]:
        lmp = e["schemes"].get("LMP", {}).get("loc_total", {}).get("mean", float("nan"))
        tl = e["schemes"].get("TLMP", {}).get("loc_total", {}).get("mean", float("nan"))
        print(f"sigma={e['sigma']:g} trials={e['n_trials']} dropped={e['dropped']} "
              f"mean LOC LMP={lmp:.4f} TLMP={tl:.3g}")
    return 0


def cmd_grid(args) -> int:
    inst = ManipulationInstance.from_json(args.config)
    grid = GridSpec(args.resource, args.c_range, args.ramp_range)
    res = bid_manipulation_grid(grid, inst, args.backend)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    res.to_csv(out / "grid.csv")
    ok = res.status == "ok"
    print(f"wrote {out / 'grid.csv'}; max profit under LMP {np.nanmax(np.where(ok, res.pi_lmp, np.nan)):.4f}, "
          f"under TLMP {np.nanmax(np.where(ok, res.pi_tlmp, np.nan)):.4f}")
    return 0


def cmd_check(args) -> int:
    failures = 0

    def report(name, violations):
        nonlocal failures
        status = "PASS" if not violations else "FAIL"
        failures += bool(violations)
        print(f"{status} {name}" + "".join(f"\n    {v}" for v in violations[:5]))

    inst = ManipulationInstance.from_json()
    report("two-window manipulation instance",
           check_all(inst.fleet, inst.demand_path, W=inst.fleet.window, T=inst.T, backend=args.backend))
    doc = json.loads(packaged("uniform_price_witness.json").read_text())
    wf = fleet_from_dict(doc["fleet"])
    report("uniform-price witness", check_all(wf, doc["demand_path"], W=wf.window, T=doc["T"], backend=args.backend))
    rng = np.random.default_rng(args.seed)
    done = 0
    bad: list[str] = []
    while done < args.instances:
        ri = random_instance(rng)
        try:
            v = check_all(ri.fleet, ri.demand, ri.provider(), W=ri.W, backend=args.backend)
        except WindowInfeasible:
            continue
        done += 1
        bad.extend(f"instance {done}: {x}" for x in v)
    report(f"{done} random instances", bad)
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dispatch-sim", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="Monte Carlo run of one case")
    r.add_argument("--case", type=int, choices=(1, 2, 3, 4), default=2)
    r.add_argument("--config", help="fleet JSON (default: packaged case fleet)")
    r.add_argument("--profile", help="demand profile CSV (default: packaged 24-hour profile)")
    r.add_argument("--sigma", type=_floats, default=[0.001, 0.01, 0.03], help="comma-separated forecast error levels")
    r.add_argument("--trials", type=int, default=100)
    r.add_argument("--scenarios", type=int, default=30)
    r.add_argument("--seed", type=int, default=2022)
    r.add_argument("--horizon", type=int, default=24)
    r.add_argument("--window", type=int, default=4)
    r.add_argument("--trace-noise", type=float, default=0.05)
    r.add_argument("--deterministic-forecast", choices=("sample", "mean"), default="sample")
    r.add_argument("--backend", choices=("simplex", "highs"), default="highs")
    r.add_argument("--workers", type=int, default=1, help="worker processes (0 = one per CPU)")
    r.add_argument("--manifest", help="replay the configuration recorded in a run manifest")
    r.add_argument("--traces", type=int, default=0, help="also write per-interval traces for the first N trials")
    r.add_argument("--dump-lp", action="store_true", help="write every window LP of trial 0 as text")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_run)

    g = sub.add_parser("grid", help="bid-manipulation profit surfaces")
    g.add_argument("--config", help="instance JSON (default: packaged two-window instance)")
    g.add_argument("--resource", default="G3")
    g.add_argument("--c-range", type=_range, default=_range("26:32:0.5"))
    g.add_argument("--ramp-range", type=_range, default=_range("0.4:1.2:0.1"))
    g.add_argument("--backend", choices=("simplex", "highs"), default="simplex")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_grid)

    c = sub.add_parser("check", help="run the invariant suite; exit status 0 only if everything holds")
    c.add_argument("--instances", type=int, default=50)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--backend", choices=("simplex", "highs"), default="simplex")
    c.set_defaults(func=cmd_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
