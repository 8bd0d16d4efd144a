"""Demand traces and per-window forecast scenarios.

All randomness comes from numpy's Philox counter-based generator (4x64-bit
counters) keyed by a ``SeedSequence``. Streams are keyed by
``(seed, stream, trial[, t])`` so any trial or window can be regenerated on
its own, in any process, in any order.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

_TRACE_STREAM = 0
_FORECAST_STREAM = 1


def rng_for(seed: int, *key: int) -> np.random.Generator:
    """Portable generator for one ``(seed, key...)`` stream."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, key)])))


@dataclass(frozen=True)
class DemandModel:
    base_profile: np.ndarray
    trace_noise_std: float = 0.05
    forecast_sigma: float = 0.01
    K: int = 30
    seed: int = 0

    def __post_init__(self):
        base = np.asarray(self.base_profile, float)
        object.__setattr__(self, "base_profile", base)
        if base.ndim != 1 or base.size == 0 or np.any(base <= 0):
            raise ValueError("base profile must be a non-empty positive vector")
        if self.trace_noise_std < 0 or self.forecast_sigma < 0:
            raise ValueError("noise levels must be non-negative")
        if self.K < 1:
            raise ValueError("K must be at least 1")

    @property
    def T(self) -> int:
        return self.base_profile.size


def generate_demand_traces(model: DemandModel, n_trials: int, first_trial: int = 0) -> np.ndarray:
    """``(n_trials, T)`` realized demand paths.

    Each cell is the profile plus Gaussian noise whose standard deviation is
    ``trace_noise_std`` times the profile mean. Negative cells are clipped to 0.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    base = model.base_profile
    scale = model.trace_noise_std * base.mean()
    out = np.empty((n_trials, base.size))
    for j in range(n_trials):
        z = rng_for(model.seed, _TRACE_STREAM, first_trial + j).standard_normal(base.size)
        out[j] = base + scale * z
    neg = out < 0
    if neg.any():
        log.warning("clipped %d negative demand cells to 0", int(neg.sum()))
        out[neg] = 0.0
    return out


def forecast_scenarios(trace, t: int, W: int, K: int, sigma: float, seed: int, trial: int = 0):
    """K random-walk forecasts of ``trace[t : t+W]`` made at interval ``t``.

    Returns ``(scenarios, probabilities)`` with ``scenarios`` of shape
    ``(K, L)``, ``L = min(W, T - t)``. Column 0 is the realized demand. The
    forecast at lead ``tau`` is the true value plus a sum of ``tau`` i.i.d.
    N(0, (sigma * d[t+tau])**2) steps.
    """
    trace = np.asarray(trace, float)
    T = trace.size
    if not 0 <= t < T:
        raise IndexError(f"interval {t} outside horizon {T}")
    L = min(W, T - t)
    future = trace[t:t + L]
    scen = np.tile(future, (K, 1))
    if L > 1 and sigma > 0:
        z = rng_for(seed, _FORECAST_STREAM, trial, t).standard_normal((K, L - 1))
        scen[:, 1:] += sigma * future[1:] * np.cumsum(z, axis=1)
        neg = scen < 0
        if neg.any():
            log.warning("clipped %d negative scenario demands at t=%d", int(neg.sum()), t)
            scen[neg] = 0.0
    scen[:, 0] = trace[t]
    return scen, np.full(K, 1.0 / K)


def deterministic_forecast(trace, t: int, W: int):
    """Conditional-mean forecast: the true path over the window, as one scenario."""
    trace = np.asarray(trace, float)
    L = min(W, trace.size - t)
    return trace[t:t + L][None, :].copy(), np.ones(1)


class ScenarioProvider:
    """Callable ``(t, L) -> (scenarios, probabilities)`` for :func:`roll_horizon`.

    ``mode`` is ``"stochastic"`` (K draws), ``"sample"`` (one draw from the
    same stream, i.e. the first stochastic scenario) or ``"mean"`` (the true
    path). The horizon used for truncation is the trace length.
    """

    def __init__(self, trace, sigma: float, K: int, seed: int = 0, trial: int = 0, mode: str = "stochastic"):
        if mode not in ("stochastic", "sample", "mean"):
            raise ValueError(f"unknown forecast mode {mode!r}")
        self.trace = np.asarray(trace, float)
        self.sigma, self.K, self.seed, self.trial, self.mode = sigma, K, seed, trial, mode

    def __call__(self, t: int, W: int):
        if self.mode == "mean":
            return deterministic_forecast(self.trace, t, W)
        scen, p = forecast_scenarios(self.trace, t, W, self.K, self.sigma, self.seed, self.trial)
        if self.mode == "sample":
            return scen[:1], np.ones(1)
        return scen, p


def load_profile(path: str | Path | None = None) -> np.ndarray:
    """Read a ``hour, demand_mwh`` CSV; the packaged 24-hour profile by default."""
    if path is None:
        fh = resources.files("storage_pricing.data").joinpath("profile_24h.csv").open()
    else:
        fh = open(path, newline="")
    with fh:
        rows = list(csv.DictReader(fh, skipinitialspace=True))
    if not rows or set(rows[0]) != {"hour", "demand_mwh"}:
        raise ValueError("profile CSV needs exactly the columns hour, demand_mwh")
    rows.sort(key=lambda r: int(r["hour"]))
    return np.array([float(r["demand_mwh"]) for r in rows])
