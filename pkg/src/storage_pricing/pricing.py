"""Uniform (LMP) and resource-specific temporal (TLMP) prices from window duals."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .dispatch import BindingRecord, DispatchTrace
from .model import EsrSpec

TOL = 1e-6


def lmp(record: BindingRecord) -> float:
    """Balance-row dual of the binding interval; paid by demand and every resource."""
    return record.lam


def tlmp(record: BindingRecord, i: int, spec: EsrSpec) -> tuple[float, float]:
    """``(charge price, discharge price)`` for resource ``i``.

    charge:    lam - effC*phi - DeltaC
    discharge: lam - phi/effD + DeltaD
    """
    if not 0 <= i < len(record.ids):
        raise KeyError(f"resource index {i} not in record")
    lam, phi = record.lam, record.phi[i]
    return (
        lam - spec.eff_c * phi - record.delta_ramp_c[i],
        lam - phi / spec.eff_d + record.delta_ramp_d[i],
    )


def soc_price_via_limits(record: BindingRecord, i: int) -> float:
    """SOC price rebuilt from SOC-limit duals over the whole window.

    ``sum over binding and advisory nodes of (delta_lo - delta_up)``; equals
    the SOC transition dual of the binding interval.
    """
    return float(
        record.delta_lo[i] - record.delta_up[i]
        + (record.delta_lo_adv[i] - record.delta_up_adv[i]).sum()
    )


def reduces_to_lmp(record: BindingRecord, i: int, spec: EsrSpec | None = None, tol: float = TOL) -> bool:
    """True when no ramp limit into or out of ``t`` and no SOC limit in the window binds.

    When ``spec`` is given and the answer is true, the TLMP pair is asserted
    to equal the LMP within ``tol``.
    """
    slack = not (record.ramp_binding[i] or record.soc_binding[i])
    if slack and spec is not None:
        c, d = tlmp(record, i, spec)
        if abs(c - record.lam) > tol or abs(d - record.lam) > tol:
            raise AssertionError(
                f"resource {record.ids[i]} at t={record.t}: no binding limits but TLMP=({c}, {d}) != LMP {record.lam}"
            )
    return slack


@dataclass
class PriceSeries:
    """``lmp`` is ``(T,)``; the other arrays are ``(T, N)``."""

    ids: list[str]
    lmp: np.ndarray
    tlmp_c: np.ndarray
    tlmp_d: np.ndarray
    phi: np.ndarray
    delta_c: np.ndarray
    delta_d: np.ndarray

    @classmethod
    def from_trace(cls, trace: DispatchTrace) -> "PriceSeries":
        return cls.from_records(trace.records, trace.specs)

    @classmethod
    def from_records(cls, records: Sequence[BindingRecord], specs: Sequence[EsrSpec]) -> "PriceSeries":
        T, N = len(records), len(specs)
        lam = np.array([r.lam for r in records])
        tc, td = np.zeros((T, N)), np.zeros((T, N))
        for t, r in enumerate(records):
            for i, s in enumerate(specs):
                tc[t, i], td[t, i] = tlmp(r, i, s)
        return cls(
            [s.id for s in specs], lam, tc, td,
            np.array([r.phi for r in records]).reshape(T, N),
            np.array([r.delta_ramp_c for r in records]).reshape(T, N),
            np.array([r.delta_ramp_d for r in records]).reshape(T, N),
        )

    def decomposition_residual(self, specs: Sequence[EsrSpec]) -> float:
        """Max deviation from the energy/SOC/ramp decomposition, recomputed from components."""
        ec = np.array([s.eff_c for s in specs])
        ed = np.array([s.eff_d for s in specs])
        lam = self.lmp[:, None]
        rc = self.tlmp_c - (lam - ec * self.phi - self.delta_c)
        rd = self.tlmp_d - (lam - self.phi / ed + self.delta_d)
        return float(max(np.abs(rc).max(initial=0), np.abs(rd).max(initial=0)))

    def rows(self):
        for t in range(self.lmp.size):
            for i, rid in enumerate(self.ids):
                yield {
                    "t": t, "resource": rid, "lmp": self.lmp[t],
                    "tlmp_c": self.tlmp_c[t, i], "tlmp_d": self.tlmp_d[t, i],
                    "phi": self.phi[t, i], "delta_c": self.delta_c[t, i], "delta_d": self.delta_d[t, i],
                }

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=PRICE_COLUMNS, lineterminator="\n")
            w.writeheader()
            for row in self.rows():
                w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in row.items()})


PRICE_COLUMNS = ["t", "resource", "lmp", "tlmp_c", "tlmp_d", "phi", "delta_c", "delta_d"]
