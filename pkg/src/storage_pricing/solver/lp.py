"""Linear programs with tagged rows and variables.

Rows are two-sided, ``lo <= a.x <= hi`` (equalities use ``lo == hi``), and
variables carry ``lb <= x <= ub`` bounds. Every row and variable has a
hashable tag so duals can be looked up symbolically after a solve.

Dual sign convention: the signed row dual ``y`` is the sensitivity of the
optimal objective to the active right-hand side, and the signed reduced cost
is ``z = c - A.T @ y``. Both are split into non-negative (lower, upper) pairs
for reporting, so every inequality dual is non-negative.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Hashable

import numpy as np
import scipy.sparse as sp

INF = math.inf


@dataclass(frozen=True)
class Tolerances:
    feas: float = 1e-7
    kkt: float = 1e-6
    dual: float = 1e-7


DEFAULT_TOLERANCES = Tolerances()


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class SolverError(RuntimeError):
    """Numerical failure inside an LP backend (not infeasibility)."""


class LinearProgram:
    """A minimization LP built incrementally."""

    def __init__(self, name: str = "lp"):
        self.name = name
        self.var_tags: list[Hashable] = []
        self.cost: list[float] = []
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.row_tags: list[Hashable] = []
        self.row_lo: list[float] = []
        self.row_hi: list[float] = []
        self._rows: list[tuple[list[int], list[float]]] = []
        self._var_index: dict[Hashable, int] = {}
        self._row_index: dict[Hashable, int] = {}
        self.objective_constant = 0.0

    @property
    def n_vars(self) -> int:
        return len(self.var_tags)

    @property
    def n_rows(self) -> int:
        return len(self.row_tags)

    def add_var(self, tag: Hashable, lb: float = 0.0, ub: float = INF, cost: float = 0.0) -> int:
        if tag in self._var_index:
            raise ValueError(f"duplicate variable tag {tag!r}")
        if not (math.isfinite(cost) and lb <= ub) or math.isnan(lb) or math.isnan(ub):
            raise ValueError(f"bad variable data for {tag!r}: lb={lb} ub={ub} cost={cost}")
        idx = len(self.var_tags)
        self._var_index[tag] = idx
        self.var_tags.append(tag)
        self.cost.append(float(cost))
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        return idx

    def add_row(self, tag: Hashable, coeffs: dict[int, float], lo: float = -INF, hi: float = INF) -> int:
        if tag in self._row_index:
            raise ValueError(f"duplicate row tag {tag!r}")
        if lo > hi or math.isnan(lo) or math.isnan(hi):
            raise ValueError(f"row {tag!r} has lo={lo} > hi={hi}")
        cols, vals = [], []
        for j, v in coeffs.items():
            if not 0 <= j < self.n_vars:
                raise IndexError(f"row {tag!r} references unknown column {j}")
            if not math.isfinite(v):
                raise ValueError(f"row {tag!r} has non-finite coefficient")
            if v != 0.0:
                cols.append(j)
                vals.append(float(v))
        idx = len(self.row_tags)
        self._row_index[tag] = idx
        self.row_tags.append(tag)
        self.row_lo.append(float(lo))
        self.row_hi.append(float(hi))
        self._rows.append((cols, vals))
        return idx

    def var(self, tag: Hashable) -> int:
        return self._var_index[tag]

    def row(self, tag: Hashable) -> int:
        return self._row_index[tag]

    def has_row(self, tag: Hashable) -> bool:
        return tag in self._row_index

    def has_var(self, tag: Hashable) -> bool:
        return tag in self._var_index

    def matrix(self) -> sp.csr_matrix:
        indptr = [0]
        indices: list[int] = []
        data: list[float] = []
        for cols, vals in self._rows:
            indices.extend(cols)
            data.extend(vals)
            indptr.append(len(indices))
        return sp.csr_matrix(
            (np.asarray(data, float), np.asarray(indices, np.int64), np.asarray(indptr, np.int64)),
            shape=(self.n_rows, self.n_vars),
        )

    def arrays(self):
        """Return ``(c, A, row_lo, row_hi, lb, ub)`` as numpy/scipy objects."""
        return (
            np.asarray(self.cost, float),
            self.matrix(),
            np.asarray(self.row_lo, float),
            np.asarray(self.row_hi, float),
            np.asarray(self.lb, float),
            np.asarray(self.ub, float),
        )

    def to_text(self) -> str:
        """Human-readable dump in an LP-file-like layout, one tagged row per line."""

        def name(tag):
            if isinstance(tag, tuple):
                return tag[0] + "[" + ",".join(str(p) for p in tag[1:]) + "]"
            return str(tag)

        def term(v, j, first):
            sign = "-" if v < 0 else ("" if first else "+")
            return f"{sign} {abs(v):.12g} {name(self.var_tags[j])}".strip()

        lines = [f"\\ {self.name}", "Minimize", " obj: " + " ".join(
            term(c, j, k == 0) for k, (j, c) in enumerate((j, c) for j, c in enumerate(self.cost) if c != 0)
        ), "Subject To"]
        for r, (cols, vals) in enumerate(self._rows):
            expr = " ".join(term(v, j, k == 0) for k, (j, v) in enumerate(zip(cols, vals))) or "0"
            lo, hi = self.row_lo[r], self.row_hi[r]
            tag = name(self.row_tags[r])
            if lo == hi:
                lines.append(f" {tag}: {expr} = {lo:.12g}")
            elif math.isinf(lo):
                lines.append(f" {tag}: {expr} <= {hi:.12g}")
            elif math.isinf(hi):
                lines.append(f" {tag}: {expr} >= {lo:.12g}")
            else:
                lines.append(f" {tag}: {lo:.12g} <= {expr} <= {hi:.12g}")
        lines.append("Bounds")
        for j, tag in enumerate(self.var_tags):
            lo, hi = self.lb[j], self.ub[j]
            lo_s = "-inf" if math.isinf(lo) else f"{lo:.12g}"
            hi_s = "+inf" if math.isinf(hi) else f"{hi:.12g}"
            lines.append(f" {lo_s} <= {name(tag)} <= {hi_s}")
        lines.append("End")
        return "\n".join(lines) + "\n"


@dataclass
class LpSolution:
    status: Status
    x: np.ndarray = field(default_factory=lambda: np.empty(0))
    y: np.ndarray = field(default_factory=lambda: np.empty(0))
    z: np.ndarray = field(default_factory=lambda: np.empty(0))
    objective: float = math.nan
    iterations: int = 0
    backend: str = ""
    lp: LinearProgram | None = field(default=None, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL

    def value(self, tag: Hashable) -> float:
        return float(self.x[self.lp.var(tag)])

    def row_dual(self, tag: Hashable) -> tuple[float, float]:
        """(lower, upper) non-negative duals of a two-sided row."""
        y = float(self.y[self.lp.row(tag)])
        return max(y, 0.0), max(-y, 0.0)

    def bound_dual(self, tag: Hashable) -> tuple[float, float]:
        """(lower, upper) non-negative duals of a variable's bounds."""
        z = float(self.z[self.lp.var(tag)])
        return max(z, 0.0), max(-z, 0.0)

    def row_activity(self, tag: Hashable) -> float:
        cols, vals = self.lp._rows[self.lp.row(tag)]
        return float(sum(v * self.x[j] for j, v in zip(cols, vals)))

    def dual_objective(self) -> float:
        lp = self.lp
        _, _, lo, hi, lb, ub = lp.arrays()
        y, z = self.y, self.z
        return float(
            _dot_active(lo, np.maximum(y, 0)) - _dot_active(hi, np.maximum(-y, 0))
            + _dot_active(lb, np.maximum(z, 0)) - _dot_active(ub, np.maximum(-z, 0))
            + lp.objective_constant
        )


def _dot_active(bound: np.ndarray, dual: np.ndarray) -> float:
    # duals sitting on infinite sides are reported as dual infeasibility elsewhere
    mask = (dual != 0) & np.isfinite(bound)
    return float(np.dot(bound[mask], dual[mask])) if mask.any() else 0.0
