"""Resource types: the generalized storage model and its special cases.

Every dispatchable resource is an :class:`EsrSpec`. A conventional generator
is a storage unit that cannot charge and whose state of charge is unbounded;
a DER aggregator is a storage unit whose state of charge is unbounded. An
unbounded limit is ``math.inf`` (or ``-math.inf``), and the LP builders drop
the corresponding rows instead of writing a large number into them.

Intervals are one hour long, so MW and MWh are used interchangeably.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Iterable

UNBOUNDED = math.inf

KINDS = ("generator", "dera", "esr")


@dataclass(frozen=True)
class BidCurve:
    """Linear bid curve ``f_t(g) = coefficient_t * g``."""

    coefficient: float
    overrides: tuple[tuple[int, float], ...] = ()
    kind: str = "linear"

    def __post_init__(self):
        if self.kind != "linear":
            raise ValueError(f"unsupported bid curve kind {self.kind!r}")
        vals = [self.coefficient] + [v for _, v in self.overrides]
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("bid coefficients must be finite")

    def marginal(self, t: int) -> float:
        for tt, v in self.overrides:
            if tt == t:
                return v
        return self.coefficient

    def __call__(self, g: float, t: int = 0) -> float:
        return self.marginal(t) * g


@dataclass(frozen=True)
class EsrSpec:
    id: str
    cost_d: float = 0.0
    cost_c: float = 0.0
    cap_d: float = 0.0
    cap_c: float = 0.0
    ramp_up_d: float = UNBOUNDED
    ramp_down_d: float = UNBOUNDED
    ramp_up_c: float = UNBOUNDED
    ramp_down_c: float = UNBOUNDED
    soc_min: float = -UNBOUNDED
    soc_max: float = UNBOUNDED
    soc_init: float = 0.0
    eff_c: float = 1.0
    eff_d: float = 1.0
    init_d: float = 0.0
    init_c: float = 0.0
    kind: str = "esr"
    cost_d_overrides: tuple[tuple[int, float], ...] = ()
    cost_c_overrides: tuple[tuple[int, float], ...] = ()

    @property
    def discharge_curve(self) -> BidCurve:
        return BidCurve(self.cost_d, self.cost_d_overrides)

    @property
    def charge_curve(self) -> BidCurve:
        return BidCurve(self.cost_c, self.cost_c_overrides)

    @property
    def has_soc_limits(self) -> bool:
        return math.isfinite(self.soc_min) or math.isfinite(self.soc_max)

    @property
    def can_discharge(self) -> bool:
        return self.cap_d > 0

    @property
    def can_charge(self) -> bool:
        return self.cap_c > 0

    def cost_order_holds(self) -> bool:
        """Discharge cost above charge benefit net of round-trip losses."""
        if not (self.can_charge and self.can_discharge):
            return True
        return self.cost_d > self.cost_c / (self.eff_c * self.eff_d)


@dataclass(frozen=True)
class BidParameters:
    """Reported parameters; ``None`` fields repeat the true value."""

    cost_d: float | None = None
    cost_c: float | None = None
    cap_d: float | None = None
    cap_c: float | None = None
    ramp_up_d: float | None = None
    ramp_down_d: float | None = None
    ramp_up_c: float | None = None
    ramp_down_c: float | None = None
    soc_min: float | None = None
    soc_max: float | None = None

    def apply(self, spec: EsrSpec) -> EsrSpec:
        changes = {f.name: getattr(self, f.name) for f in fields(self) if getattr(self, f.name) is not None}
        return replace(spec, **changes)

    @property
    def truthful(self) -> bool:
        return all(getattr(self, f.name) is None for f in fields(self))


TRUTHFUL = BidParameters()


@dataclass(frozen=True)
class FleetEntry:
    spec: EsrSpec
    bid: BidParameters = TRUTHFUL

    @property
    def reported(self) -> EsrSpec:
        return self.bid.apply(self.spec)


@dataclass(frozen=True)
class Fleet:
    entries: tuple[FleetEntry, ...]
    horizon: int = 24
    window: int = 4
    description: str = ""

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        ids = [e.spec.id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("resource ids must be unique")
        if not 1 <= self.window <= self.horizon:
            raise ValueError("window must satisfy 1 <= window <= horizon")

    @classmethod
    def from_specs(cls, specs: Iterable[EsrSpec], horizon: int = 24, window: int = 4) -> "Fleet":
        return cls(tuple(FleetEntry(s) for s in specs), horizon, window)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def ids(self) -> list[str]:
        return [e.spec.id for e in self.entries]

    @property
    def true_specs(self) -> list[EsrSpec]:
        return [e.spec for e in self.entries]

    @property
    def reported_specs(self) -> list[EsrSpec]:
        return [e.reported for e in self.entries]

    def index(self, resource_id: str) -> int:
        return self.ids.index(resource_id)

    def with_bid(self, resource_id: str, bid: BidParameters) -> "Fleet":
        i = self.index(resource_id)
        entries = list(self.entries)
        entries[i] = replace(entries[i], bid=bid)
        return replace(self, entries=tuple(entries))

    def without_kind(self, kind: str) -> "Fleet":
        return replace(self, entries=tuple(e for e in self.entries if e.spec.kind != kind))


def generator_as_esr(cap: float, ramp: float, cost: float, id: str = "G", *,
                     ramp_down: float | None = None, init: float = 0.0) -> EsrSpec:
    """A generator: discharge only, no state-of-charge limits."""
    if cap < 0 or ramp < 0 or (ramp_down is not None and ramp_down < 0):
        raise ValueError("generator capacity and ramp limits must be non-negative")
    return EsrSpec(
        id=id, kind="generator", cost_d=cost, cost_c=0.0, cap_d=cap, cap_c=0.0,
        ramp_up_d=ramp, ramp_down_d=ramp if ramp_down is None else ramp_down,
        ramp_up_c=0.0, ramp_down_c=0.0,
        soc_min=-UNBOUNDED, soc_max=UNBOUNDED, soc_init=0.0,
        eff_c=1.0, eff_d=1.0, init_d=init, init_c=0.0,
    )


def dera_as_esr(cap_c: float, cap_d: float, ramps: tuple[float, float, float, float] | float,
                costs: tuple[float, float], id: str = "DERA", *,
                eff_c: float = 1.0, eff_d: float = 1.0) -> EsrSpec:
    """A DER aggregator: virtual storage whose state of charge never binds.

    ``ramps`` is ``(up_d, down_d, up_c, down_c)`` or one value for all four;
    ``costs`` is ``(cost_d, cost_c)``.
    """
    if cap_c < 0 or cap_d < 0:
        raise ValueError("DERA capacities must be non-negative")
    if not isinstance(ramps, tuple):
        ramps = (ramps,) * 4
    if any(r < 0 for r in ramps):
        raise ValueError("ramp limits must be non-negative")
    return EsrSpec(
        id=id, kind="dera", cost_d=costs[0], cost_c=costs[1], cap_d=cap_d, cap_c=cap_c,
        ramp_up_d=ramps[0], ramp_down_d=ramps[1], ramp_up_c=ramps[2], ramp_down_c=ramps[3],
        soc_min=-UNBOUNDED, soc_max=UNBOUNDED, soc_init=0.0, eff_c=eff_c, eff_d=eff_d,
    )


def validate_spec(s: EsrSpec) -> list[str]:
    out = []
    p = f"{s.id}: "
    if s.kind not in KINDS:
        out.append(p + f"unknown kind {s.kind!r}")
    if s.cap_d < 0:
        out.append(p + "cap_d negative")
    if s.cap_c < 0:
        out.append(p + "cap_c negative")
    for name in ("ramp_up_d", "ramp_down_d", "ramp_up_c", "ramp_down_c"):
        if getattr(s, name) < 0:
            out.append(p + f"{name} negative")
    if s.soc_min > s.soc_max:
        out.append(p + "soc_min above soc_max")
    if s.soc_init < s.soc_min:
        out.append(p + "soc_init below soc_min")
    if s.soc_init > s.soc_max:
        out.append(p + "soc_init above soc_max")
    for name in ("eff_c", "eff_d"):
        v = getattr(s, name)
        if not 0 < v <= 1:
            out.append(p + f"{name} outside (0, 1]")
    if not 0 <= s.init_d <= s.cap_d:
        out.append(p + "init_d outside [0, cap_d]")
    if not 0 <= s.init_c <= s.cap_c:
        out.append(p + "init_c outside [0, cap_c]")
    for name in ("cost_d", "cost_c"):
        if not math.isfinite(getattr(s, name)):
            out.append(p + f"{name} not finite")
    if all("eff_" not in d for d in out) and not s.cost_order_holds():
        out.append(p + "warning: cost_d <= cost_c/(eff_c*eff_d), complementarity relaxation may fail")
    return out


def validate_fleet(fleet: Fleet) -> list[str]:
    """Diagnostics for invalid parameters; an empty list means the fleet is valid."""
    out: list[str] = []
    ids = fleet.ids
    if len(set(ids)) != len(ids):
        out.append("fleet: duplicate resource ids")
    if not 1 <= fleet.window <= fleet.horizon:
        out.append("fleet: window must satisfy 1 <= window <= horizon")
    for e in fleet.entries:
        out.extend(validate_spec(e.spec))
        if not e.bid.truthful:
            out.extend(d.replace(f"{e.spec.id}: ", f"{e.spec.id} (bid): ", 1) for d in validate_spec(e.reported))
    return out


# --- JSON configuration -------------------------------------------------------

_RESOURCE_KEYS = {
    "id", "kind", "cost_d", "cost_c", "cap_d", "cap_c", "ramp_up_d", "ramp_down_d",
    "ramp_up_c", "ramp_down_c", "soc_min", "soc_max", "soc_init", "eff_c", "eff_d",
    "init_d", "init_c", "bid",
}
_BID_KEYS = {f.name for f in fields(BidParameters)}
_TOP_KEYS = {"horizon", "window", "resources", "description"}


def _num(v: Any, default: float, *, negative_inf: bool = False) -> float:
    if v is None:
        return default
    if isinstance(v, str):
        v = v.strip().lower()
        if v in ("inf", "+inf", "infinity", "unbounded"):
            return -math.inf if negative_inf else math.inf
        if v == "-inf":
            return -math.inf
        raise ValueError(f"bad numeric value {v!r}")
    return float(v)


def resource_from_dict(d: dict) -> FleetEntry:
    unknown = set(d) - _RESOURCE_KEYS
    if unknown:
        raise ValueError(f"unknown resource keys: {sorted(unknown)}")
    kind = d.get("kind", "esr")
    if kind not in KINDS:
        raise ValueError(f"unknown resource kind {kind!r}")
    if "id" not in d:
        raise ValueError("resource without id")
    bounded_soc = kind == "esr"
    if bounded_soc and not {"soc_min", "soc_max"} <= set(d):
        raise ValueError(f"esr {d['id']} needs soc_min and soc_max")
    spec = EsrSpec(
        id=str(d["id"]),
        kind=kind,
        cost_d=_num(d.get("cost_d"), 0.0),
        cost_c=_num(d.get("cost_c"), 0.0),
        cap_d=_num(d.get("cap_d"), 0.0),
        cap_c=_num(d.get("cap_c"), 0.0),
        ramp_up_d=_num(d.get("ramp_up_d"), UNBOUNDED),
        ramp_down_d=_num(d.get("ramp_down_d", d.get("ramp_up_d")), UNBOUNDED),
        ramp_up_c=_num(d.get("ramp_up_c"), UNBOUNDED),
        ramp_down_c=_num(d.get("ramp_down_c", d.get("ramp_up_c")), UNBOUNDED),
        soc_min=_num(d.get("soc_min"), -UNBOUNDED, negative_inf=True) if bounded_soc else -UNBOUNDED,
        soc_max=_num(d.get("soc_max"), UNBOUNDED) if bounded_soc else UNBOUNDED,
        soc_init=_num(d.get("soc_init"), _num(d.get("soc_min"), 0.0) if bounded_soc else 0.0),
        eff_c=_num(d.get("eff_c"), 1.0),
        eff_d=_num(d.get("eff_d"), 1.0),
        init_d=_num(d.get("init_d"), 0.0),
        init_c=_num(d.get("init_c"), 0.0),
    )
    bid_d = d.get("bid") or {}
    unknown = set(bid_d) - _BID_KEYS
    if unknown:
        raise ValueError(f"unknown bid keys for {spec.id}: {sorted(unknown)}")
    bid = BidParameters(**{k: _num(v, 0.0, negative_inf=(k == "soc_min")) for k, v in bid_d.items()})
    return FleetEntry(spec, bid)


def fleet_from_dict(doc: dict) -> Fleet:
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ValueError(f"unknown fleet keys: {sorted(unknown)}")
    entries = tuple(resource_from_dict(r) for r in doc["resources"])
    return Fleet(entries, int(doc.get("horizon", 24)), int(doc.get("window", 4)), doc.get("description", ""))


def load_fleet(path: str | Path) -> Fleet:
    with open(path) as fh:
        return fleet_from_dict(json.load(fh))


def _json_num(v: float):
    return v if math.isfinite(v) else None


def fleet_to_dict(fleet: Fleet) -> dict:
    res = []
    for e in fleet.entries:
        s = e.spec
        d = {k: (_json_num(getattr(s, k)) if isinstance(getattr(s, k), float) else getattr(s, k))
             for k in _RESOURCE_KEYS - {"bid"}}
        if not e.bid.truthful:
            d["bid"] = {f.name: getattr(e.bid, f.name) for f in fields(e.bid) if getattr(e.bid, f.name) is not None}
        res.append(dict(sorted(d.items())))
    out = {"horizon": fleet.horizon, "window": fleet.window, "resources": res}
    if fleet.description:
        out["description"] = fleet.description
    return out


def specs_of(fleet_or_specs: Fleet | Iterable[EsrSpec]) -> list[EsrSpec]:
    if isinstance(fleet_or_specs, Fleet):
        return fleet_or_specs.reported_specs
    return list(fleet_or_specs)


__all__ = [
    "UNBOUNDED", "BidCurve", "EsrSpec", "BidParameters", "TRUTHFUL", "FleetEntry", "Fleet",
    "generator_as_esr", "dera_as_esr", "validate_fleet", "validate_spec",
    "fleet_from_dict", "fleet_to_dict", "load_fleet", "resource_from_dict", "specs_of",
]

