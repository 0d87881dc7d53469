"""Domain types for the zonal power system and raw-unit clustering."""
from __future__ import annotations

import math
import warnings
from collections import defaultdict
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

HOURS_PER_YEAR = 8760.0

# Federal inventory defaults, tCO2/MMBtu.  Inputs, not constants of the model.
DEFAULT_EMISSION_FACTORS = {"coal": 0.09552, "natural_gas": 0.05306, "distillate": 0.07315, "hydrogen": 0.0}
DEFAULT_VOLL = 5000.0


class TechClass(str, Enum):
    CoalSteam = "CoalSteam"
    OilGasSteam = "OilGasSteam"
    ExistingNGCC = "ExistingNGCC"
    ExistingNGCT = "ExistingNGCT"
    NewNGCC = "NewNGCC"
    NewNGCT = "NewNGCT"
    NGCC_CCS = "NGCC_CCS"
    CoalCCSRetrofit = "CoalCCSRetrofit"
    CoalGasCofire = "CoalGasCofire"
    GasCCSRetrofit = "GasCCSRetrofit"
    H2Turbine = "H2Turbine"
    Nuclear = "Nuclear"
    Hydro = "Hydro"
    OnshoreWind = "OnshoreWind"
    OffshoreWind = "OffshoreWind"
    SolarPV = "SolarPV"
    Battery = "Battery"
    Electrolyzer = "Electrolyzer"

    def __str__(self) -> str:
        return self.value


T = TechClass
GAS_TURBINES = frozenset({T.ExistingNGCC, T.ExistingNGCT, T.NewNGCC, T.NewNGCT, T.NGCC_CCS, T.GasCCSRetrofit})
EXISTING_GAS = frozenset({T.ExistingNGCC, T.ExistingNGCT, T.GasCCSRetrofit})
NEW_GAS = frozenset({T.NewNGCC, T.NewNGCT, T.NGCC_CCS})
COAL_FAMILY = frozenset({T.CoalSteam, T.CoalGasCofire, T.CoalCCSRetrofit})
STEAM_FAMILY = COAL_FAMILY | {T.OilGasSteam}
CCS_TECHS = frozenset({T.NGCC_CCS, T.CoalCCSRetrofit, T.GasCCSRetrofit})
VARIABLE_RENEWABLES = frozenset({T.OnshoreWind, T.OffshoreWind, T.SolarPV})
CLEAN_TECHS = VARIABLE_RENEWABLES | {T.Nuclear, T.Hydro, T.Battery}

EXISTING = "Existing"
NEW_BUILD = "NewBuild"


# -- violations ---------------------------------------------------------
class SystemViolation(ValueError):
    """One broken invariant; ``entity`` names the offending record."""

    def __init__(self, entity: str, detail: str = ""):
        self.entity = entity
        self.detail = detail
        super().__init__(f"{type(self).__name__}({entity!r}){': ' + detail if detail else ''}")


class UnknownZone(SystemViolation):
    pass


class UnknownFuel(SystemViolation):
    pass


class UnknownCluster(SystemViolation):
    pass


class UnknownPeriod(SystemViolation):
    pass


class MissingHeatRate(SystemViolation):
    pass


class NegativeCapacity(SystemViolation):
    pass


class DuplicateId(SystemViolation):
    pass


class InvalidValue(SystemViolation):
    pass


class SystemValidationError(ValueError):
    def __init__(self, violations: list[SystemViolation]):
        self.violations = violations
        lines = "\n  ".join(str(v) for v in violations)
        super().__init__(f"{len(violations)} violation(s):\n  {lines}")


# -- domain types -------------------------------------------------------
@dataclass(frozen=True)
class Period:
    label: str
    years_represented: int
    calendar_anchor: int
    demand_scale: float = 1.0


@dataclass(frozen=True, eq=False)
class TimeStructure:
    """Weighted chronological time steps grouped into cyclic blocks.

    ``weights`` are the hours of the year each step stands for (summing to
    8760); ``segments`` are the lengths of consecutive representative weeks
    and ``durations`` the hours each step spans inside its week.
    """

    weights: np.ndarray
    segments: tuple[int, ...]
    durations: np.ndarray | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        if self.durations is None:
            object.__setattr__(self, "durations", np.ones(len(self.weights)))
        else:
            object.__setattr__(self, "durations", np.asarray(self.durations, dtype=float))

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def hours(self) -> np.ndarray:
        return np.arange(self.n)

    @property
    def total_weight(self) -> float:
        return math.fsum(self.weights)

    def segment_bounds(self) -> list[tuple[int, int]]:
        out, start = [], 0
        for length in self.segments:
            out.append((start, start + length))
            start += length
        return out

    @classmethod
    def full_year(cls, n_hours: int = 8760) -> "TimeStructure":
        return cls(np.full(n_hours, HOURS_PER_YEAR / n_hours), (n_hours,))

    @classmethod
    def uniform(cls, n_steps: int, segments: Sequence[int] | None = None) -> "TimeStructure":
        return cls(np.full(n_steps, HOURS_PER_YEAR / n_steps), tuple(segments or (n_steps,)))


@dataclass(frozen=True)
class Fuel:
    """Fuel with prices keyed by (case, zone, period); zone "" is system-wide."""

    id: str
    emission_factor: float
    prices: Mapping[tuple[str, str, str], float] = field(default_factory=dict)
    default_price: float = 0.0
    is_hydrogen: bool = False

    def price(self, period: str, zone: str = "", case: str = "ref") -> float:
        for key in ((case, zone, period), (case, "", period), ("ref", zone, period), ("ref", "", period)):
            if key in self.prices:
                return self.prices[key]
        return self.default_price


@dataclass(frozen=True, eq=False)
class Zone:
    id: str
    demand: np.ndarray
    # (tech_class, period, case) -> MW of new build allowed in that period
    build_limits: Mapping[tuple[str, str, str], float] = field(default_factory=dict)
    h2_demand: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "demand", np.asarray(self.demand, dtype=float))

    def build_limit(self, tech: str, period: str, case: str = "ref") -> float | None:
        for key in ((str(tech), period, case), (str(tech), period, "ref")):
            if key in self.build_limits:
                return self.build_limits[key]
        return None


@dataclass(frozen=True)
class TransmissionLine:
    id: str
    from_zone: str
    to_zone: str
    capacity: float
    max_expansion: float = 0.0
    expansion_cost: float = 0.0
    loss_fraction: float = 0.0


@dataclass(frozen=True, eq=False)
class GeneratorCluster:
    id: str
    zone: str
    tech_class: TechClass
    heat_rates: Mapping[str, float] = field(default_factory=dict)
    allowed_fuels: tuple[str, ...] = ()
    capacity: float = 0.0
    vintage: str = EXISTING
    first_period: str | None = None
    max_new_capacity: float = 0.0
    capture_rate: float = 0.0
    fixed_om: float = 0.0
    var_om: float = 0.0
    annuitized_capex: float = 0.0
    planned_retirement: str | None = None
    availability: float | np.ndarray = 1.0
    retrofit_parents: tuple[tuple[str, float], ...] = ()
    asset_life: int = 30

    def __post_init__(self) -> None:
        object.__setattr__(self, "tech_class", TechClass(self.tech_class))
        if not self.allowed_fuels:
            object.__setattr__(self, "allowed_fuels", tuple(self.heat_rates))
        if not np.isscalar(self.availability):
            object.__setattr__(self, "availability", np.asarray(self.availability, dtype=float))

    @property
    def is_new_build(self) -> bool:
        return self.vintage == NEW_BUILD

    @property
    def is_retrofit(self) -> bool:
        return bool(self.retrofit_parents)

    @property
    def is_thermal(self) -> bool:
        return bool(self.allowed_fuels)

    def availability_profile(self, n: int) -> np.ndarray:
        if np.isscalar(self.availability):
            return np.full(n, float(self.availability))
        return self.availability


@dataclass(frozen=True)
class StorageCluster:
    id: str
    zone: str
    power_capacity: float = 0.0
    energy_capacity: float = 0.0
    round_trip_efficiency: float = 0.85
    vintage: str = EXISTING
    first_period: str | None = None
    max_new_power: float = 0.0
    fixed_om: float = 0.0
    var_om: float = 0.0
    annuitized_capex: float = 0.0
    annuitized_capex_energy: float = 0.0
    # hours of energy per MW for new builds; existing energy scales with power
    duration_hours: float = 4.0
    tech_class: TechClass = TechClass.Battery

    @property
    def duration(self) -> float:
        if self.power_capacity > 0:
            return self.energy_capacity / self.power_capacity
        return self.duration_hours


@dataclass(frozen=True)
class Electrolyzer:
    id: str
    zone: str
    capacity: float = 0.0
    max_new_capacity: float = 0.0
    # MMBtu of hydrogen per MWh of electricity
    h2_yield: float = 2.4
    fixed_om: float = 0.0
    annuitized_capex: float = 0.0
    first_period: str | None = None
    tech_class: TechClass = TechClass.Electrolyzer


@dataclass(frozen=True, eq=False)
class SystemSpec:
    zones: tuple[Zone, ...]
    fuels: tuple[Fuel, ...]
    clusters: tuple[GeneratorCluster, ...]
    time: TimeStructure
    periods: tuple[Period, ...]
    storage: tuple[StorageCluster, ...] = ()
    electrolyzers: tuple[Electrolyzer, ...] = ()
    lines: tuple[TransmissionLine, ...] = ()
    baseline_2022_emissions: float = 0.0
    voll: float = DEFAULT_VOLL

    def replace(self, **changes) -> "SystemSpec":
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class ValidatedSystem:
    """A SystemSpec whose cross references have been checked, plus lookups."""

    spec: SystemSpec
    zone: Mapping[str, Zone]
    fuel: Mapping[str, Fuel]
    cluster: Mapping[str, GeneratorCluster]
    period: Mapping[str, Period]
    children: Mapping[str, tuple[tuple[str, float], ...]]

    @property
    def time(self) -> TimeStructure:
        return self.spec.time

    @property
    def periods(self) -> tuple[Period, ...]:
        return self.spec.periods

    @property
    def clusters(self) -> tuple[GeneratorCluster, ...]:
        return self.spec.clusters

    def period_index(self, label: str) -> int:
        for i, p in enumerate(self.spec.periods):
            if p.label == label:
                return i
        raise UnknownPeriod(label)

    def root_of(self, cluster_id: str) -> str:
        """The original (non-retrofit) cluster a variant descends from."""
        seen = set()
        cid = cluster_id
        while self.cluster[cid].retrofit_parents and cid not in seen:
            seen.add(cid)
            cid = self.cluster[cid].retrofit_parents[0][0]
        return cid

    def emission_factor(self, fuel_id: str) -> float:
        return self.fuel[fuel_id].emission_factor


def validate_system(spec: SystemSpec) -> ValidatedSystem:
    """Check every invariant; raise SystemValidationError listing all violations."""
    v: list[SystemViolation] = []
    seen: dict[str, str] = {}

    def unique(kind: str, ident: str) -> None:
        if ident in seen:
            v.append(DuplicateId(ident, f"{kind} id already used by a {seen[ident]}"))
        else:
            seen[ident] = kind

    n = spec.time.n
    w = spec.time.weights
    if n == 0:
        v.append(InvalidValue("time", "no time steps"))
    else:
        if np.any(w <= 0):
            v.append(InvalidValue("time", "weights must be positive"))
        if abs(math.fsum(w) - HOURS_PER_YEAR) > 1e-6:
            v.append(InvalidValue("time", f"weights sum to {math.fsum(w)}, expected 8760"))
        if sum(spec.time.segments) != n or any(s <= 0 for s in spec.time.segments):
            v.append(InvalidValue("time", "segments must partition the time steps"))
        if len(spec.time.durations) != n or np.any(spec.time.durations <= 0):
            v.append(InvalidValue("time", "durations must be positive, one per step"))

    labels = [p.label for p in spec.periods]
    period_set = set(labels)
    if len(period_set) != len(labels):
        v.append(DuplicateId("periods", "period labels must be unique"))
    anchors = [p.calendar_anchor for p in spec.periods]
    if any(b <= a for a, b in zip(anchors, anchors[1:])):
        v.append(InvalidValue("periods", "calendar anchors must be strictly increasing"))
    for p in spec.periods:
        if p.years_represented < 1:
            v.append(InvalidValue(p.label, "years_represented must be >= 1"))
        if p.demand_scale < 0:
            v.append(InvalidValue(p.label, "demand_scale must be >= 0"))

    zone_ids = set()
    for z in spec.zones:
        unique("zone", z.id)
        zone_ids.add(z.id)
        if len(z.demand) != n:
            v.append(InvalidValue(z.id, f"demand has {len(z.demand)} values, expected {n}"))
        elif np.any(z.demand < 0):
            v.append(InvalidValue(z.id, "negative demand"))
        for key, mw in z.build_limits.items():
            if mw < 0:
                v.append(NegativeCapacity(z.id, f"build limit {key} is negative"))
        for per, h2 in z.h2_demand.items():
            if per not in period_set:
                v.append(UnknownPeriod(per, f"h2 demand of zone {z.id}"))
            elif h2 < 0:
                v.append(InvalidValue(z.id, "negative hydrogen demand"))

    fuel_ids = set()
    for f in spec.fuels:
        unique("fuel", f.id)
        fuel_ids.add(f.id)
        if f.emission_factor < 0:
            v.append(InvalidValue(f.id, "negative emission factor"))
        if f.is_hydrogen and f.emission_factor != 0:
            v.append(InvalidValue(f.id, "hydrogen must have a zero emission factor"))
        if f.default_price < 0 or any(p < 0 for p in f.prices.values()):
            v.append(InvalidValue(f.id, "negative fuel price"))

    cluster_ids = {c.id for c in spec.clusters}
    for c in spec.clusters:
        unique("cluster", c.id)
        if c.zone not in zone_ids:
            v.append(UnknownZone(c.zone, f"referenced by cluster {c.id}"))
        if c.capacity < 0:
            v.append(NegativeCapacity(c.id, f"capacity {c.capacity}"))
        if c.max_new_capacity < 0:
            v.append(NegativeCapacity(c.id, f"max_new_capacity {c.max_new_capacity}"))
        if not 0.0 <= c.capture_rate <= 1.0:
            v.append(InvalidValue(c.id, f"capture_rate {c.capture_rate} outside [0, 1]"))
        for f in c.allowed_fuels:
            if f not in fuel_ids:
                v.append(UnknownFuel(f, f"referenced by cluster {c.id}"))
            elif f not in c.heat_rates or not c.heat_rates[f] > 0:
                v.append(MissingHeatRate(c.id, f"fuel {f}"))
        if c.vintage not in (EXISTING, NEW_BUILD):
            v.append(InvalidValue(c.id, f"vintage {c.vintage!r}"))
        if c.is_new_build and c.capacity != 0:
            v.append(InvalidValue(c.id, "new-build clusters start with zero capacity"))
        for ref in (c.first_period, c.planned_retirement):
            if ref is not None and ref not in period_set:
                v.append(UnknownPeriod(ref, f"referenced by cluster {c.id}"))
        avail = c.availability
        if np.isscalar(avail):
            if not 0.0 <= float(avail) <= 1.0:
                v.append(InvalidValue(c.id, "availability outside [0, 1]"))
        elif len(avail) != n or np.any(avail < 0) or np.any(avail > 1):
            v.append(InvalidValue(c.id, "availability profile must have one value in [0, 1] per step"))
        for parent, ratio in c.retrofit_parents:
            if parent not in cluster_ids:
                v.append(UnknownCluster(parent, f"retrofit parent of {c.id}"))
            if not 0.0 < ratio <= 1.0:
                v.append(InvalidValue(c.id, f"retrofit ratio {ratio} outside (0, 1]"))
        if c.asset_life < 1:
            v.append(InvalidValue(c.id, "asset_life must be >= 1"))

    for s in spec.storage:
        unique("storage", s.id)
        if s.zone not in zone_ids:
            v.append(UnknownZone(s.zone, f"referenced by storage {s.id}"))
        if min(s.power_capacity, s.energy_capacity, s.max_new_power) < 0:
            v.append(NegativeCapacity(s.id))
        if not s.duration_hours > 0:
            v.append(InvalidValue(s.id, "duration_hours must be positive"))
        if not 0.0 < s.round_trip_efficiency <= 1.0:
            v.append(InvalidValue(s.id, "round-trip efficiency outside (0, 1]"))
        if s.first_period is not None and s.first_period not in period_set:
            v.append(UnknownPeriod(s.first_period, f"referenced by storage {s.id}"))

    for e in spec.electrolyzers:
        unique("electrolyzer", e.id)
        if e.zone not in zone_ids:
            v.append(UnknownZone(e.zone, f"referenced by electrolyzer {e.id}"))
        if min(e.capacity, e.max_new_capacity) < 0:
            v.append(NegativeCapacity(e.id))
        if not e.h2_yield > 0:
            v.append(InvalidValue(e.id, "h2_yield must be positive"))

    for line in spec.lines:
        unique("line", line.id)
        for end in (line.from_zone, line.to_zone):
            if end not in zone_ids:
                v.append(UnknownZone(end, f"referenced by line {line.id}"))
        if line.from_zone == line.to_zone:
            v.append(InvalidValue(line.id, "line connects a zone to itself"))
        if line.capacity < 0 or line.max_expansion < 0:
            v.append(NegativeCapacity(line.id))
        if not 0.0 <= line.loss_fraction < 1.0:
            v.append(InvalidValue(line.id, "loss fraction outside [0, 1)"))

    if spec.voll is not None and spec.voll < 0:
        v.append(InvalidValue("voll", "negative value of lost load"))
    if spec.baseline_2022_emissions < 0:
        v.append(InvalidValue("baseline_2022_emissions", "negative baseline"))

    if v:
        raise SystemValidationError(v)

    children: dict[str, list[tuple[str, float]]] = defaultdict(list)
    for c in spec.clusters:
        for parent, ratio in c.retrofit_parents:
            children[parent].append((c.id, ratio))
    return ValidatedSystem(
        spec=spec,
        zone={z.id: z for z in spec.zones},
        fuel={f.id: f for f in spec.fuels},
        cluster={c.id: c for c in spec.clusters},
        period={p.label: p for p in spec.periods},
        children={k: tuple(vals) for k, vals in children.items()},
    )


# -- clustering ---------------------------------------------------------
@dataclass(frozen=True)
class RawUnit:
    id: str
    fuel: str
    tech: TechClass
    zone: str
    capacity: float
    heat_rate: float
    fixed_om: float = 0.0
    var_om: float = 0.0
    annuitized_capex: float = 0.0


@dataclass(frozen=True)
class Bins:
    """Interior bin edges; a value v lands in bin ``searchsorted(edges, v, 'right')``."""

    size_edges: tuple[float, ...] = ()
    heat_rate_edges: tuple[float, ...] = ()

    @classmethod
    def quartiles(cls, units: Iterable[RawUnit]) -> "Bins":
        units = [u for u in units if u.capacity > 0]
        if not units:
            return cls()
        sizes = np.array([u.capacity for u in units])
        rates = np.array([u.heat_rate for u in units])
        q = [0.25, 0.5, 0.75]
        return cls(tuple(np.unique(np.quantile(sizes, q))), tuple(np.unique(np.quantile(rates, q))))


def cluster_generators(units: Sequence[RawUnit], bins: Bins | None = None) -> list[GeneratorCluster]:
    """Merge units sharing (fuel, tech, zone, size bin, heat-rate bin).

    Capacity is summed; heat rate and cost fields become capacity-weighted
    means.  Zero-capacity units are dropped with a ``UserWarning``.  Output
    is sorted by grouping key so input order does not matter.
    """
    kept = []
    for u in units:
        if u.capacity <= 0:
            warnings.warn(f"dropping unit {u.id!r} with capacity {u.capacity}", UserWarning, stacklevel=2)
            continue
        kept.append(u)
    if not kept:
        return []
    bins = bins or Bins.quartiles(kept)
    size_edges = np.asarray(bins.size_edges, dtype=float)
    hr_edges = np.asarray(bins.heat_rate_edges, dtype=float)
    groups: dict[tuple, list[RawUnit]] = defaultdict(list)
    for u in kept:
        sb = int(np.searchsorted(size_edges, u.capacity, side="right"))
        hb = int(np.searchsorted(hr_edges, u.heat_rate, side="right"))
        groups[(u.zone, str(TechClass(u.tech)), u.fuel, sb, hb)].append(u)

    out = []
    for key in sorted(groups):
        zone, tech, fuel, sb, hb = key
        members = groups[key]
        total = math.fsum(u.capacity for u in members)

        def wmean(attr: str) -> float:
            return math.fsum(u.capacity * getattr(u, attr) for u in members) / total

        out.append(
            GeneratorCluster(
                id=f"{zone}.{tech}.{fuel}.s{sb}.h{hb}",
                zone=zone,
                tech_class=TechClass(tech),
                heat_rates={fuel: wmean("heat_rate")},
                allowed_fuels=(fuel,),
                capacity=total,
                fixed_om=wmean("fixed_om"),
                var_om=wmean("var_om"),
                annuitized_capex=wmean("annuitized_capex"),
            )
        )
    return out
