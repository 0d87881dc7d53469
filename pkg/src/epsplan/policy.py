"""Regulations as data and their compilation into per-cluster constraints.

A rule pairs an applicability predicate with alternative compliance
pathways.  Compilation never introduces integer choices: for each matched
cluster the first pathway the cluster already meets by construction wins
(nothing to add); otherwise the first pathway that can be written as linear
rows on the cluster itself is imposed; failing that the first pathway is
recorded as-is, which the LP builder turns into "may not operate" so that
compliance has to come through retrofit variants or retirement.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from enum import Enum
from typing import Mapping, Sequence, Union

from .credits import TaxCreditSettings
from .system import (
    EXISTING,
    GeneratorCluster,
    Period,
    TechClass,
    UnknownPeriod,
    ValidatedSystem,
)


class PolicyError(ValueError):
    pass


class NotCoal(PolicyError):
    pass


class RuleReferencesUnknownFuel(PolicyError):
    pass


# -- pathway constraints ------------------------------------------------
def _unit_interval(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise PolicyError(f"{name}={value} outside [0, 1]")


@dataclass(frozen=True)
class MaxCapacityFactor:
    gamma: float

    def __post_init__(self) -> None:
        _unit_interval("gamma", self.gamma)


@dataclass(frozen=True)
class MinFuelHeatShare:
    fuel: str
    share: float

    def __post_init__(self) -> None:
        _unit_interval("share", self.share)


@dataclass(frozen=True)
class RequireCapture:
    rate: float

    def __post_init__(self) -> None:
        _unit_interval("rate", self.rate)


@dataclass(frozen=True)
class MustRetireBy:
    period: str


@dataclass(frozen=True)
class MaxEmissionRate:
    # tCO2/MWh
    rate: float

    def __post_init__(self) -> None:
        if self.rate < 0:
            raise PolicyError("emission rate limit must be non-negative")


PathwayConstraint = Union[MaxCapacityFactor, MinFuelHeatShare, RequireCapture, MustRetireBy, MaxEmissionRate]


@dataclass(frozen=True)
class Pathway:
    name: str
    constraints: tuple[PathwayConstraint, ...]


class CoalSubcategory(str, Enum):
    RetireBefore2032_Unconstrained = "RetireBefore2032_Unconstrained"
    RetireBefore2035_CF20 = "RetireBefore2035_CF20"
    RetireBefore2039_Cofire40From2030 = "RetireBefore2039_Cofire40From2030"
    OperatePast2039_CCSFrom2032 = "OperatePast2039_CCSFrom2032"


FINAL = "final"
PROPOSED = "proposed"


def classify_coal_subcategory(
    cluster: GeneratorCluster, retirement: Period | None, classification: str = FINAL
) -> CoalSubcategory:
    """Bucket an existing steam cluster by the period it stops operating.

    ``retirement`` is the earlier of the planned and economic retirement
    periods (``None`` when the cluster survives the whole study).  The
    ``proposed`` classification adds the low-utilisation bucket for units
    retiring by 2035.
    """
    if cluster.tech_class not in (TechClass.CoalSteam, TechClass.OilGasSteam):
        raise NotCoal(f"{cluster.id} is {cluster.tech_class}, not an existing steam unit")
    if retirement is None:
        return CoalSubcategory.OperatePast2039_CCSFrom2032
    year = retirement.calendar_anchor
    if year <= 2032:
        return CoalSubcategory.RetireBefore2032_Unconstrained
    if classification == PROPOSED and year <= 2035:
        return CoalSubcategory.RetireBefore2035_CF20
    if year <= 2039:
        return CoalSubcategory.RetireBefore2039_Cofire40From2030
    return CoalSubcategory.OperatePast2039_CCSFrom2032


@dataclass(frozen=True)
class PolicyRule:
    id: str
    effective_from: str
    pathways: tuple[Pathway, ...]
    tech_classes: frozenset[TechClass] = frozenset()
    vintage: str | None = None
    min_capacity_mw: float | None = None
    retirement_classes: frozenset[CoalSubcategory] | None = None
    description: str = ""

    def __post_init__(self) -> None:
        if not self.pathways:
            raise PolicyError(f"rule {self.id!r} needs at least one pathway")
        object.__setattr__(self, "tech_classes", frozenset(TechClass(t) for t in self.tech_classes))
        if self.retirement_classes is not None:
            object.__setattr__(self, "retirement_classes", frozenset(CoalSubcategory(c) for c in self.retirement_classes))


def _position(label: str, study: Sequence[Period]) -> int:
    for i, p in enumerate(study):
        if p.label == label:
            return i
    raise UnknownPeriod(label)


def applicable(
    rule: PolicyRule,
    cluster: GeneratorCluster,
    period: Period,
    study: Sequence[Period],
    subcategory: CoalSubcategory | None = None,
    nameplate: float | None = None,
) -> bool:
    """Tech, vintage, size and retirement-class predicates plus the effective date.

    Capacity-factor thresholds are deliberately not evaluated here; they are
    expressed as LP rows by the chosen pathway.
    """
    if rule.tech_classes and cluster.tech_class not in rule.tech_classes:
        return False
    if rule.vintage is not None and cluster.vintage != rule.vintage:
        return False
    size = cluster.capacity if nameplate is None else nameplate
    if rule.min_capacity_mw is not None and not size > rule.min_capacity_mw:
        return False
    if rule.retirement_classes is not None and subcategory not in rule.retirement_classes:
        return False
    return _position(period.label, study) >= _position(rule.effective_from, study)


# -- scenarios ----------------------------------------------------------
@dataclass(frozen=True)
class Scenario:
    name: str
    rules: tuple[PolicyRule, ...] = ()
    # MtCO2 per period label
    co2_cap: Mapping[str, float] | None = None
    # take the cap from another scenario's stage emissions
    co2_cap_from: str | None = None
    tax_credits: TaxCreditSettings = field(default_factory=TaxCreditSettings)
    fuel_price_case: str = "ref"
    growth_case: str = "ref"
    nuclear_no_retirement: bool = False
    coal_classification: str = FINAL
    description: str = ""

    def __post_init__(self) -> None:
        if self.co2_cap is not None and any(v < 0 for v in self.co2_cap.values()):
            raise PolicyError("CO2 cap must be non-negative")
        if self.coal_classification not in (FINAL, PROPOSED):
            raise PolicyError(f"unknown coal classification {self.coal_classification!r}")
        ids = [r.id for r in self.rules]
        if len(set(ids)) != len(ids):
            raise PolicyError(f"scenario {self.name!r} has duplicate rule ids")

    @property
    def sensitivity_key(self) -> tuple:
        tc = self.tax_credits
        credits = tuple(
            (f.name, tuple(sorted(getattr(tc, f.name).items())) if f.name == "credit_modes" else getattr(tc, f.name))
            for f in fields(tc)
        )
        return (self.fuel_price_case, self.growth_case, self.nuclear_no_retirement, credits)


@dataclass
class ClusterConstraints:
    max_cf: float | None = None
    min_shares: dict[str, float] = field(default_factory=dict)
    require_capture: float | None = None
    retire_by: str | None = None
    max_emission_rate: float | None = None
    sources: list[str] = field(default_factory=list)

    def is_empty(self) -> bool:
        return (
            self.max_cf is None
            and not self.min_shares
            and self.require_capture is None
            and self.retire_by is None
            and self.max_emission_rate is None
        )


@dataclass
class ConstraintSet:
    period: str
    clusters: dict[str, ClusterConstraints] = field(default_factory=dict)
    co2_cap: float | None = None
    tax_credits: TaxCreditSettings = field(default_factory=TaxCreditSettings)
    subcategories: dict[str, CoalSubcategory] = field(default_factory=dict)

    def is_empty(self) -> bool:
        return self.co2_cap is None and all(c.is_empty() for c in self.clusters.values())

    def implies(self, other: "ConstraintSet", study: Sequence[Period]) -> bool:
        """True if every constraint of ``other`` appears here at least as tight."""
        if other.co2_cap is not None and (self.co2_cap is None or self.co2_cap > other.co2_cap):
            return False
        for cid, theirs in other.clusters.items():
            mine = self.clusters.get(cid, ClusterConstraints())
            if theirs.max_cf is not None and (mine.max_cf is None or mine.max_cf > theirs.max_cf):
                return False
            for fuel, share in theirs.min_shares.items():
                if mine.min_shares.get(fuel, -1.0) < share:
                    return False
            if theirs.require_capture is not None and (mine.require_capture or -1.0) < theirs.require_capture:
                return False
            if theirs.max_emission_rate is not None and (
                mine.max_emission_rate is None or mine.max_emission_rate > theirs.max_emission_rate
            ):
                return False
            if theirs.retire_by is not None and (
                mine.retire_by is None or _position(mine.retire_by, study) > _position(theirs.retire_by, study)
            ):
                return False
        return True


def _max_emission_rate(cluster: GeneratorCluster, system: ValidatedSystem) -> float:
    return max(
        (cluster.heat_rates[f] * system.emission_factor(f) * (1 - cluster.capture_rate) for f in cluster.allowed_fuels),
        default=0.0,
    )


def _satisfied(con: PathwayConstraint, cluster: GeneratorCluster, system: ValidatedSystem) -> bool:
    if isinstance(con, RequireCapture):
        return cluster.capture_rate >= con.rate - 1e-12
    if isinstance(con, MaxCapacityFactor):
        return con.gamma >= 1.0
    if isinstance(con, MinFuelHeatShare):
        return con.share == 0.0 or tuple(cluster.allowed_fuels) == (con.fuel,)
    if isinstance(con, MaxEmissionRate):
        return _max_emission_rate(cluster, system) <= con.rate
    return False


def _expressible(con: PathwayConstraint, cluster: GeneratorCluster) -> bool:
    if isinstance(con, RequireCapture):
        return False
    if isinstance(con, MinFuelHeatShare):
        return con.fuel in cluster.allowed_fuels
    return True


def select_pathway(rule: PolicyRule, cluster: GeneratorCluster, system: ValidatedSystem) -> Pathway | None:
    """Pathway imposed on ``cluster``; ``None`` when it already complies."""
    for pw in rule.pathways:
        if all(_satisfied(c, cluster, system) for c in pw.constraints):
            return None
    for pw in rule.pathways:
        if all(_expressible(c, cluster) or _satisfied(c, cluster, system) for c in pw.constraints):
            return pw
    return rule.pathways[0]


def _merge(target: ClusterConstraints, con: PathwayConstraint, cluster: GeneratorCluster, system: ValidatedSystem,
           study: Sequence[Period]) -> None:
    if _satisfied(con, cluster, system) and not isinstance(con, MustRetireBy):
        return
    if isinstance(con, MaxCapacityFactor):
        target.max_cf = con.gamma if target.max_cf is None else min(target.max_cf, con.gamma)
    elif isinstance(con, MinFuelHeatShare):
        target.min_shares[con.fuel] = max(target.min_shares.get(con.fuel, 0.0), con.share)
    elif isinstance(con, RequireCapture):
        target.require_capture = con.rate if target.require_capture is None else max(target.require_capture, con.rate)
    elif isinstance(con, MaxEmissionRate):
        target.max_emission_rate = (
            con.rate if target.max_emission_rate is None else min(target.max_emission_rate, con.rate)
        )
    elif isinstance(con, MustRetireBy):
        if target.retire_by is None or _position(con.period, study) < _position(target.retire_by, study):
            target.retire_by = con.period


def coal_subcategories(
    scenario: Scenario, system: ValidatedSystem, retirements: Mapping[str, Period | str | None]
) -> dict[str, CoalSubcategory]:
    """Subcategory of every existing steam cluster and of its retrofit variants.

    The retirement used is the earlier of the cluster's planned retirement
    and the economic one supplied in ``retirements``.
    """
    out: dict[str, CoalSubcategory] = {}
    for c in system.clusters:
        if c.tech_class in (TechClass.CoalSteam, TechClass.OilGasSteam) and c.vintage == EXISTING and not c.is_retrofit:
            ret = retirements.get(c.id)
            if isinstance(ret, str):
                ret = system.period[ret]
            if c.planned_retirement is not None:
                planned = system.period[c.planned_retirement]
                if ret is None or planned.calendar_anchor < ret.calendar_anchor:
                    ret = planned
            out[c.id] = classify_coal_subcategory(c, ret, scenario.coal_classification)
    for c in system.clusters:
        if c.is_retrofit:
            root = system.root_of(c.id)
            if root in out:
                out[c.id] = out[root]
    return out


def compile_scenario(
    scenario: Scenario,
    system: ValidatedSystem,
    period: Period | str,
    retirements: Mapping[str, Period | str | None] | None = None,
) -> ConstraintSet:
    label = period if isinstance(period, str) else period.label
    if label not in system.period:
        raise UnknownPeriod(label)
    period = system.period[label]
    study = system.periods
    for rule in scenario.rules:
        if rule.effective_from not in system.period:
            raise UnknownPeriod(rule.effective_from)
        for pw in rule.pathways:
            for con in pw.constraints:
                if isinstance(con, MinFuelHeatShare) and con.fuel not in system.fuel:
                    raise RuleReferencesUnknownFuel(f"rule {rule.id!r} references fuel {con.fuel!r}")
                if isinstance(con, MustRetireBy) and con.period not in system.period:
                    raise UnknownPeriod(con.period)

    cap = None
    if scenario.co2_cap is not None and label in scenario.co2_cap:
        cap = scenario.co2_cap[label]
    cs = ConstraintSet(period=label, co2_cap=cap, tax_credits=scenario.tax_credits)
    needs_classes = any(r.retirement_classes is not None for r in scenario.rules)
    subcats = coal_subcategories(scenario, system, retirements or {}) if needs_classes else {}
    cs.subcategories = subcats
    for cluster in system.clusters:
        root = system.cluster[system.root_of(cluster.id)]
        nameplate = root.capacity if cluster.is_retrofit else cluster.capacity
        entry = ClusterConstraints()
        for rule in scenario.rules:
            if not applicable(rule, cluster, period, study, subcats.get(cluster.id), nameplate):
                continue
            pw = select_pathway(rule, cluster, system)
            if pw is None:
                continue
            for con in pw.constraints:
                _merge(entry, con, cluster, system, study)
            entry.sources.append(f"{rule.id}/{pw.name}")
        if not entry.is_empty():
            cs.clusters[cluster.id] = entry
    return cs
