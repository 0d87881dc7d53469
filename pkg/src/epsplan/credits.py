"""Statutory tax credits expressed as LP cost adjustments."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .system import CCS_TECHS, NEW_BUILD, GeneratorCluster, Period, TechClass, ValidatedSystem

PTC = "ptc"
ITC = "itc"

DEFAULT_CREDIT_MODES = {
    TechClass.OnshoreWind.value: PTC,
    TechClass.OffshoreWind.value: PTC,
    TechClass.SolarPV.value: PTC,
    TechClass.Nuclear.value: PTC,
    TechClass.Battery.value: ITC,
}


class InvalidLife(ValueError):
    pass


@dataclass(frozen=True)
class TaxCreditSettings:
    ccs_credit: float = 85.0
    credit_years: int = 12
    asset_life: int = 30
    discount_rate: float = 0.035
    ptc: float = 26.0
    itc_fraction: float = 0.3
    credit_modes: Mapping[str, str] = field(default_factory=lambda: dict(DEFAULT_CREDIT_MODES))
    # existing nuclear may not retire in periods anchored on or before this year
    nuclear_45u_through: int = 2032

    def __post_init__(self) -> None:
        if min(self.ccs_credit, self.ptc, self.discount_rate) < 0:
            raise ValueError("credit rates must be non-negative")
        if not 0.0 <= self.itc_fraction <= 1.0:
            raise ValueError("itc_fraction must lie in [0, 1]")
        if self.asset_life < self.credit_years:
            raise InvalidLife(f"asset_life {self.asset_life} < credit_years {self.credit_years}")
        for mode in self.credit_modes.values():
            if mode not in (PTC, ITC):
                raise ValueError(f"unknown credit mode {mode!r}")

    @property
    def annual_ccs_credit(self) -> float:
        return annuitize_credit(self.ccs_credit, self.credit_years, self.asset_life, self.discount_rate)


def annuity_factor(years: int, rate: float) -> float:
    if rate == 0:
        return float(years)
    return (1.0 - (1.0 + rate) ** -years) / rate


def annuitize_credit(credit: float, credit_years: int, asset_life: int, discount_rate: float) -> float:
    """Level payment over ``asset_life`` with the same NPV as ``credit`` paid for ``credit_years``."""
    if asset_life < credit_years:
        raise InvalidLife(f"asset_life {asset_life} < credit_years {credit_years}")
    if discount_rate <= 0:
        raise ValueError("discount_rate must be positive")
    return credit * annuity_factor(credit_years, discount_rate) / annuity_factor(asset_life, discount_rate)


@dataclass(frozen=True)
class CreditAdjustment:
    # $/MWh subtracted from the variable cost, per fuel burned
    per_mwh: Mapping[str, float] = field(default_factory=dict)
    # $/MWh subtracted regardless of fuel (production credits for fuel-free plants)
    ptc: float = 0.0
    capex_multiplier: float = 1.0
    no_retirement: bool = False

    @property
    def is_zero(self) -> bool:
        return not any(self.per_mwh.values()) and self.ptc == 0 and self.capex_multiplier == 1.0 and not self.no_retirement


def ccs_credit_per_mwh(cluster: GeneratorCluster, fuel: str, emission_factor: float, annual_credit: float) -> float:
    return annual_credit * cluster.heat_rates[fuel] * emission_factor * cluster.capture_rate


def apply_credits(
    cluster: GeneratorCluster,
    settings: TaxCreditSettings,
    period: Period,
    system: ValidatedSystem,
    nuclear_no_retirement: bool = False,
) -> CreditAdjustment:
    per_mwh: dict[str, float] = {}
    if cluster.tech_class in CCS_TECHS and cluster.capture_rate > 0:
        q = settings.annual_ccs_credit
        for f in cluster.allowed_fuels:
            per_mwh[f] = ccs_credit_per_mwh(cluster, f, system.emission_factor(f), q)
    ptc = 0.0
    capex = 1.0
    mode = settings.credit_modes.get(cluster.tech_class.value)
    if cluster.vintage == NEW_BUILD and mode == PTC:
        ptc = settings.ptc
    elif cluster.vintage == NEW_BUILD and mode == ITC:
        capex = 1.0 - settings.itc_fraction
    no_retire = cluster.tech_class == TechClass.Nuclear and cluster.vintage != NEW_BUILD and (
        nuclear_no_retirement or period.calendar_anchor <= settings.nuclear_45u_through
    )
    return CreditAdjustment(per_mwh=per_mwh, ptc=ptc, capex_multiplier=capex, no_retirement=no_retire)
