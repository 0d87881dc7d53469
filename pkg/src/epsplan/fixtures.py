"""Small synthetic systems used by the tests, the acceptance study and the CLI demo.

The two-zone system has six generator clusters: an existing coal unit and
its gas co-fire retrofit plus a new-build combined cycle in zone A, and an
existing combined cycle, a new combined cycle with capture and new onshore
wind in zone B.  One line joins the zones.  Time is three representative
weeks at a configurable step length.
"""
from __future__ import annotations

import numpy as np

from .system import (
    DEFAULT_EMISSION_FACTORS,
    EXISTING,
    NEW_BUILD,
    Fuel,
    GeneratorCluster,
    Period,
    SystemSpec,
    TechClass,
    TimeStructure,
    TransmissionLine,
    Zone,
)

T = TechClass
GAS_PRICES = {"low": 2.8, "ref": 3.9, "high": 5.9}
STUDY_PERIODS = (
    Period("2025", 3, 2025, 1.00),
    Period("2030", 5, 2030, 1.05),
    Period("2035", 5, 2035, 1.10),
    Period("2040", 5, 2040, 1.15),
)


def representative_weeks(n_weeks: int = 3, step_hours: int = 1) -> TimeStructure:
    if 168 % step_hours:
        raise ValueError("step_hours must divide 168")
    per_week = 168 // step_hours
    n = n_weeks * per_week
    return TimeStructure(
        weights=np.full(n, 8760.0 / n),
        segments=(per_week,) * n_weeks,
        durations=np.full(n, float(step_hours)),
    )


def _profiles(time: TimeStructure, seed: int = 7) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Demand shapes for the two zones and a wind availability profile."""
    rng = np.random.default_rng(seed)
    step = time.durations
    hour_of_week = np.concatenate([np.cumsum(step[a:b]) - step[a:b] for a, b in time.segment_bounds()])
    week = np.concatenate([np.full(b - a, i) for i, (a, b) in enumerate(time.segment_bounds())])
    hod = hour_of_week % 24
    daily = 0.5 - 0.5 * np.cos(2 * np.pi * (hod - 4) / 24)
    weekend = np.where(hour_of_week >= 120, 0.92, 1.0)
    season = np.array([1.0, 0.85, 1.1])[week % 3]
    shape = season * weekend * (0.7 + 0.3 * daily)
    demand_a = 800.0 * shape
    demand_b = 650.0 * shape * (1.0 + 0.05 * np.sin(2 * np.pi * hod / 24))
    # wind: smooth multi-day weather plus noise, clipped to [0.02, 0.95]
    base = 0.38 + 0.22 * np.sin(2 * np.pi * hour_of_week / 61.0 + week) + 0.1 * np.sin(2 * np.pi * hod / 24 + 2)
    wind = np.clip(base + rng.normal(0.0, 0.05, time.n), 0.02, 0.95)
    return demand_a, demand_b, wind


def two_zone_spec(
    step_hours: int = 4,
    n_weeks: int = 3,
    coal_price: float = 2.0,
    coal_retirement: str | None = "2035",
    h2_price: float = 20.0,
    periods: tuple[Period, ...] = STUDY_PERIODS,
) -> SystemSpec:
    time = representative_weeks(n_weeks, step_hours)
    demand_a, demand_b, wind = _profiles(time)
    gas_prices = {(case, "", p.label): price for case, price in GAS_PRICES.items() for p in periods}
    fuels = (
        Fuel("coal", DEFAULT_EMISSION_FACTORS["coal"], default_price=coal_price),
        Fuel("natural_gas", DEFAULT_EMISSION_FACTORS["natural_gas"], prices=gas_prices, default_price=GAS_PRICES["ref"]),
        Fuel("hydrogen", 0.0, default_price=h2_price, is_hydrogen=True),
    )
    later = [p.label for p in periods]
    retire = coal_retirement if coal_retirement in later else None
    clusters = (
        GeneratorCluster(
            "A.coal", "A", T.CoalSteam, {"coal": 10.0}, capacity=600.0, fixed_om=38000.0, var_om=4.5,
            planned_retirement=retire,
        ),
        GeneratorCluster(
            "A.coal_cofire", "A", T.CoalGasCofire, {"coal": 10.3, "natural_gas": 10.3}, vintage=EXISTING,
            fixed_om=40000.0, var_om=4.8, annuitized_capex=9000.0, retrofit_parents=(("A.coal", 1.0),),
            planned_retirement=retire,
        ),
        GeneratorCluster(
            "A.ngcc_new", "A", T.NewNGCC, {"natural_gas": 6.4, "hydrogen": 6.4}, vintage=NEW_BUILD,
            max_new_capacity=400.0, fixed_om=14000.0, var_om=2.0, annuitized_capex=95000.0,
        ),
        GeneratorCluster(
            "B.ngcc", "B", T.ExistingNGCC, {"natural_gas": 7.3, "hydrogen": 7.3}, capacity=550.0, fixed_om=16000.0, var_om=3.0,
        ),
        GeneratorCluster(
            "B.ngcc_ccs", "B", T.NGCC_CCS, {"natural_gas": 7.8}, vintage=NEW_BUILD, max_new_capacity=500.0,
            capture_rate=0.9, fixed_om=32000.0, var_om=5.5, annuitized_capex=170000.0,
        ),
        GeneratorCluster(
            "B.wind", "B", T.OnshoreWind, vintage=NEW_BUILD, max_new_capacity=600.0, fixed_om=26000.0,
            annuitized_capex=105000.0, availability=wind,
        ),
    )
    zones = (Zone("A", demand_a), Zone("B", demand_b))
    lines = (TransmissionLine("AB", "A", "B", capacity=300.0, max_expansion=400.0, expansion_cost=45000.0, loss_fraction=0.02),)
    return SystemSpec(
        zones=zones,
        fuels=fuels,
        clusters=clusters,
        time=time,
        periods=periods,
        lines=lines,
        baseline_2022_emissions=8.0,
        voll=5000.0,
    )


def cheap_coal_spec(**kw) -> SystemSpec:
    """Variant where coal stays available and undercuts the existing gas fleet.

    At $2.5/MMBtu coal dispatches between new and existing combined cycles,
    so it is the next resource up when new gas output is held down.
    """
    kw.setdefault("coal_price", 2.5)
    kw.setdefault("coal_retirement", None)
    return two_zone_spec(**kw)


def single_zone_spec(demand: float = 1.0, n_steps: int = 24, capacity: float = 10.0, voll: float | None = 5000.0) -> SystemSpec:
    """One zone, one existing gas cluster, flat demand."""
    time = TimeStructure.uniform(n_steps)
    return SystemSpec(
        zones=(Zone("Z", np.full(n_steps, demand)),),
        fuels=(Fuel("natural_gas", DEFAULT_EMISSION_FACTORS["natural_gas"], default_price=3.0),),
        clusters=(GeneratorCluster("Z.gas", "Z", T.ExistingNGCC, {"natural_gas": 7.0}, capacity=capacity, var_om=2.0),),
        time=time,
        periods=(Period("2025", 5, 2025),),
        voll=voll,
    )
