"""Emissions and cost accounting, abatement costs and delimited-table exports.

Exported files (UTF-8, comma separated, one header row, floats written with
``repr`` so they re-import exactly):

  stages.csv          scenario, period, years, objective, one column per cost
                      component, total_cost, emissions_t, unserved_mwh,
                      policy_rows (count of policy rows in the stage LP)
  capacity.csv        scenario, period, asset, tech, zone, start, new, retired,
                      retrofit_in, retrofit_out, end, capacity_factor
  generation.csv      scenario, period, cluster, tech, zone, fuel,
                      generation_mwh, heat_input_mmbtu, emissions_t
  capacity_by_tech.csv, generation_by_tech.csv, emissions_by_tech.csv
                      scenario, period, tech, value
  gas_subgroups.csv   scenario, period, subgroup, cf_class, capacity_mw,
                      generation_mwh, emissions_t
  comparison.csv      written by ``write_comparison`` for several scenarios
"""
from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .builder import COST_COMPONENTS
from .driver import ScenarioResult, StageResult, capacity_factor_value
from .system import TechClass

T = TechClass
WINDOW_ALL = "all"
WINDOW_ACTIVE = "active"
PEAKER_CF = 0.20
BASELOAD_CF = 0.40

GAS_SUBGROUPS = {
    T.NewNGCC.value: "New NGCC",
    T.NGCC_CCS.value: "New NGCC-CCS",
    T.NewNGCT.value: "New NGCT",
    T.ExistingNGCC.value: "Existing NGCC",
    T.ExistingNGCT.value: "Existing NGCT",
    T.GasCCSRetrofit.value: "Existing gas CCS retrofit",
    T.H2Turbine.value: "H2 turbine",
}


class ReportingError(ValueError):
    pass


class MismatchedStudies(ReportingError):
    pass


@dataclass(frozen=True)
class NotDefined:
    """Abatement cost without a meaningful value; ``reason`` says why."""

    reason: str

    def __str__(self) -> str:
        return "NotDefined"


# -- accounting ---------------------------------------------------------
def compute_emissions(stage: StageResult, assets: Mapping[str, tuple[str, str]] | None = None) -> dict:
    """Stage emissions (tCO2/yr), total plus breakdowns by cluster, fuel, tech and zone."""
    by_cluster: dict[str, list[float]] = defaultdict(list)
    by_fuel: dict[str, list[float]] = defaultdict(list)
    for (cid, fuel), v in sorted(stage.emissions_by_source.items()):
        by_cluster[cid].append(v)
        by_fuel[fuel].append(v)
    out = {
        "total": stage.emissions,
        "by_cluster": {k: math.fsum(v) for k, v in by_cluster.items()},
        "by_fuel": {k: math.fsum(v) for k, v in by_fuel.items()},
    }
    if assets is not None:
        by_tech: dict[str, list[float]] = defaultdict(list)
        by_zone: dict[str, list[float]] = defaultdict(list)
        for cid, v in out["by_cluster"].items():
            tech, zone = assets[cid]
            by_tech[tech].append(v)
            by_zone[zone].append(v)
        out["by_tech"] = {k: math.fsum(v) for k, v in sorted(by_tech.items())}
        out["by_zone"] = {k: math.fsum(v) for k, v in sorted(by_zone.items())}
    return out


def capacity_factor(cluster: str, stage: StageResult) -> float:
    energy = math.fsum(v for (cid, _f), v in stage.generation.items() if cid == cluster)
    return capacity_factor_value(energy, stage.capacities[cluster].end)


def heat_share(cluster: str, fuel: str, stage: StageResult) -> float | None:
    """Annual heat-input share of ``fuel``; ``None`` when the cluster burned nothing."""
    parts = {f: v for (cid, f), v in stage.heat_input.items() if cid == cluster}
    total = math.fsum(parts.values())
    if total <= 0:
        return None
    return parts.get(fuel, 0.0) / total


def cf_class(cf: float) -> str:
    if cf <= PEAKER_CF:
        return "peaker"
    if cf <= BASELOAD_CF:
        return "non-baseload"
    return "baseload"


def _check_pair(result: ScenarioResult, reference: ScenarioResult) -> None:
    a = [(s.period, s.years) for s in result.stages]
    b = [(s.period, s.years) for s in reference.stages]
    if a != b:
        raise MismatchedStudies(f"{result.scenario!r} and {reference.scenario!r} cover different periods")


def active_periods(result: ScenarioResult, reference: ScenarioResult) -> list[str]:
    """Periods in which either scenario carries a policy row."""
    return [s.period for s, r in zip(result.stages, reference.stages) if s.policy_rows or r.policy_rows]


def abatement_cost(
    result: ScenarioResult, reference: ScenarioResult, window: str = WINDOW_ALL
) -> float | NotDefined:
    """Years-weighted cost increase over years-weighted emission cut, $/tCO2."""
    _check_pair(result, reference)
    if window not in (WINDOW_ALL, WINDOW_ACTIVE):
        raise ReportingError(f"unknown abatement window {window!r}")
    keep = None if window == WINDOW_ALL else set(active_periods(result, reference))
    num, den = [], []
    for s, r in zip(result.stages, reference.stages):
        if keep is not None and s.period not in keep:
            continue
        num.append(s.years * (s.objective - r.objective))
        den.append(s.years * (r.emissions - s.emissions))
    numerator, denominator = math.fsum(num), math.fsum(den)
    if denominator == 0:
        return NotDefined("no change in emissions")
    if denominator < 0:
        return NotDefined("emissions rise relative to the reference")
    return numerator / denominator


def percent_below_baseline(result: ScenarioResult, baseline_2022: float, period: str) -> float:
    """Fractional reduction of period emissions below a baseline given in MtCO2."""
    if not baseline_2022 > 0:
        raise ReportingError("baseline must be positive")
    return (baseline_2022 - result.stage(period).emissions / 1e6) / baseline_2022


def weighted_total(result: ScenarioResult, attr: str) -> float:
    return math.fsum(s.years * getattr(s, attr) for s in result.stages)


# -- exports ------------------------------------------------------------
STAGE_COLUMNS = [
    "scenario", "period", "years", "objective", *COST_COMPONENTS, "total_cost", "emissions_t", "unserved_mwh",
    "policy_rows",
]
CAPACITY_COLUMNS = [
    "scenario", "period", "asset", "tech", "zone", "start", "new", "retired",
    "retrofit_in", "retrofit_out", "end", "capacity_factor",
]
GENERATION_COLUMNS = [
    "scenario", "period", "cluster", "tech", "zone", "fuel", "generation_mwh", "heat_input_mmbtu", "emissions_t",
]
BY_TECH_COLUMNS = ["scenario", "period", "tech", "value"]
GAS_COLUMNS = ["scenario", "period", "subgroup", "cf_class", "capacity_mw", "generation_mwh", "emissions_t"]
COMPARISON_COLUMNS = [
    "scenario", "reference", "window", "weighted_cost", "weighted_emissions_t",
    "delta_cost", "delta_emissions_t", "abatement_cost", "note",
]


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write(path: Path, columns: Sequence[str], rows: Iterable[Sequence]) -> Path:
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _cluster_ids(stage: StageResult) -> list[str]:
    return [k for k in stage.capacities if k in stage.capacity_factors]


def export_tables(result: ScenarioResult, directory: str | Path) -> list[Path]:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    name = result.scenario
    assets = result.assets

    def meta(asset: str) -> tuple[str, str]:
        return assets.get(asset, ("", ""))

    stage_rows, cap_rows, gen_rows, gas_rows = [], [], [], []
    cap_tech, gen_tech, emis_tech = [], [], []
    for s in result.stages:
        stage_rows.append(
            [name, s.period, s.years, s.objective, *(s.costs[c] for c in COST_COMPONENTS), s.total_cost,
             s.emissions, math.fsum(s.unserved.values()), len(s.policy_rows)]
        )
        ct: dict[str, list[float]] = defaultdict(list)
        for asset, rec in s.capacities.items():
            tech, zone = meta(asset)
            cf = s.capacity_factors.get(asset, "")
            cap_rows.append([name, s.period, asset, tech, zone, rec.start, rec.new, rec.retired,
                             rec.retrofit_in, rec.retrofit_out, rec.end, cf])
            if asset in s.capacity_factors:
                ct[tech].append(rec.end)
        gt: dict[str, list[float]] = defaultdict(list)
        et: dict[str, list[float]] = defaultdict(list)
        for (cid, fuel), mwh in s.generation.items():
            tech, zone = meta(cid)
            e = s.emissions_by_source[(cid, fuel)]
            gen_rows.append([name, s.period, cid, tech, zone, fuel, mwh, s.heat_input[(cid, fuel)], e])
            gt[tech].append(mwh)
            et[tech].append(e)
        cap_tech += [[name, s.period, t, math.fsum(v)] for t, v in sorted(ct.items())]
        gen_tech += [[name, s.period, t, math.fsum(v)] for t, v in sorted(gt.items())]
        emis_tech += [[name, s.period, t, math.fsum(v)] for t, v in sorted(et.items())]

        groups: dict[tuple[str, str], list[list[float]]] = defaultdict(lambda: [[], [], []])
        for cid in _cluster_ids(s):
            tech, _zone = meta(cid)
            if tech not in GAS_SUBGROUPS:
                continue
            g = groups[(GAS_SUBGROUPS[tech], cf_class(s.capacity_factors[cid]))]
            g[0].append(s.capacities[cid].end)
            g[1].extend(v for (k, _f), v in s.generation.items() if k == cid)
            g[2].extend(v for (k, _f), v in s.emissions_by_source.items() if k == cid)
        for (sub, cls), (cap, gen, em) in sorted(groups.items()):
            gas_rows.append([name, s.period, sub, cls, math.fsum(cap), math.fsum(gen), math.fsum(em)])

    return [
        _write(out / "stages.csv", STAGE_COLUMNS, stage_rows),
        _write(out / "capacity.csv", CAPACITY_COLUMNS, cap_rows),
        _write(out / "generation.csv", GENERATION_COLUMNS, gen_rows),
        _write(out / "capacity_by_tech.csv", BY_TECH_COLUMNS, cap_tech),
        _write(out / "generation_by_tech.csv", BY_TECH_COLUMNS, gen_tech),
        _write(out / "emissions_by_tech.csv", BY_TECH_COLUMNS, emis_tech),
        _write(out / "gas_subgroups.csv", GAS_COLUMNS, gas_rows),
    ]


def read_stage_summaries(directory: str | Path) -> list[dict]:
    """Re-import ``stages.csv`` and ``capacity.csv`` into plain dictionaries."""
    directory = Path(directory)
    stages: dict[str, dict] = {}
    with (directory / "stages.csv").open(encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            stages[row["period"]] = {
                "period": row["period"],
                "years": int(row["years"]),
                "objective": float(row["objective"]),
                "costs": {c: float(row[c]) for c in COST_COMPONENTS},
                "emissions": float(row["emissions_t"]),
                "unserved": float(row["unserved_mwh"]),
                "capacities": {},
            }
    with (directory / "capacity.csv").open(encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            stages[row["period"]]["capacities"][row["asset"]] = tuple(
                float(row[k]) for k in ("start", "new", "retired", "retrofit_in", "retrofit_out", "end")
            )
    return list(stages.values())


def stage_summary(stage: StageResult) -> dict:
    """The in-memory counterpart of one ``read_stage_summaries`` record."""
    return {
        "period": stage.period,
        "years": stage.years,
        "objective": stage.objective,
        "costs": dict(stage.costs),
        "emissions": stage.emissions,
        "unserved": math.fsum(stage.unserved.values()),
        "capacities": {
            k: (r.start, r.new, r.retired, r.retrofit_in, r.retrofit_out, r.end) for k, r in stage.capacities.items()
        },
    }


def comparison_rows(
    results: Mapping[str, ScenarioResult],
    references: Sequence[str] = ("No Regulations", "Coal Only"),
    window: str = WINDOW_ALL,
) -> list[list]:
    rows = []
    for name, res in results.items():
        for ref_name in references:
            ref = results.get(ref_name)
            if ref is None or ref_name == name:
                continue
            cost = weighted_total(res, "objective")
            emis = weighted_total(res, "emissions")
            ac = abatement_cost(res, ref, window)
            note = ac.reason if isinstance(ac, NotDefined) else ""
            rows.append([
                name, ref_name, window, cost, emis,
                cost - weighted_total(ref, "objective"), emis - weighted_total(ref, "emissions"),
                str(ac) if isinstance(ac, NotDefined) else ac, note,
            ])
    return rows


def write_comparison(
    results: Mapping[str, ScenarioResult],
    path: str | Path,
    references: Sequence[str] = ("No Regulations", "Coal Only"),
    window: str = WINDOW_ALL,
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return _write(path, COMPARISON_COLUMNS, comparison_rows(results, references, window))
