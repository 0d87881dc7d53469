"""Myopic multi-period runs: retirement pre-pass, stage loop, study orchestration.

Cache layout (``cache_dir``)::

    prepass/<sha256>.json   {"key": {...}, "retirements": {cluster: period | null}}

The hash covers the system content, the sensitivity settings and the solver.
"""
from __future__ import annotations

import dataclasses
import enum
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .builder import (
    NO_FUEL,
    BuildOptions,
    StageModel,
    build_stage,
    emission_rate,
    evaluate_emissions,
    initial_carryover,
)
from .policy import ConstraintSet, Scenario, compile_scenario
from .solver import INFEASIBLE, OPTIMAL, LPSolution, Tolerances, solve
from .system import EXISTING, HOURS_PER_YEAR, Period, TechClass, ValidatedSystem

PREPASS_THRESHOLD = 0.01
STEAM_CLASSES = (TechClass.CoalSteam, TechClass.OilGasSteam)


class DriverError(RuntimeError):
    pass


class StageInfeasible(DriverError):
    def __init__(self, scenario: str, period: str, suspected: list[str], status: str = INFEASIBLE):
        self.scenario = scenario
        self.period = period
        self.suspected = suspected
        self.status = status
        names = ", ".join(suspected) if suspected else "no policy row isolated"
        super().__init__(f"scenario {scenario!r}, period {period}: stage is {status}; suspected rows: {names}")


class UnknownScenario(DriverError):
    pass


@dataclass(frozen=True)
class RunOptions:
    solver: str = "embedded"
    use_voll: bool = True
    dispatch_only: bool = False
    cache_dir: str | None = None
    tolerances: Tolerances | None = None


@dataclass(frozen=True)
class CapacityRecord:
    start: float
    new: float = 0.0
    retired: float = 0.0
    retrofit_in: float = 0.0
    retrofit_out: float = 0.0

    @property
    def end(self) -> float:
        return math.fsum((self.start, self.new, -self.retired, -self.retrofit_out, self.retrofit_in))


@dataclass
class StageResult:
    period: str
    years: int
    capacities: dict[str, CapacityRecord]
    # (cluster, fuel) -> annual MWh and MMBtu
    generation: dict[tuple[str, str], float]
    heat_input: dict[tuple[str, str], float]
    # (cluster, fuel) -> tCO2/yr
    emissions_by_source: dict[tuple[str, str], float]
    emissions: float
    costs: dict[str, float]
    objective: float
    capacity_factors: dict[str, float]
    unserved: dict[str, float]
    iterations: int = 0
    policy_rows: dict[str, list[str]] = field(default_factory=dict)
    # hourly detail, kept for audits; not exported
    model: StageModel | None = field(default=None, repr=False, compare=False)
    x: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def end_capacity(self) -> dict[str, float]:
        return {k: r.end for k, r in self.capacities.items()}

    @property
    def total_cost(self) -> float:
        return math.fsum(self.costs.values())


@dataclass
class ScenarioResult:
    scenario: str
    stages: list[StageResult]
    retirements: dict[str, str | None] = field(default_factory=dict)
    co2_cap: dict[str, float] | None = None
    # asset id -> (tech class, zone), for grouping in reports
    assets: dict[str, tuple[str, str]] = field(default_factory=dict)

    def stage(self, label: str) -> StageResult:
        for s in self.stages:
            if s.period == label:
                return s
        raise KeyError(label)


# -- content hashing ----------------------------------------------------
def _canonical(obj: Any) -> Any:
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: _canonical(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, np.ndarray):
        return [repr(float(v)) for v in obj.ravel()]
    if isinstance(obj, Mapping):
        return sorted(([_canonical(k), _canonical(v)] for k, v in obj.items()), key=lambda kv: json.dumps(kv[0]))
    if isinstance(obj, (list, tuple, frozenset, set)):
        items = [_canonical(v) for v in obj]
        if isinstance(obj, (frozenset, set)):
            items.sort(key=json.dumps)
        return items
    if isinstance(obj, float):
        return repr(obj)
    return obj


def content_hash(*objs: Any) -> str:
    text = json.dumps([_canonical(o) for o in objs], sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# -- one stage ----------------------------------------------------------
def _value(x: np.ndarray, col: int | None) -> float:
    return 0.0 if col is None else float(x[col])


def _suspects(lp, model: StageModel, options: RunOptions) -> list[str]:
    names = sorted(model.policy_rows)
    if not names:
        return []
    relaxed = solve(lp.without_rows(names), options.solver, options.tolerances)
    if relaxed.status == INFEASIBLE:
        return []
    found = []
    for name in names:
        if solve(lp.without_rows([name]), options.solver, options.tolerances).status != INFEASIBLE:
            found.append(name)
    return found or names


def summarize_stage(system: ValidatedSystem, model: StageModel, sol: LPSolution, start: Mapping[str, float]) -> StageResult:
    x = sol.x
    w = model.time.weights
    period = model.period
    spec = system.spec

    retro_out: dict[str, list[float]] = {}
    retro_in: dict[str, list[float]] = {}
    for (p, v), col in model.retrofit.items():
        moved = float(x[col])
        retro_out.setdefault(p, []).append(moved)
        retro_in.setdefault(v, []).append(moved * model.ratio[(p, v)])
    caps: dict[str, CapacityRecord] = {}
    for c in spec.clusters:
        caps[c.id] = CapacityRecord(
            start=float(start[c.id]),
            new=_value(x, model.cap_new.get(c.id)),
            retired=_value(x, model.cap_retired.get(c.id)),
            retrofit_in=math.fsum(retro_in.get(c.id, ())),
            retrofit_out=math.fsum(retro_out.get(c.id, ())),
        )
    for s in spec.storage:
        caps[s.id] = CapacityRecord(float(start[s.id]), _value(x, model.st_new.get(s.id)), _value(x, model.st_retired.get(s.id)))
    for e in spec.electrolyzers:
        caps[e.id] = CapacityRecord(float(start[e.id]), _value(x, model.ez_new.get(e.id)))
    for ln in spec.lines:
        caps[ln.id] = CapacityRecord(float(start[ln.id]), _value(x, model.tx_new.get(ln.id)))

    generation, heat, emis = {}, {}, {}
    for (cid, f), cols in model.gen.items():
        c = system.cluster[cid]
        mwh = math.fsum(w * x[cols])
        generation[(cid, f)] = mwh
        heat[(cid, f)] = 0.0 if f == NO_FUEL else mwh * c.heat_rates[f]
        rate = emission_rate(c, f, system)
        emis[(cid, f)] = math.fsum(model.emission_coefs[int(col)] * float(x[col]) for col in cols) if rate else 0.0

    cfs = {}
    for c in spec.clusters:
        energy = math.fsum(v for (cid, _f), v in generation.items() if cid == c.id)
        cfs[c.id] = capacity_factor_value(energy, caps[c.id].end)

    costs = {}
    for comp, terms in model.cost_terms.items():
        costs[comp] = math.fsum([model.cost_constants[comp]] + [k * float(x[col]) for col, k in sorted(terms.items())])
    unserved = {z: math.fsum(w * x[cols]) for z, cols in model.nse.items()}
    return StageResult(
        period=period.label,
        years=period.years_represented,
        capacities=caps,
        generation=generation,
        heat_input=heat,
        emissions_by_source=emis,
        emissions=evaluate_emissions(model.emission_coefs, x),
        costs=costs,
        objective=sol.objective,
        capacity_factors=cfs,
        unserved=unserved,
        iterations=sol.iterations,
        policy_rows=dict(model.policy_rows),
        model=model,
        x=x,
    )


def capacity_factor_value(energy_mwh: float, capacity_mw: float) -> float:
    if capacity_mw <= 1e-9:
        return 0.0
    return energy_mwh / (capacity_mw * HOURS_PER_YEAR)


def build_options(scenario: Scenario, options: RunOptions) -> BuildOptions:
    return BuildOptions(
        fuel_price_case=scenario.fuel_price_case,
        growth_case=scenario.growth_case,
        nuclear_no_retirement=scenario.nuclear_no_retirement,
        use_voll=options.use_voll,
        dispatch_only=options.dispatch_only,
    )


def solve_stage(
    system: ValidatedSystem,
    scenario: Scenario,
    constraints: ConstraintSet,
    carryover: Mapping[str, float],
    options: RunOptions | None = None,
) -> StageResult:
    options = options or RunOptions()
    period = system.period[constraints.period]
    model = build_stage(system, constraints, carryover, period, build_options(scenario, options))
    sol = solve(model.lp, options.solver, options.tolerances)
    if sol.status != OPTIMAL:
        suspects = _suspects(model.lp, model, options) if sol.status == INFEASIBLE else []
        raise StageInfeasible(scenario.name, period.label, suspects, sol.status)
    return summarize_stage(system, model, sol, carryover)


def run_stage(
    system: ValidatedSystem,
    scenario: Scenario,
    period: Period | str,
    carryover: Mapping[str, float],
    retirements: Mapping[str, str | None] | None = None,
    options: RunOptions | None = None,
) -> StageResult:
    constraints = compile_scenario(scenario, system, period, _as_periods(system, retirements))
    return solve_stage(system, scenario, constraints, carryover, options)


def _as_periods(system: ValidatedSystem, retirements: Mapping[str, str | None] | None) -> dict[str, Period | None]:
    return {k: (None if v is None else system.period[v]) for k, v in (retirements or {}).items()}


# -- retirement pre-pass ------------------------------------------------
def steam_roots(system: ValidatedSystem) -> list[str]:
    return [c.id for c in system.clusters if c.tech_class in STEAM_CLASSES and c.vintage == EXISTING and not c.is_retrofit]


def retirements_from_result(system: ValidatedSystem, result: ScenarioResult) -> dict[str, str | None]:
    """First period where a steam unit's family keeps < 1% of its initial capacity."""
    out: dict[str, str | None] = {}
    for root in steam_roots(system):
        initial = system.cluster[root].capacity
        family = [(cid, 1.0) for cid in (root,)]
        family += [(v.id, dict(v.retrofit_parents)[root]) for v in system.clusters if root in dict(v.retrofit_parents)]
        found = None
        for stage in result.stages:
            remaining = math.fsum(stage.capacities[cid].end / ratio for cid, ratio in family)
            if initial <= 0 or remaining < PREPASS_THRESHOLD * initial:
                found = stage.period
                break
        planned = system.cluster[root].planned_retirement
        if planned is not None and (found is None or system.period_index(planned) < system.period_index(found)):
            found = planned
        out[root] = found
    return out


def _prepass_scenario(scenario: Scenario) -> Scenario:
    return Scenario(
        name="No Regulations",
        tax_credits=scenario.tax_credits,
        fuel_price_case=scenario.fuel_price_case,
        growth_case=scenario.growth_case,
        nuclear_no_retirement=scenario.nuclear_no_retirement,
    )


def economic_retirement_prepass(
    system: ValidatedSystem,
    scenario: Scenario | None = None,
    options: RunOptions | None = None,
) -> dict[str, str | None]:
    """Steam-unit retirement periods under the benchmark without rules.

    ``scenario`` supplies only the sensitivity settings.  Results are cached
    on disk when ``options.cache_dir`` is set.
    """
    options = options or RunOptions()
    bench = _prepass_scenario(scenario or Scenario("No Regulations"))
    path = None
    if options.cache_dir:
        key = content_hash(system.spec, bench.sensitivity_key, options.solver, options.use_voll)
        path = Path(options.cache_dir) / "prepass" / f"{key}.json"
        if path.exists():
            return json.loads(path.read_text(encoding="utf-8"))["retirements"]
    result = _run_stages(system, bench, {}, options)
    out = retirements_from_result(system, result)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        doc = {"key": {"sensitivity": repr(bench.sensitivity_key), "solver": options.solver}, "retirements": out}
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(doc, sort_keys=True, indent=1), encoding="utf-8")
        tmp.replace(path)
    return out


# -- scenarios ----------------------------------------------------------
def _run_stages(
    system: ValidatedSystem,
    scenario: Scenario,
    retirements: Mapping[str, str | None],
    options: RunOptions,
) -> ScenarioResult:
    carry = initial_carryover(system)
    stages = []
    as_periods = _as_periods(system, retirements)
    for period in system.periods:
        cs = compile_scenario(scenario, system, period, as_periods)
        stage = solve_stage(system, scenario, cs, carry, options)
        stages.append(stage)
        carry = stage.end_capacity
    cap = dict(scenario.co2_cap) if scenario.co2_cap else None
    return ScenarioResult(scenario.name, stages, dict(retirements), cap, asset_table(system))


def asset_table(system: ValidatedSystem) -> dict[str, tuple[str, str]]:
    spec = system.spec
    out = {c.id: (c.tech_class.value, c.zone) for c in spec.clusters}
    out.update({s.id: (s.tech_class.value, s.zone) for s in spec.storage})
    out.update({e.id: (e.tech_class.value, e.zone) for e in spec.electrolyzers})
    out.update({ln.id: ("Transmission", f"{ln.from_zone}-{ln.to_zone}") for ln in spec.lines})
    return out


def needs_prepass(scenario: Scenario) -> bool:
    return any(r.retirement_classes is not None for r in scenario.rules)


def run_scenario(
    system: ValidatedSystem,
    scenario: Scenario,
    options: RunOptions | None = None,
    retirements: Mapping[str, str | None] | None = None,
) -> ScenarioResult:
    options = options or RunOptions()
    if scenario.co2_cap_from is not None and scenario.co2_cap is None:
        raise DriverError(f"scenario {scenario.name!r} takes its cap from {scenario.co2_cap_from!r}; run it through run_study")
    if retirements is None:
        retirements = economic_retirement_prepass(system, scenario, options) if needs_prepass(scenario) else {}
    return _run_stages(system, scenario, retirements, options)


def cap_from_result(result: ScenarioResult) -> dict[str, float]:
    """Per-period CO2 cap (Mt) equal to a scenario's stage emissions."""
    return {s.period: s.emissions / 1e6 for s in result.stages}


def _run_one(args: tuple) -> ScenarioResult:
    system, scenario, options, retirements = args
    result = run_scenario(system, scenario, options, retirements)
    for s in result.stages:
        s.model = None
        s.x = None
    return result


def run_study(
    system: ValidatedSystem,
    scenarios: Sequence[Scenario],
    options: RunOptions | None = None,
    jobs: int = 1,
    keep_detail: bool = True,
) -> dict[str, ScenarioResult]:
    """Run several scenarios; caps taken from other scenarios are resolved first.

    With ``jobs > 1`` independent scenarios run in worker processes and the
    hourly detail (``model``/``x``) is dropped from their stages.
    """
    options = options or RunOptions()
    by_name = {s.name: s for s in scenarios}
    if len(by_name) != len(scenarios):
        raise DriverError("scenario names must be unique within a study")
    for s in scenarios:
        if s.co2_cap_from is not None and s.co2_cap_from not in by_name:
            raise UnknownScenario(f"{s.name!r} takes its cap from unknown scenario {s.co2_cap_from!r}")

    prepass_cache: dict[tuple, dict[str, str | None]] = {}

    def retirements_for(s: Scenario) -> dict[str, str | None]:
        if not needs_prepass(s):
            return {}
        key = _prepass_scenario(s).sensitivity_key
        if key not in prepass_cache:
            prepass_cache[key] = economic_retirement_prepass(system, s, options)
        return prepass_cache[key]

    results: dict[str, ScenarioResult] = {}
    pending = list(scenarios)
    while pending:
        ready = [s for s in pending if s.co2_cap_from is None or s.co2_cap_from in results]
        if not ready:
            raise DriverError("circular co2_cap_from references")
        batch = []
        for s in ready:
            if s.co2_cap_from is not None and s.co2_cap is None:
                s = replace(s, co2_cap=cap_from_result(results[s.co2_cap_from]))
            batch.append((system, s, options, retirements_for(s)))
        if jobs > 1 and len(batch) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                outs = list(pool.map(_run_one, batch))
        else:
            outs = [run_scenario(*b) for b in batch]
            if not keep_detail:
                for r in outs:
                    for st in r.stages:
                        st.model = None
                        st.x = None
        for s, r in zip(ready, outs):
            results[s.name] = r
        pending = [s for s in pending if s.name not in results]
    return {s.name: results[s.name] for s in scenarios}
