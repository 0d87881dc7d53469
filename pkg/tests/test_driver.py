from __future__ import annotations

import json
import math
from dataclasses import replace

import pytest

from epsplan.builder import CO2_CAP_ROW, initial_carryover
from epsplan.driver import (
    DriverError,
    RunOptions,
    StageInfeasible,
    UnknownScenario,
    economic_retirement_prepass,
    run_scenario,
    run_stage,
    run_study,
)
from epsplan.fixtures import two_zone_spec
from epsplan.policy import Scenario
from epsplan.scenarios import CO2_CAP, COAL_NEW_GAS, COAL_ONLY, LIBRARY_ORDER, NO_REGULATIONS
from epsplan.system import GeneratorCluster, TechClass, validate_system


@pytest.fixture(scope="module")
def small():
    return validate_system(two_zone_spec(step_hours=8, n_weeks=1))


def test_first_stage_starts_from_initial_capacities(system, study):
    init = initial_carryover(system)
    for res in study.values():
        first = res.stages[0]
        assert {k: r.start for k, r in first.capacities.items()} == init


def test_carryover_is_conserved(study):
    for name, res in study.items():
        assert [s.period for s in res.stages] == ["2025", "2030", "2035", "2040"]
        for a, b in zip(res.stages, res.stages[1:]):
            for k, rec in b.capacities.items():
                assert rec.start == a.capacities[k].end, (name, b.period, k)


def test_capacity_record_identity(study):
    for res in study.values():
        for s in res.stages:
            for rec in s.capacities.values():
                assert rec.end == math.fsum((rec.start, rec.new, -rec.retired, -rec.retrofit_out, rec.retrofit_in))
                assert rec.end >= -1e-9


def test_zero_cap_is_feasible_with_unserved_energy(small):
    s = Scenario("zero", co2_cap={"2025": 0.0})
    st = run_stage(small, s, "2025", initial_carryover(small))
    assert st.emissions == pytest.approx(0.0, abs=1e-6)
    assert math.fsum(st.unserved.values()) > 0


def test_zero_cap_without_voll_names_the_cap_row(small):
    s = Scenario("zero", co2_cap={"2025": 0.0})
    with pytest.raises(StageInfeasible) as info:
        run_stage(small, s, "2025", initial_carryover(small), options=RunOptions(use_voll=False))
    assert info.value.period == "2025"
    assert CO2_CAP_ROW in info.value.suspected
    assert CO2_CAP_ROW in str(info.value)


def test_planned_retirement_dominates():
    system = validate_system(two_zone_spec(step_hours=8, n_weeks=1, coal_retirement="2025", coal_price=0.5))
    assert economic_retirement_prepass(system) == {"A.coal": "2025"}


def test_always_economic_coal_is_absent():
    system = validate_system(two_zone_spec(step_hours=8, n_weeks=1, coal_retirement=None, coal_price=0.5))
    assert economic_retirement_prepass(system) == {"A.coal": None}


def test_prepass_matches_benchmark_run():
    """Economic retirement read off an independent No Regulations run."""
    spec = two_zone_spec(step_hours=8, n_weeks=1, coal_retirement=None, coal_price=3.0)
    # expensive upkeep makes the coal family uneconomic part way through the study
    spec = spec.replace(clusters=tuple(replace(c, fixed_om=c.fixed_om + 82000.0) if c.id.startswith("A.coal") else c
                                       for c in spec.clusters))
    system = validate_system(spec)
    res = run_scenario(system, Scenario(NO_REGULATIONS))
    initial = system.cluster["A.coal"].capacity
    expected = None
    for s in res.stages:
        if s.capacities["A.coal"].end + s.capacities["A.coal_cofire"].end < 0.01 * initial:
            expected = s.period
            break
    assert expected == "2030"
    assert economic_retirement_prepass(system) == {"A.coal": expected}


def test_prepass_cache(small, tmp_path):
    opts = RunOptions(cache_dir=str(tmp_path))
    first = economic_retirement_prepass(small, None, opts)
    files = list((tmp_path / "prepass").glob("*.json"))
    assert len(files) == 1
    doc = json.loads(files[0].read_text())
    assert doc["retirements"] == first
    # a tampered cache entry is what comes back: the pre-pass is not rerun
    doc["retirements"] = {"A.coal": "2040"}
    files[0].write_text(json.dumps(doc))
    assert economic_retirement_prepass(small, None, opts) == {"A.coal": "2040"}
    # another sensitivity gets its own entry
    economic_retirement_prepass(small, Scenario("x", fuel_price_case="high"), opts)
    assert len(list((tmp_path / "prepass").glob("*.json"))) == 2


def test_run_is_deterministic(small, library):
    a = run_scenario(small, library[COAL_NEW_GAS])
    b = run_scenario(small, library[COAL_NEW_GAS])
    assert a == b


def test_parallel_study_matches_serial(small, library):
    names = [NO_REGULATIONS, COAL_ONLY, COAL_NEW_GAS, CO2_CAP]
    serial = run_study(small, [library[n] for n in names])
    parallel = run_study(small, [library[n] for n in names], jobs=2)
    assert list(parallel) == names
    for n in names:
        assert parallel[n] == serial[n]


def test_cap_scenario_takes_emissions_of_reference(small, library):
    res = run_study(small, [library[COAL_NEW_GAS], library[CO2_CAP]])
    ref = res[COAL_NEW_GAS]
    assert res[CO2_CAP].co2_cap == {s.period: s.emissions / 1e6 for s in ref.stages}
    for s in res[CO2_CAP].stages:
        assert s.emissions <= ref.stage(s.period).emissions * (1 + 1e-6) + 1e-6


def test_cap_reference_errors(small, library):
    with pytest.raises(DriverError):
        run_scenario(small, library[CO2_CAP])
    with pytest.raises(UnknownScenario):
        run_study(small, [library[CO2_CAP]])
    with pytest.raises(DriverError):
        run_study(small, [library[NO_REGULATIONS], library[NO_REGULATIONS]])


def test_new_vintage_keeps_rule(study, library):
    """Capacity built before the new-gas rule starts is still capped once it applies."""
    res = study[COAL_NEW_GAS]
    for s in res.stages[2:]:
        cap = s.capacities["A.ngcc_new"].end
        if cap > 0:
            assert s.capacity_factors["A.ngcc_new"] <= 0.4 + 1e-6


def test_stage_costs_add_up(study):
    for res in study.values():
        for s in res.stages:
            assert s.total_cost == pytest.approx(s.objective, rel=1e-6)


def test_library_order_in_study(study):
    assert list(study) == list(LIBRARY_ORDER)


def test_nuclear_no_retirement_flag():
    spec = two_zone_spec(step_hours=8, n_weeks=1)
    nuke = GeneratorCluster("B.nuclear", "B", TechClass.Nuclear, {}, capacity=300.0, fixed_om=900000.0, var_om=2.0)
    system = validate_system(spec.replace(clusters=spec.clusters + (nuke,)))
    base = run_scenario(system, Scenario(NO_REGULATIONS))
    held = run_scenario(system, Scenario(NO_REGULATIONS, nuclear_no_retirement=True))
    # 45U keeps the plant through 2030; afterwards it is uneconomic
    assert [s.capacities["B.nuclear"].retired for s in base.stages[:2]] == [0.0, 0.0]
    assert sum(s.capacities["B.nuclear"].retired for s in base.stages) > 0
    assert all(s.capacities["B.nuclear"].retired == 0.0 for s in held.stages)
    assert held.stages[-1].capacities["B.nuclear"].end == 300.0
