from __future__ import annotations

import csv
import math

import pytest

from epsplan.builder import CO2_CAP_ROW, COST_COMPONENTS, initial_carryover
from epsplan.driver import CapacityRecord, ScenarioResult, StageResult, run_stage
from epsplan.fixtures import single_zone_spec
from epsplan.policy import Scenario
from epsplan.reporting import (
    WINDOW_ACTIVE,
    MismatchedStudies,
    NotDefined,
    ReportingError,
    abatement_cost,
    capacity_factor,
    cf_class,
    comparison_rows,
    compute_emissions,
    export_tables,
    heat_share,
    percent_below_baseline,
    read_stage_summaries,
    stage_summary,
    write_comparison,
)
from epsplan.scenarios import CO2_CAP, COAL_NEW_GAS, NEW_GAS_ONLY, NO_REGULATIONS, slug
from epsplan.system import validate_system

from oracles import emissions_from_tables


def _stage(period="2025", years=5, objective=0.0, emissions=0.0, rows=None, **kw):
    base = dict(
        capacities={}, generation={}, heat_input={}, emissions_by_source={}, costs={c: 0.0 for c in COST_COMPONENTS},
        capacity_factors={}, unserved={},
    )
    base.update(kw)
    return StageResult(period, years, emissions=emissions, objective=objective, policy_rows=rows or {}, **base)


def _result(name, stages):
    return ScenarioResult(name, stages)


# -- emissions ----------------------------------------------------------
def test_single_gas_cluster_emissions():
    system = validate_system(single_zone_spec(demand=1000.0 / 8760.0, n_steps=24))
    st = run_stage(system, Scenario("x"), "2025", initial_carryover(system))
    assert st.generation[("Z.gas", "natural_gas")] == pytest.approx(1000.0, rel=1e-12)
    out = compute_emissions(st)
    assert out["total"] == pytest.approx(371.42, rel=1e-9)
    assert out["by_fuel"]["natural_gas"] == pytest.approx(371.42, rel=1e-9)


def test_zero_dispatch_has_zero_emissions():
    system = validate_system(single_zone_spec(demand=0.0, n_steps=24))
    st = run_stage(system, Scenario("x"), "2025", initial_carryover(system))
    assert compute_emissions(st)["total"] == 0.0


def test_breakdowns_sum_to_total(study):
    for res in study.values():
        for s in res.stages:
            out = compute_emissions(s, res.assets)
            for key in ("by_cluster", "by_fuel", "by_tech", "by_zone"):
                assert math.fsum(out[key].values()) == pytest.approx(out["total"], rel=1e-9, abs=1e-6)


def test_cap_row_activity_equals_reported_emissions(study):
    for s in study[CO2_CAP].stages:
        lp = s.model.lp
        act = lp.activities(s.x)[lp.row(CO2_CAP_ROW)]
        assert act == pytest.approx(s.emissions, rel=1e-12, abs=1e-6)
        assert s.emissions <= lp.rhs[lp.row(CO2_CAP_ROW)] * (1 + 1e-9) + 1e-6


def test_exported_tables_match_independent_accounting(spec, study, tmp_path):
    for name in (NO_REGULATIONS, COAL_NEW_GAS, "CCS + H2"):
        out = tmp_path / slug(name)
        export_tables(study[name], out)
        recomputed = emissions_from_tables(out, spec)
        for s in study[name].stages:
            assert recomputed[s.period] == pytest.approx(s.emissions, rel=1e-9, abs=1e-6)


# -- capacity factors ---------------------------------------------------
def test_capacity_factor_examples():
    st = _stage(capacities={"g": CapacityRecord(1.0)}, generation={("g", "natural_gas"): 3504.0})
    assert capacity_factor("g", st) == pytest.approx(0.40)
    empty = _stage(capacities={"g": CapacityRecord(0.0)}, generation={("g", "natural_gas"): 0.0})
    assert capacity_factor("g", empty) == 0.0


def test_cf_classes():
    assert cf_class(0.1) == "peaker"
    assert cf_class(0.2) == "peaker"
    assert cf_class(0.3) == "non-baseload"
    assert cf_class(0.4) == "non-baseload"
    assert cf_class(0.41) == "baseload"


def test_heat_share():
    st = _stage(heat_input={("c", "coal"): 60.0, ("c", "natural_gas"): 40.0})
    assert heat_share("c", "natural_gas", st) == pytest.approx(0.4)
    assert heat_share("x", "natural_gas", st) is None


# -- abatement ----------------------------------------------------------
def _pair(dcost, demis, periods=("2025", "2030")):
    ref = _result("ref", [_stage(p, 5, objective=10e9, emissions=500e6) for p in periods])
    res = _result("res", [_stage(p, 5, objective=10e9 + dcost, emissions=500e6 - demis) for p in periods])
    return res, ref


def test_abatement_anchor():
    res, ref = _pair(1.7e9, 100e6)
    assert abatement_cost(res, ref) == pytest.approx(17.0)


def test_identical_scenarios_not_defined():
    res, ref = _pair(0.0, 0.0)
    out = abatement_cost(res, ref)
    assert isinstance(out, NotDefined)
    assert str(out) == "NotDefined"


def test_emission_increase_not_defined():
    res, ref = _pair(1e9, -50e6)
    out = abatement_cost(res, ref)
    assert isinstance(out, NotDefined)
    assert "rise" in out.reason


def test_abatement_sign_and_antisymmetry():
    res, ref = _pair(-2e9, 100e6)
    assert abatement_cost(res, ref) == pytest.approx(-20.0)
    # swapped: the numerator flips sign; the denominator turns negative so the value is not defined
    swapped = abatement_cost(ref, res)
    assert isinstance(swapped, NotDefined)
    num_fwd = sum(s.years * (s.objective - r.objective) for s, r in zip(res.stages, ref.stages))
    num_back = sum(r.years * (r.objective - s.objective) for s, r in zip(res.stages, ref.stages))
    assert num_fwd == -num_back


def test_abatement_weights_by_years():
    ref = _result("ref", [_stage("a", 3, 0.0, 100.0), _stage("b", 5, 0.0, 100.0)])
    res = _result("res", [_stage("a", 3, 30.0, 90.0), _stage("b", 5, 10.0, 99.0)])
    assert abatement_cost(res, ref) == pytest.approx((3 * 30 + 5 * 10) / (3 * 10 + 5 * 1))


def test_active_window():
    ref = _result("ref", [_stage("a", 5, 0.0, 100.0), _stage("b", 5, 0.0, 100.0)])
    res = _result("res", [_stage("a", 5, 50.0, 100.0), _stage("b", 5, 10.0, 90.0, rows={"policy.cf[x]": ["r"]})])
    assert abatement_cost(res, ref) == pytest.approx(6.0)
    assert abatement_cost(res, ref, WINDOW_ACTIVE) == pytest.approx(1.0)
    with pytest.raises(ReportingError):
        abatement_cost(res, ref, "sometimes")


def test_mismatched_studies():
    ref = _result("ref", [_stage("a", 5)])
    res = _result("res", [_stage("b", 5)])
    with pytest.raises(MismatchedStudies):
        abatement_cost(res, ref)


def test_percent_below_baseline():
    assert percent_below_baseline(_result("r", [_stage("p", emissions=49e6)]), 100.0, "p") == pytest.approx(0.51)
    assert percent_below_baseline(_result("r", [_stage("p", emissions=100e6)]), 100.0, "p") == 0.0
    assert percent_below_baseline(_result("r", [_stage("p", emissions=0.0)]), 100.0, "p") == 1.0
    with pytest.raises(ReportingError):
        percent_below_baseline(_result("r", [_stage("p")]), 0.0, "p")


def test_emission_increase_reported_in_comparison():
    ref = _result(NO_REGULATIONS, [_stage("a", 5, 0.0, 100.0)])
    worse = _result(NEW_GAS_ONLY, [_stage("a", 5, -5.0, 110.0)])
    better = _result(COAL_NEW_GAS, [_stage("a", 5, 20.0, 90.0)])
    rows = comparison_rows({r.scenario: r for r in (ref, worse, better)}, references=(NO_REGULATIONS,))
    by = {r[0]: r for r in rows}
    assert by[NEW_GAS_ONLY][7] == "NotDefined"
    assert by[NEW_GAS_ONLY][8] == "emissions rise relative to the reference"
    assert by[COAL_NEW_GAS][7] == pytest.approx(2.0)


# -- exports ------------------------------------------------------------
def test_empty_result_gives_header_only_files(tmp_path):
    paths = export_tables(ScenarioResult("empty", []), tmp_path)
    assert len(paths) == 7
    for p in paths:
        lines = p.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 1 and lines[0]


def test_round_trip_summaries(study, tmp_path):
    for name in (NO_REGULATIONS, COAL_NEW_GAS, CO2_CAP):
        export_tables(study[name], tmp_path / slug(name))
        back = read_stage_summaries(tmp_path / slug(name))
        assert back == [stage_summary(s) for s in study[name].stages]


def test_export_is_byte_stable(study, tmp_path):
    a = export_tables(study[COAL_NEW_GAS], tmp_path / "a")
    b = export_tables(study[COAL_NEW_GAS], tmp_path / "b")
    for x, y in zip(a, b):
        assert x.read_bytes() == y.read_bytes()


def test_gas_subgroups_cover_gas_generation(study, tmp_path):
    res = study["Coal + All Gas"]
    export_tables(res, tmp_path)
    with (tmp_path / "gas_subgroups.csv").open(encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    gas_techs = {"NewNGCC", "NGCC_CCS", "ExistingNGCC"}
    for s in res.stages:
        expected = math.fsum(v for (cid, _f), v in s.generation.items() if res.assets[cid][0] in gas_techs)
        got = math.fsum(float(r["generation_mwh"]) for r in rows if r["period"] == s.period)
        assert got == pytest.approx(expected, rel=1e-12, abs=1e-6)
        assert {r["cf_class"] for r in rows} <= {"peaker", "non-baseload", "baseload"}


def test_comparison_table(study, tmp_path):
    path = write_comparison({k: study[k] for k in (NO_REGULATIONS, COAL_NEW_GAS)}, tmp_path / "cmp.csv")
    with path.open(encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    assert [(r["scenario"], r["reference"]) for r in rows] == [(COAL_NEW_GAS, NO_REGULATIONS)]
    assert float(rows[0]["abatement_cost"]) == pytest.approx(abatement_cost(study[COAL_NEW_GAS], study[NO_REGULATIONS]))
