from __future__ import annotations

import itertools

import pytest

from epsplan.fixtures import STUDY_PERIODS
from epsplan.policy import (
    CoalSubcategory,
    MaxCapacityFactor,
    MinFuelHeatShare,
    MustRetireBy,
    NotCoal,
    Pathway,
    PolicyError,
    PolicyRule,
    RuleReferencesUnknownFuel,
    Scenario,
    applicable,
    classify_coal_subcategory,
    compile_scenario,
)
from epsplan.scenarios import (
    CCS_H2,
    CCS_ONLY,
    COAL_NEW_GAS,
    LIBRARY_ORDER,
    NO_REGULATIONS,
    PROPOSED_RULES,
    existing_gas_rule,
    new_gas_rule,
)
from epsplan.system import GeneratorCluster, Period, TechClass, UnknownPeriod

T = TechClass
S = CoalSubcategory
P = {p.label: p for p in STUDY_PERIODS}
COAL = GeneratorCluster("c", "A", T.CoalSteam, {"coal": 10.0}, capacity=600.0)


def test_classify_examples():
    assert classify_coal_subcategory(COAL, P["2030"]) is S.RetireBefore2032_Unconstrained
    assert classify_coal_subcategory(COAL, Period("2037", 5, 2037)) is S.RetireBefore2039_Cofire40From2030
    assert classify_coal_subcategory(COAL, None) is S.OperatePast2039_CCSFrom2032


def test_classify_boundaries():
    assert classify_coal_subcategory(COAL, Period("x", 1, 2032)) is S.RetireBefore2032_Unconstrained
    assert classify_coal_subcategory(COAL, Period("x", 1, 2039)) is S.RetireBefore2039_Cofire40From2030
    assert classify_coal_subcategory(COAL, P["2040"]) is S.OperatePast2039_CCSFrom2032
    assert classify_coal_subcategory(COAL, P["2035"], "proposed") is S.RetireBefore2035_CF20
    assert classify_coal_subcategory(COAL, P["2035"]) is S.RetireBefore2039_Cofire40From2030


def test_classify_rejects_non_coal():
    gas = GeneratorCluster("g", "A", T.ExistingNGCC, {"natural_gas": 7.0}, capacity=100.0)
    with pytest.raises(NotCoal):
        classify_coal_subcategory(gas, None)


def test_classify_is_total_over_anchors():
    seen = {classify_coal_subcategory(COAL, Period("x", 1, y)) for y in range(2020, 2060)}
    assert seen | {classify_coal_subcategory(COAL, None)} == {
        S.RetireBefore2032_Unconstrained, S.RetireBefore2039_Cofire40From2030, S.OperatePast2039_CCSFrom2032,
    }


def test_applicable_size_threshold():
    rule = existing_gas_rule("existing-gas", 300.0, (Pathway("cf", (MaxCapacityFactor(0.4),)),))
    small = GeneratorCluster("g", "A", T.ExistingNGCC, {"natural_gas": 7.0}, capacity=250.0)
    large = GeneratorCluster("g", "A", T.ExistingNGCC, {"natural_gas": 7.0}, capacity=350.0)
    assert not applicable(rule, small, P["2040"], STUDY_PERIODS)
    assert applicable(rule, large, P["2040"], STUDY_PERIODS)
    # exactly at the threshold is not above it
    assert not applicable(rule, small, P["2040"], STUDY_PERIODS, nameplate=300.0)


def test_applicable_effective_date_and_tech():
    rule = new_gas_rule()
    ngcc = GeneratorCluster("n", "A", T.NewNGCC, {"natural_gas": 6.4}, vintage="NewBuild", max_new_capacity=100.0)
    assert not applicable(rule, ngcc, P["2030"], STUDY_PERIODS)
    assert applicable(rule, ngcc, P["2035"], STUDY_PERIODS)
    wind = GeneratorCluster("w", "A", T.OnshoreWind, vintage="NewBuild")
    coal_rule = PolicyRule("coal", "2030", (Pathway("p", (MaxCapacityFactor(0.4),)),), {T.CoalSteam})
    assert not applicable(coal_rule, wind, P["2040"], STUDY_PERIODS)


def test_compile_examples(system, library):
    cs = compile_scenario(library[COAL_NEW_GAS], system, "2040", {"A.coal": "2035"})
    assert cs.clusters["A.ngcc_new"].max_cf == 0.4
    assert "B.ngcc_ccs" not in cs.clusters

    cs = compile_scenario(library[CCS_ONLY], system, "2035", {"A.coal": "2035"})
    assert cs.clusters["A.ngcc_new"].max_cf == 0.2
    assert cs.clusters["B.ngcc"].max_cf == 0.2
    assert "B.ngcc_ccs" not in cs.clusters

    cs = compile_scenario(library[CCS_H2], system, "2040", {"A.coal": "2035"})
    for cid in ("A.ngcc_new", "B.ngcc"):
        assert cs.clusters[cid].max_cf == 0.2
        assert cs.clusters[cid].min_shares == {"hydrogen": 0.3}


def test_no_regulations_is_empty(system, library):
    for p in system.periods:
        cs = compile_scenario(library[NO_REGULATIONS], system, p)
        assert cs.is_empty()
        assert cs.tax_credits == library[NO_REGULATIONS].tax_credits


def test_cofire_from_2030(system, library):
    assert "A.coal_cofire" not in compile_scenario(library[COAL_NEW_GAS], system, "2025", {}).clusters
    cs = compile_scenario(library[COAL_NEW_GAS], system, "2030", {})
    assert cs.clusters["A.coal_cofire"].min_shares == {"natural_gas": 0.4}
    assert cs.subcategories["A.coal"] is S.RetireBefore2039_Cofire40From2030


def test_economic_retirement_changes_subcategory(system, library):
    cs = compile_scenario(library[COAL_NEW_GAS], system, "2030", {"A.coal": "2030"})
    assert cs.subcategories["A.coal"] is S.RetireBefore2032_Unconstrained
    assert "A.coal_cofire" not in cs.clusters


def test_proposed_rules_use_half_baseload(system, library):
    cs = compile_scenario(library[PROPOSED_RULES], system, "2040", {"A.coal": "2035"})
    assert cs.clusters["A.ngcc_new"].max_cf == 0.5
    assert cs.clusters["A.ngcc_new"].min_shares == {"hydrogen": 0.3}
    assert cs.subcategories["A.coal"] is S.RetireBefore2035_CF20


def test_compilation_is_monotone(system, library):
    names = list(LIBRARY_ORDER)
    checked = 0
    for a, b in itertools.permutations(names, 2):
        ra, rb = set(library[a].rules), set(library[b].rules)
        if not ra or not ra <= rb or library[a].coal_classification != library[b].coal_classification:
            continue
        for p in system.periods:
            csa = compile_scenario(library[a], system, p, {"A.coal": "2035"})
            csb = compile_scenario(library[b], system, p, {"A.coal": "2035"})
            assert csb.implies(csa, system.periods), (a, b, p.label)
            checked += 1
    assert checked >= 20


def test_conflicting_retire_by_takes_earliest(system):
    late = PolicyRule("late", "2025", (Pathway("r", (MustRetireBy("2040"),)),), {T.ExistingNGCC})
    early = PolicyRule("early", "2025", (Pathway("r", (MustRetireBy("2030"),)),), {T.ExistingNGCC})
    for rules in ((late, early), (early, late)):
        cs = compile_scenario(Scenario("x", rules), system, "2025")
        assert cs.clusters["B.ngcc"].retire_by == "2030"


def test_tighter_parameters_win(system):
    a = PolicyRule("a", "2025", (Pathway("p", (MaxCapacityFactor(0.5), MinFuelHeatShare("hydrogen", 0.1))),),
                   {T.ExistingNGCC})
    b = PolicyRule("b", "2025", (Pathway("p", (MaxCapacityFactor(0.3), MinFuelHeatShare("hydrogen", 0.2))),),
                   {T.ExistingNGCC})
    c = compile_scenario(Scenario("x", (a, b)), system, "2025").clusters["B.ngcc"]
    assert c.max_cf == 0.3
    assert c.min_shares == {"hydrogen": 0.2}
    assert c.sources == ["a/p", "b/p"]


def test_compile_errors(system):
    with pytest.raises(UnknownPeriod):
        compile_scenario(Scenario("x"), system, "2099")
    bad_fuel = PolicyRule("f", "2025", (Pathway("p", (MinFuelHeatShare("ammonia", 0.2),)),), {T.ExistingNGCC})
    with pytest.raises(RuleReferencesUnknownFuel):
        compile_scenario(Scenario("x", (bad_fuel,)), system, "2025")
    bad_date = PolicyRule("d", "2099", (Pathway("p", (MaxCapacityFactor(0.2),)),), {T.ExistingNGCC})
    with pytest.raises(UnknownPeriod):
        compile_scenario(Scenario("x", (bad_date,)), system, "2025")


def test_parameter_ranges():
    with pytest.raises(PolicyError):
        MaxCapacityFactor(1.2)
    with pytest.raises(PolicyError):
        MinFuelHeatShare("natural_gas", -0.1)
    with pytest.raises(PolicyError):
        PolicyRule("empty", "2025", ())
    with pytest.raises(PolicyError):
        Scenario("neg", co2_cap={"2025": -1.0})
