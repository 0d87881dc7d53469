from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest

from epsplan.builder import (
    CO2_CAP_ROW,
    FuelNotAllowed,
    MissingCarryover,
    build_stage,
    build_stage_lp,
    capacity_factor_row,
    cofire_row,
    emission_rate,
    emissions_expression,
    evaluate_emissions,
    initial_carryover,
)
from epsplan.fixtures import single_zone_spec, two_zone_spec
from epsplan.policy import ClusterConstraints, ConstraintSet, compile_scenario
from epsplan.scenarios import COAL_NEW_GAS, LIBRARY_ORDER
from epsplan.solver import OPTIMAL, solve
from epsplan.system import GeneratorCluster, Period, TechClass, validate_system

T = TechClass


def _single(**kw):
    system = validate_system(single_zone_spec(**kw))
    return system, build_stage(system, ConstraintSet("2025"), initial_carryover(system), "2025")


def _row_activity(row, x):
    return math.fsum(k * x[c] for c, k in row["coeffs"])


# -- capacity-factor rows -----------------------------------------------
def test_cf_row_full_year_unit_capacity():
    system, m = _single(n_steps=8760, capacity=1.0)
    c = system.cluster["Z.gas"]
    row = capacity_factor_row(c, 0.4, system.time, m)
    assert row["sense"] == "L"
    assert row["rhs"] == pytest.approx(3504.0, rel=1e-12)
    gen_cols = set(m.gen[("Z.gas", "natural_gas")].tolist())
    assert all(k == pytest.approx(1.0) for col, k in row["coeffs"] if col in gen_cols)
    assert len([1 for col, _ in row["coeffs"] if col in gen_cols]) == 8760


def test_cf_row_three_weighted_hours():
    system, m = _single(n_steps=3, capacity=10.0)
    assert np.allclose(system.time.weights, 2920.0)
    row = capacity_factor_row(system.cluster["Z.gas"], 0.2, system.time, m)
    assert row["rhs"] == pytest.approx(17520.0, rel=1e-12)


def test_cf_zero_forces_no_output():
    system = validate_system(single_zone_spec(n_steps=6))
    cs = ConstraintSet("2025", {"Z.gas": ClusterConstraints(max_cf=0.0)})
    m = build_stage(system, cs, initial_carryover(system), "2025")
    sol = solve(m.lp)
    assert sol.status == OPTIMAL
    assert np.all(sol.x[m.gen[("Z.gas", "natural_gas")]] == 0.0)
    assert sol.x[m.nse["Z"]].sum() == pytest.approx(6.0)


# -- co-fire rows -------------------------------------------------------
def _cofire_model():
    system = validate_system(two_zone_spec(periods=(Period("2030", 5, 2030),)))
    m = build_stage(system, ConstraintSet("2030"), initial_carryover(system), "2030")
    return system, m


def _heat_point(m, system, cid, heat):
    """A solution vector burning ``heat`` MMBtu per fuel in the first step."""
    x = np.zeros(m.lp.num_vars)
    c = system.cluster[cid]
    w0 = system.time.weights[0]
    for f, q in heat.items():
        x[m.gen[(cid, f)][0]] = q / (w0 * c.heat_rates[f])
    return x


def test_cofire_boundary_share_is_binding():
    system, m = _cofire_model()
    c = system.cluster["A.coal_cofire"]
    row = cofire_row(c, "natural_gas", 0.4, system.time, m)
    assert row["sense"] == "G" and row["rhs"] == 0.0
    x = _heat_point(m, system, c.id, {"coal": 60.0, "natural_gas": 40.0})
    assert _row_activity(row, x) == pytest.approx(0.0, abs=1e-9)
    x = _heat_point(m, system, c.id, {"coal": 61.0, "natural_gas": 39.0})
    assert _row_activity(row, x) < 0


def test_cofire_full_share_excludes_other_fuels():
    system, m = _cofire_model()
    c = system.cluster["A.coal_cofire"]
    row = cofire_row(c, "natural_gas", 1.0, system.time, m)
    gas = set(m.gen[(c.id, "natural_gas")].tolist())
    coal = set(m.gen[(c.id, "coal")].tolist())
    assert not any(col in gas for col, _ in row["coeffs"])
    assert all(k < 0 for col, k in row["coeffs"] if col in coal)


def test_hydrogen_thirty_percent():
    system, m = _cofire_model()
    c = system.cluster["A.ngcc_new"]
    row = cofire_row(c, "hydrogen", 0.3, system.time, m)
    x = _heat_point(m, system, c.id, {"natural_gas": 70.0, "hydrogen": 30.0})
    assert _row_activity(row, x) == pytest.approx(0.0, abs=1e-9)


def test_cofire_rejects_disallowed_fuel():
    system, m = _cofire_model()
    with pytest.raises(FuelNotAllowed):
        cofire_row(system.cluster["B.ngcc_ccs"], "hydrogen", 0.3, system.time, m)


def test_cofire_row_count_matches_walker(system, library):
    for name in LIBRARY_ORDER:
        for p in system.periods:
            cs = compile_scenario(library[name], system, p, {"A.coal": "2035"})
            m = build_stage(system, cs, initial_carryover(system), p)
            # independent walk over the compiled constraints
            expected = set()
            for cid, con in cs.clusters.items():
                c = system.cluster[cid]
                blocked = (con.require_capture is not None and c.capture_rate < con.require_capture) or any(
                    s > 0 and f not in c.allowed_fuels for f, s in con.min_shares.items())
                operates = any(k[0] == cid for k in m.gen)
                if operates and not blocked:
                    expected |= {f"policy.cofire[{cid},{f}]" for f in con.min_shares}
            got = {r for r in m.lp.row_names if r.startswith("policy.cofire[")}
            assert got == expected, (name, p.label)


# -- emissions ----------------------------------------------------------
def test_emission_coefficients(system):
    gas = GeneratorCluster("g", "B", T.ExistingNGCC, {"natural_gas": 7.0, "hydrogen": 7.0})
    ccs = replace(gas, capture_rate=0.9)
    # 100 MMBtu of gas is 100/7 MWh
    assert emission_rate(gas, "natural_gas", system) * 100 / 7 == pytest.approx(5.306, rel=1e-12)
    assert emission_rate(ccs, "natural_gas", system) * 100 / 7 == pytest.approx(0.5306, rel=1e-12)
    assert emission_rate(gas, "hydrogen", system) == 0.0
    full = replace(gas, capture_rate=1.0)
    assert emission_rate(full, "natural_gas", system) == 0.0


def test_emissions_expression_is_weighted_rate(system, library):
    cs = compile_scenario(library[COAL_NEW_GAS], system, "2035", {"A.coal": "2035"})
    m = build_stage(system, cs, initial_carryover(system), "2035")
    coefs = emissions_expression(system, m)
    assert all(v > 0 for v in coefs.values())
    for (cid, f), cols in m.gen.items():
        rate = emission_rate(system.cluster[cid], f, system)
        for col, w in zip(cols.tolist(), system.time.weights.tolist()):
            if rate == 0:
                assert col not in coefs
            else:
                assert coefs[col] == w * rate
    x = np.ones(m.lp.num_vars)
    assert evaluate_emissions(coefs, x) == pytest.approx(sum(coefs.values()), rel=1e-12)


# -- whole-stage structure ----------------------------------------------
def test_single_zone_dispatch():
    system, m = _single(n_steps=24)
    balance = [r for r in m.lp.row_names if r.startswith("balance[")]
    assert len(balance) == 24
    sol = solve(m.lp)
    assert sol.status == OPTIMAL
    assert np.allclose(sol.x[m.gen[("Z.gas", "natural_gas")]], 1.0)
    assert np.allclose(sol.x[m.nse["Z"]], 0.0)


def test_zero_cap_moves_demand_to_unserved():
    system = validate_system(single_zone_spec(n_steps=24))
    cs = ConstraintSet("2025", co2_cap=0.0)
    m = build_stage(system, cs, initial_carryover(system), "2025")
    assert m.lp.has_row(CO2_CAP_ROW)
    sol = solve(m.lp)
    assert sol.status == OPTIMAL
    assert np.allclose(sol.x[m.nse["Z"]], 1.0)
    assert sol.objective == pytest.approx(24 * 365.0 * 5000.0, rel=1e-9)


def test_missing_carryover():
    system = validate_system(single_zone_spec())
    with pytest.raises(MissingCarryover):
        build_stage_lp(system, ConstraintSet("2025"), {}, "2025")


def test_names_are_bijective(system, library):
    cs = compile_scenario(library["CCS + H2"], system, "2040", {"A.coal": "2035"})
    lp = build_stage_lp(system, cs, initial_carryover(system), "2040")
    assert len(set(lp.var_names)) == lp.num_vars
    assert len(set(lp.row_names)) == lp.num_rows
    assert all(lp.var(n) == i for i, n in enumerate(lp.var_names))
    assert all(lp.row(n) == i for i, n in enumerate(lp.row_names))


def test_every_policy_constraint_has_a_row(system, library):
    for name in LIBRARY_ORDER:
        cs = compile_scenario(library[name], system, "2040", {"A.coal": "2035"})
        m = build_stage(system, cs, initial_carryover(system), "2040")
        for cid in cs.clusters:
            if any(k[0] == cid for k in m.gen):
                assert any(f"[{cid}" in r for r in m.policy_rows), (name, cid)
        assert all(m.lp.has_row(r) for r in m.policy_rows)


def test_no_integer_structure(system, library):
    lp = build_stage_lp(system, compile_scenario(library[COAL_NEW_GAS], system, "2040", {}), initial_carryover(system), "2040")
    assert not hasattr(lp, "integers")
    assert all(lo == 0.0 or not math.isfinite(lo) or lo <= up for lo, up in zip(lp.lower, lp.upper))


def test_balance_identity(system, library):
    cs = compile_scenario(library[COAL_NEW_GAS], system, "2035", {"A.coal": "2035"})
    m = build_stage(system, cs, initial_carryover(system), "2035")
    sol = solve(m.lp)
    act = m.lp.activities(sol.x)
    for (z, t), r in m.balance_rows.items():
        assert abs(act[r] - m.lp.rhs[r]) <= 1e-6 * (1 + abs(m.lp.rhs[r]))


def _scaled(spec, k):
    zones = tuple(replace(z, demand=z.demand * k) for z in spec.zones)
    clusters = tuple(replace(c, capacity=c.capacity * k, max_new_capacity=c.max_new_capacity * k) for c in spec.clusters)
    lines = tuple(replace(ln, capacity=ln.capacity * k, max_expansion=ln.max_expansion * k) for ln in spec.lines)
    return spec.replace(zones=zones, clusters=clusters, lines=lines)


def test_scaling_covariance():
    spec = two_zone_spec(periods=(Period("2030", 5, 2030),))
    # limits far above anything economic, so none binds
    spec = spec.replace(clusters=tuple(replace(c, max_new_capacity=50000.0) if c.is_new_build else c
                                       for c in spec.clusters))
    out = []
    for k in (1.0, 2.0):
        system = validate_system(_scaled(spec, k))
        m = build_stage(system, ConstraintSet("2030"), initial_carryover(system), "2030")
        sol = solve(m.lp)
        assert sol.status == OPTIMAL
        # no build limit binds at the optimum
        for cid, col in m.cap_new.items():
            assert sol.x[col] < m.lp.upper[col] - 1e-6
        variable = math.fsum(v * sol.x[c] for comp in ("variable", "fuel", "credits", "nse")
                             for c, v in m.cost_terms[comp].items())
        out.append((sol.objective, variable))
    assert out[1][0] == pytest.approx(2 * out[0][0], rel=1e-9)
    assert out[1][1] == pytest.approx(2 * out[0][1], rel=1e-6)
