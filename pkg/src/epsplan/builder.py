"""Assemble one planning stage as a linear program.

Variables (all non-negative):
  cap_new[c], cap_retired[c], cap_retrofit[p->v]     MW
  gen[c,f,t]                                         MW average over step t
  charge[s,t], discharge[s,t], soc[s,t]              MW, MW, MWh
  fwd[l,t], bwd[l,t], tx_new[l]                      MW
  nse[z,t]                                           MW of unserved demand
  h2_prod[e,t]                                       MMBtu/h of hydrogen
  st_new[s], st_retired[s], ez_new[e]                MW

Policy rows are prefixed ``policy.`` so that a failing stage can point at
them.  Costs are accumulated per component; the LP objective is their sum.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .credits import ITC, apply_credits
from .lp import InfeasibleBounds, LinearProgram
from .policy import ClusterConstraints, ConstraintSet
from .system import (
    HOURS_PER_YEAR,
    NEW_BUILD,
    VARIABLE_RENEWABLES,
    GeneratorCluster,
    Period,
    TimeStructure,
    ValidatedSystem,
)

COST_COMPONENTS = ("capex", "fixed", "variable", "fuel", "credits", "nse", "transmission")
CO2_CAP_ROW = "policy.co2_cap"
NO_FUEL = "-"
CARRY_TOL = 1e-6


class BuildError(ValueError):
    pass


class MissingCarryover(BuildError):
    def __init__(self, missing: list[str]):
        self.missing = missing
        super().__init__(f"carryover lacks {len(missing)} asset(s): {', '.join(missing[:10])}")


class FuelNotAllowed(BuildError):
    pass


class UnboundedCredit(BuildError):
    pass


@dataclass(frozen=True)
class BuildOptions:
    fuel_price_case: str = "ref"
    growth_case: str = "ref"
    nuclear_no_retirement: bool = False
    use_voll: bool = True
    # fix every investment, retirement and retrofit decision at zero
    dispatch_only: bool = False


@dataclass
class StageModel:
    """A built stage LP plus the index maps needed to read its solution."""

    lp: LinearProgram
    period: Period
    time: TimeStructure
    carryover: dict[str, float]
    cap_new: dict[str, int] = field(default_factory=dict)
    cap_retired: dict[str, int] = field(default_factory=dict)
    retrofit: dict[tuple[str, str], int] = field(default_factory=dict)
    ratio: dict[tuple[str, str], float] = field(default_factory=dict)
    gen: dict[tuple[str, str], np.ndarray] = field(default_factory=dict)
    charge: dict[str, np.ndarray] = field(default_factory=dict)
    discharge: dict[str, np.ndarray] = field(default_factory=dict)
    soc: dict[str, np.ndarray] = field(default_factory=dict)
    st_new: dict[str, int] = field(default_factory=dict)
    st_retired: dict[str, int] = field(default_factory=dict)
    fwd: dict[str, np.ndarray] = field(default_factory=dict)
    bwd: dict[str, np.ndarray] = field(default_factory=dict)
    tx_new: dict[str, int] = field(default_factory=dict)
    nse: dict[str, np.ndarray] = field(default_factory=dict)
    h2_prod: dict[str, np.ndarray] = field(default_factory=dict)
    ez_new: dict[str, int] = field(default_factory=dict)
    # component -> {col: coef} and constant part
    cost_terms: dict[str, dict[int, float]] = field(default_factory=dict)
    cost_constants: dict[str, float] = field(default_factory=dict)
    emission_coefs: dict[int, float] = field(default_factory=dict)
    # row name -> rule sources responsible for it
    policy_rows: dict[str, list[str]] = field(default_factory=dict)
    balance_rows: dict[tuple[str, int], int] = field(default_factory=dict)


def initial_carryover(system: ValidatedSystem) -> dict[str, float]:
    spec = system.spec
    out = {c.id: float(c.capacity) for c in spec.clusters}
    out.update({s.id: float(s.power_capacity) for s in spec.storage})
    out.update({e.id: float(e.capacity) for e in spec.electrolyzers})
    out.update({ln.id: float(ln.capacity) for ln in spec.lines})
    return out


# -- row helpers --------------------------------------------------------
def capacity_terms(model: StageModel, cid: str, scale: float) -> tuple[list[tuple[int, float]], float]:
    """``scale * cap_effective(cid)`` split into variable terms and a constant."""
    terms = []
    if cid in model.cap_new:
        terms.append((model.cap_new[cid], scale))
    if cid in model.cap_retired:
        terms.append((model.cap_retired[cid], -scale))
    for (p, v), col in model.retrofit.items():
        if p == cid:
            terms.append((col, -scale))
        if v == cid:
            terms.append((col, scale * model.ratio[(p, v)]))
    return terms, scale * model.carryover[cid]


def capacity_factor_row(cluster: GeneratorCluster, gamma: float, time: TimeStructure, model: StageModel) -> dict:
    """Annual energy <= gamma * cap_effective * 8760, as (coeffs, sense, rhs)."""
    coeffs = []
    for (cid, _f), cols in model.gen.items():
        if cid == cluster.id:
            coeffs.extend(zip(cols.tolist(), time.weights.tolist()))
    cap, const = capacity_terms(model, cluster.id, gamma * HOURS_PER_YEAR)
    coeffs.extend((col, -v) for col, v in cap)
    return {"coeffs": coeffs, "sense": "L", "rhs": const}


def cofire_row(cluster: GeneratorCluster, fuel: str, sigma: float, time: TimeStructure, model: StageModel) -> dict:
    """Annual heat input of ``fuel`` >= sigma * total heat input."""
    if fuel not in cluster.allowed_fuels:
        raise FuelNotAllowed(f"{fuel!r} is not an allowed fuel of {cluster.id}")
    coeffs = []
    for f in cluster.allowed_fuels:
        hr = cluster.heat_rates[f]
        k = (1.0 - sigma) * hr if f == fuel else -sigma * hr
        if k == 0.0:
            continue
        cols = model.gen.get((cluster.id, f))
        if cols is not None:
            coeffs.extend(zip(cols.tolist(), (k * time.weights).tolist()))
    return {"coeffs": coeffs, "sense": "G", "rhs": 0.0}


def emission_rate(cluster: GeneratorCluster, fuel: str, system: ValidatedSystem) -> float:
    """tCO2 per MWh of ``cluster`` burning ``fuel``."""
    if fuel == NO_FUEL:
        return 0.0
    return cluster.heat_rates[fuel] * system.emission_factor(fuel) * (1.0 - cluster.capture_rate)


def emissions_expression(system: ValidatedSystem, model: StageModel) -> dict[int, float]:
    """tCO2 coefficient on every generation column; the one source for cap rows and reporting."""
    w = model.time.weights
    out: dict[int, float] = {}
    for (cid, f), cols in model.gen.items():
        rate = emission_rate(system.cluster[cid], f, system)
        if rate == 0.0:
            continue
        for col, wt in zip(cols.tolist(), w.tolist()):
            out[col] = wt * rate
    return out


def evaluate_emissions(coefs: Mapping[int, float], x: np.ndarray) -> float:
    return math.fsum(k * float(x[col]) for col, k in sorted(coefs.items()))


# -- builder ------------------------------------------------------------
def _active(first_period: str | None, period: Period, system: ValidatedSystem) -> bool:
    return first_period is None or system.period_index(first_period) <= system.period_index(period.label)


def _reached(label: str | None, period: Period, system: ValidatedSystem) -> bool:
    return label is not None and system.period_index(label) <= system.period_index(period.label)


def _zero_output(con: ClusterConstraints, cluster: GeneratorCluster) -> bool:
    if con.require_capture is not None and cluster.capture_rate < con.require_capture - 1e-12:
        return True
    return any(s > 0 and f not in cluster.allowed_fuels for f, s in con.min_shares.items())


def build_stage(
    system: ValidatedSystem,
    constraints: ConstraintSet,
    carryover: Mapping[str, float],
    period: Period | str,
    options: BuildOptions | None = None,
) -> StageModel:
    opts = options or BuildOptions()
    spec = system.spec
    if isinstance(period, str):
        period = system.period[period]
    missing = [a for a in initial_carryover(system) if a not in carryover]
    if missing:
        raise MissingCarryover(missing)
    carry = {}
    for k, v in carryover.items():
        v = float(v)
        if v < -CARRY_TOL * max(1.0, abs(v)):
            raise InfeasibleBounds(k, 0.0, v)
        # round-off from the previous stage's solution
        carry[k] = max(v, 0.0)

    time = spec.time
    n = time.n
    w = time.weights
    wl = w.tolist()
    lp = LinearProgram(name=f"stage-{period.label}")
    m = StageModel(lp=lp, period=period, time=time, carryover=carry)
    terms: dict[str, dict[int, float]] = {k: defaultdict(float) for k in COST_COMPONENTS}
    consts = {k: 0.0 for k in COST_COMPONENTS}
    settings = constraints.tax_credits
    invest = not opts.dispatch_only

    def cost(component: str, col: int, value: float) -> None:
        if value != 0.0:
            terms[component][col] += value

    def add_row(name: str, coeffs: Iterable[tuple[int, float]], sense: str, rhs: float) -> int:
        return lp.add_row(name, coeffs, sense, rhs)

    credits = {
        c.id: apply_credits(c, settings, period, system, opts.nuclear_no_retirement) for c in spec.clusters
    }

    # capacity decisions
    for c in spec.clusters:
        adj = credits[c.id]
        if invest and c.is_new_build and _active(c.first_period, period, system):
            limit = c.max_new_capacity
            zl = system.zone[c.zone].build_limit(c.tech_class.value, period.label, opts.growth_case)
            if zl is not None:
                limit = min(limit, zl)
            if limit > 0:
                col = lp.add_var(f"cap_new[{c.id}]", 0.0, limit)
                m.cap_new[c.id] = col
                cost("capex", col, c.annuitized_capex * adj.capex_multiplier)
                cost("fixed", col, c.fixed_om)
        if invest and carry[c.id] > 0:
            up = 0.0 if adj.no_retirement else carry[c.id]
            col = lp.add_var(f"cap_retired[{c.id}]", 0.0, up)
            m.cap_retired[c.id] = col
            cost("fixed", col, -c.fixed_om)
        consts["fixed"] += c.fixed_om * carry[c.id]
    for v in spec.clusters:
        if not invest or not _active(v.first_period, period, system):
            continue
        for parent, ratio in v.retrofit_parents:
            if carry[parent] <= 0:
                continue
            col = lp.add_var(f"cap_retrofit[{parent}->{v.id}]", 0.0, carry[parent])
            m.retrofit[(parent, v.id)] = col
            m.ratio[(parent, v.id)] = ratio
            cost("capex", col, ratio * v.annuitized_capex)
            cost("fixed", col, ratio * v.fixed_om - system.cluster[parent].fixed_om)

    def can_operate(cid: str) -> bool:
        return (
            carry[cid] > 0
            or cid in m.cap_new
            or any(v == cid for (_p, v) in m.retrofit)
        )

    # capacity balance for clusters that can lose capacity to retrofits
    for c in spec.clusters:
        outs = [col for (p, _v), col in m.retrofit.items() if p == c.id]
        if outs:
            coeffs = [(col, 1.0) for col in outs]
            if c.id in m.cap_retired:
                coeffs.append((m.cap_retired[c.id], 1.0))
            if c.id in m.cap_new:
                coeffs.append((m.cap_new[c.id], -1.0))
            add_row(f"cap_balance[{c.id}]", coeffs, "L", carry[c.id])

    # dispatch variables and per-step availability
    zone_gen: dict[str, list[tuple[np.ndarray, float]]] = defaultdict(list)
    new_vre: dict[str, list[np.ndarray]] = defaultdict(list)
    for c in spec.clusters:
        if not can_operate(c.id):
            continue
        adj = credits[c.id]
        fuels = c.allowed_fuels or (NO_FUEL,)
        avail = c.availability_profile(n)
        for f in fuels:
            start = lp.num_vars
            for t in range(n):
                lp.add_var(f"gen[{c.id},{f},{t}]")
            cols = np.arange(start, start + n)
            m.gen[(c.id, f)] = cols
            zone_gen[c.zone].append((cols, 1.0))
            if f == NO_FUEL:
                fuel_cost = 0.0
            else:
                fuel_cost = system.fuel[f].price(period.label, c.zone, opts.fuel_price_case) * c.heat_rates[f]
            credit = adj.per_mwh.get(f, 0.0) + adj.ptc
            for col, wt in zip(cols.tolist(), wl):
                cost("variable", col, wt * c.var_om)
                cost("fuel", col, wt * fuel_cost)
                cost("credits", col, -wt * credit)
            net = c.var_om + fuel_cost - credit
            if net < 0:
                _check_credit_bounded(c, net, m, avail, w)
        if c.tech_class in VARIABLE_RENEWABLES and c.vintage == NEW_BUILD:
            new_vre[c.zone].append(m.gen[(c.id, fuels[0])])
        cap, const = capacity_terms(m, c.id, 1.0)
        fixed_cap = not cap
        if fixed_cap and len(fuels) == 1:
            cols = m.gen[(c.id, fuels[0])]
            for t in range(n):
                lp.set_bounds(int(cols[t]), 0.0, float(avail[t]) * const)
            continue
        for t in range(n):
            a = float(avail[t])
            coeffs = [(int(m.gen[(c.id, f)][t]), 1.0) for f in fuels]
            coeffs.extend((col, -a * k) for col, k in cap)
            add_row(f"avail[{c.id},{t}]", coeffs, "L", a * const)

    # storage
    for s in spec.storage:
        c0 = carry[s.id]
        cap_terms: list[tuple[int, float]] = []
        if invest and _active(s.first_period, period, system) and s.max_new_power > 0:
            col = lp.add_var(f"st_new[{s.id}]", 0.0, s.max_new_power)
            m.st_new[s.id] = col
            mult = 1.0 - settings.itc_fraction if settings.credit_modes.get(s.tech_class.value) == ITC else 1.0
            cost("capex", col, mult * (s.annuitized_capex + s.duration * s.annuitized_capex_energy))
            cost("fixed", col, s.fixed_om)
            cap_terms.append((col, 1.0))
        if invest and c0 > 0:
            col = lp.add_var(f"st_retired[{s.id}]", 0.0, c0)
            m.st_retired[s.id] = col
            cost("fixed", col, -s.fixed_om)
            cap_terms.append((col, -1.0))
        consts["fixed"] += s.fixed_om * c0
        if c0 <= 0 and not cap_terms:
            continue
        eta = s.round_trip_efficiency
        ch = np.arange(lp.num_vars, lp.num_vars + n)
        for t in range(n):
            lp.add_var(f"charge[{s.id},{t}]")
        dis = np.arange(lp.num_vars, lp.num_vars + n)
        for t in range(n):
            col = lp.add_var(f"discharge[{s.id},{t}]")
            cost("variable", col, wl[t] * s.var_om)
        soc = np.arange(lp.num_vars, lp.num_vars + n)
        for t in range(n):
            lp.add_var(f"soc[{s.id},{t}]")
        m.charge[s.id], m.discharge[s.id], m.soc[s.id] = ch, dis, soc
        zone_gen[s.zone].append((dis, 1.0))
        zone_gen[s.zone].append((ch, -1.0))
        dur = s.duration
        if cap_terms:
            for t in range(n):
                for kind, cols in (("charge", ch), ("discharge", dis)):
                    add_row(f"{kind}_cap[{s.id},{t}]", [(int(cols[t]), 1.0)] + [(c, -k) for c, k in cap_terms], "L", c0)
                add_row(f"soc_cap[{s.id},{t}]", [(int(soc[t]), 1.0)] + [(c, -k * dur) for c, k in cap_terms], "L", c0 * dur)
        else:
            for t in range(n):
                lp.set_bounds(int(ch[t]), 0.0, c0)
                lp.set_bounds(int(dis[t]), 0.0, c0)
                lp.set_bounds(int(soc[t]), 0.0, c0 * dur)
        d = time.durations
        for a, b in time.segment_bounds():
            for t in range(a, b):
                prev = b - 1 if t == a else t - 1
                coeffs = [(int(soc[t]), 1.0), (int(ch[t]), -eta * d[t]), (int(dis[t]), float(d[t]))]
                if prev != t:
                    coeffs.append((int(soc[prev]), -1.0))
                add_row(f"soc_balance[{s.id},{t}]", coeffs, "E", 0.0)

    # transmission
    imports: dict[str, list[tuple[np.ndarray, float]]] = defaultdict(list)
    for ln in spec.lines:
        c0 = carry[ln.id]
        tx = None
        if invest and ln.max_expansion > 0:
            tx = lp.add_var(f"tx_new[{ln.id}]", 0.0, ln.max_expansion)
            m.tx_new[ln.id] = tx
            cost("transmission", tx, ln.expansion_cost)
        if c0 <= 0 and tx is None:
            continue
        fwd = np.arange(lp.num_vars, lp.num_vars + n)
        for t in range(n):
            lp.add_var(f"fwd[{ln.id},{t}]", 0.0, math.inf if tx is not None else c0)
        bwd = np.arange(lp.num_vars, lp.num_vars + n)
        for t in range(n):
            lp.add_var(f"bwd[{ln.id},{t}]", 0.0, math.inf if tx is not None else c0)
        m.fwd[ln.id], m.bwd[ln.id] = fwd, bwd
        if tx is not None:
            for t in range(n):
                add_row(f"flow_cap[{ln.id},{t}]", [(int(fwd[t]), 1.0), (int(bwd[t]), 1.0), (tx, -1.0)], "L", c0)
        keep = 1.0 - ln.loss_fraction
        imports[ln.to_zone].append((fwd, keep))
        imports[ln.from_zone].append((fwd, -1.0))
        imports[ln.from_zone].append((bwd, keep))
        imports[ln.to_zone].append((bwd, -1.0))

    # electrolysers
    zone_h2: dict[str, list[np.ndarray]] = defaultdict(list)
    for e in spec.electrolyzers:
        c0 = carry[e.id]
        new = None
        if invest and _active(e.first_period, period, system) and e.max_new_capacity > 0:
            new = lp.add_var(f"ez_new[{e.id}]", 0.0, e.max_new_capacity)
            m.ez_new[e.id] = new
            cost("capex", new, e.annuitized_capex)
            cost("fixed", new, e.fixed_om)
        consts["fixed"] += e.fixed_om * c0
        if c0 <= 0 and new is None:
            continue
        cols = np.arange(lp.num_vars, lp.num_vars + n)
        for t in range(n):
            lp.add_var(f"h2_prod[{e.id},{t}]", 0.0, math.inf if new is not None else c0 * e.h2_yield)
        m.h2_prod[e.id] = cols
        zone_gen[e.zone].append((cols, -1.0 / e.h2_yield))
        zone_h2[e.zone].append(cols)
        if new is not None:
            for t in range(n):
                add_row(f"ez_cap[{e.id},{t}]", [(int(cols[t]), 1.0 / e.h2_yield), (new, -1.0)], "L", c0)

    # unserved energy
    if opts.use_voll and spec.voll is not None:
        for z in spec.zones:
            demand = z.demand * period.demand_scale
            cols = np.arange(lp.num_vars, lp.num_vars + n)
            for t in range(n):
                col = lp.add_var(f"nse[{z.id},{t}]", 0.0, max(float(demand[t]), 0.0))
                cost("nse", col, wl[t] * spec.voll)
            m.nse[z.id] = cols
            zone_gen[z.id].append((cols, 1.0))

    # power balance
    for z in spec.zones:
        demand = z.demand * period.demand_scale
        groups = zone_gen[z.id] + imports[z.id]
        for t in range(n):
            coeffs = [(int(cols[t]), k) for cols, k in groups]
            m.balance_rows[(z.id, t)] = add_row(f"balance[{z.id},{t}]", coeffs, "E", float(demand[t]))

    # hydrogen: hourly matching to new renewables and annual zonal supply
    for z in spec.zones:
        if zone_h2[z.id]:
            vre = new_vre[z.id]
            ez = [(cols, 1.0 / e.h2_yield) for e in spec.electrolyzers if e.zone == z.id and e.id in m.h2_prod
                  for cols in (m.h2_prod[e.id],)]
            for t in range(n):
                coeffs = [(int(cols[t]), k) for cols, k in ez] + [(int(cols[t]), -1.0) for cols in vre]
                add_row(f"h2_match[{z.id},{t}]", coeffs, "L", 0.0)
        need = z.h2_demand.get(period.label, 0.0)
        if need > 0 or zone_h2[z.id]:
            coeffs = [(int(col), wt) for cols in zone_h2[z.id] for col, wt in zip(cols.tolist(), wl)]
            if zone_h2[z.id]:
                # hydrogen burned in the zone must be produced there
                for (cid, f), cols in m.gen.items():
                    c = system.cluster[cid]
                    if c.zone == z.id and f != NO_FUEL and system.fuel[f].is_hydrogen:
                        coeffs.extend((int(col), -wt * c.heat_rates[f]) for col, wt in zip(cols.tolist(), wl))
            add_row(f"h2_supply[{z.id}]", coeffs, "G", need)

    # planned and mandated retirement
    for c in spec.clusters:
        con = constraints.clusters.get(c.id)
        forced = _reached(c.planned_retirement, period, system)
        mandated = con is not None and _reached(con.retire_by, period, system)
        if (forced or mandated) and can_operate(c.id):
            cap, const = capacity_terms(m, c.id, 1.0)
            name = f"policy.retire_by[{c.id}]" if mandated else f"planned_retirement[{c.id}]"
            add_row(name, cap, "E", -const)
            if mandated:
                m.policy_rows[name] = list(con.sources)

    # compiled policy rows
    for cid, con in constraints.clusters.items():
        c = system.cluster[cid]
        if not any(k[0] == cid for k in m.gen):
            continue
        gen_cols = [(cols, f) for (gid, f), cols in m.gen.items() if gid == cid]
        if _zero_output(con, c):
            name = f"policy.no_output[{cid}]"
            add_row(name, [(int(col), wt) for cols, _f in gen_cols for col, wt in zip(cols.tolist(), wl)], "L", 0.0)
            m.policy_rows[name] = list(con.sources)
            continue
        if con.max_cf is not None:
            row = capacity_factor_row(c, con.max_cf, time, m)
            name = f"policy.cf[{cid}]"
            add_row(name, row["coeffs"], row["sense"], row["rhs"])
            m.policy_rows[name] = list(con.sources)
        for fuel, share in sorted(con.min_shares.items()):
            row = cofire_row(c, fuel, share, time, m)
            name = f"policy.cofire[{cid},{fuel}]"
            add_row(name, row["coeffs"], row["sense"], row["rhs"])
            m.policy_rows[name] = list(con.sources)
        if con.max_emission_rate is not None:
            coeffs = []
            for cols, f in gen_cols:
                k = emission_rate(c, f, system) - con.max_emission_rate
                coeffs.extend((int(col), wt * k) for col, wt in zip(cols.tolist(), wl))
            name = f"policy.emission_rate[{cid}]"
            add_row(name, coeffs, "L", 0.0)
            m.policy_rows[name] = list(con.sources)

    m.emission_coefs = emissions_expression(system, m)
    if constraints.co2_cap is not None:
        add_row(CO2_CAP_ROW, sorted(m.emission_coefs.items()), "L", constraints.co2_cap * 1e6)
        m.policy_rows[CO2_CAP_ROW] = ["co2-cap"]

    for comp in COST_COMPONENTS:
        for col, v in terms[comp].items():
            lp.cost[col] += v
    lp.objective_offset = math.fsum(consts.values())
    m.cost_terms = {k: dict(v) for k, v in terms.items()}
    m.cost_constants = consts
    lp.validate()
    return m


def _check_credit_bounded(c: GeneratorCluster, net: float, m: StageModel, avail: np.ndarray, w: np.ndarray) -> None:
    """A negative net marginal cost is fine while capacity is bounded."""
    col = m.cap_new.get(c.id)
    if col is None or math.isfinite(m.lp.upper[col]):
        return
    revenue = -net * float(np.dot(w, avail))
    if revenue >= c.annuitized_capex + c.fixed_om:
        raise UnboundedCredit(f"{c.id}: credits exceed the cost of unlimited new capacity")


def build_stage_lp(
    system: ValidatedSystem,
    constraints: ConstraintSet,
    carryover: Mapping[str, float],
    period: Period | str,
    options: BuildOptions | None = None,
) -> LinearProgram:
    return build_stage(system, constraints, carryover, period, options).lp
