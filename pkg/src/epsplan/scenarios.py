"""Built-in scenario library and the YAML scenario-file format.

Scenario file schema (one document per scenario)::

    name: Coal + New Gas
    description: free text
    coal_classification: final          # or proposed
    co2_cap: {2030: 1.2, ...}           # MtCO2 per period label, optional
    co2_cap_from: Coal + New Gas        # optional; cap = that scenario's emissions
    sensitivity:
      fuel_price_case: ref
      growth_case: ref
      nuclear_no_retirement: false
    tax_credits:
      ccs_credit: 85.0
      credit_years: 12
      asset_life: 30
      discount_rate: 0.035
      ptc: 26.0
      itc_fraction: 0.3
      credit_modes: {OnshoreWind: ptc, Battery: itc, ...}
      nuclear_45u_through: 2032
    rules:
      - id: new-gas
        applies_to:
          tech_classes: [NewNGCC, NewNGCT, NGCC_CCS]
          vintage: NewBuild                # Existing | NewBuild | null
          min_capacity_mw: null            # strict ">" threshold
          retirement_classes: null         # list of coal subcategories
        effective_from: "2035"
        pathways:
          - name: ccs
            constraints:
              - {type: RequireCapture, rate: 0.9}
          - name: low-utilisation
            constraints:
              - {type: MaxCapacityFactor, gamma: 0.4}

Constraint types: MaxCapacityFactor(gamma), MinFuelHeatShare(fuel, share),
RequireCapture(rate), MustRetireBy(period), MaxEmissionRate(rate).
"""
from __future__ import annotations

from dataclasses import asdict, fields, replace
from pathlib import Path
from typing import Any

import yaml

from .credits import TaxCreditSettings
from .policy import (
    FINAL,
    PROPOSED,
    CoalSubcategory,
    MaxCapacityFactor,
    MaxEmissionRate,
    MinFuelHeatShare,
    MustRetireBy,
    Pathway,
    PolicyError,
    PolicyRule,
    RequireCapture,
    Scenario,
)
from .system import EXISTING, NEW_BUILD, TechClass

T = TechClass
S = CoalSubcategory

GAS = "natural_gas"
H2 = "hydrogen"
CAPTURE = 0.9

STEAM_RULE_TECHS = frozenset({T.CoalSteam, T.CoalGasCofire, T.CoalCCSRetrofit, T.OilGasSteam})
NEW_GAS_TECHS = frozenset({T.NewNGCC, T.NewNGCT, T.NGCC_CCS})
EXISTING_GAS_TECHS = frozenset({T.ExistingNGCC, T.ExistingNGCT, T.GasCCSRetrofit})

NO_REGULATIONS = "No Regulations"
COAL_ONLY = "Coal Only"
NEW_GAS_ONLY = "New Gas Only"
COAL_NEW_GAS = "Coal + New Gas"
COAL_ALL_GAS = "Coal + All Gas"
PROPOSED_RULES = "Proposed Rules"
CO2_CAP = "CO2 Cap"
FINAL_BASELOAD_EXISTING = "Final + Baseload Existing"
FINAL_ALL_EXISTING = "Final + All Existing"
CCS_ONLY = "CCS Only"
CCS_H2 = "CCS + H2"

LIBRARY_ORDER = (
    NO_REGULATIONS,
    COAL_ONLY,
    NEW_GAS_ONLY,
    COAL_NEW_GAS,
    COAL_ALL_GAS,
    PROPOSED_RULES,
    CO2_CAP,
    FINAL_BASELOAD_EXISTING,
    FINAL_ALL_EXISTING,
    CCS_ONLY,
    CCS_H2,
)


def _ccs() -> Pathway:
    return Pathway("ccs", (RequireCapture(CAPTURE),))


def coal_rules(classification: str = FINAL, gas: str = GAS) -> tuple[PolicyRule, ...]:
    ccs_from = "2035" if classification == FINAL else "2030"
    rules = [
        PolicyRule(
            "coal-cofire",
            "2030",
            (Pathway("cofire40", (MinFuelHeatShare(gas, 0.4),)), _ccs()),
            STEAM_RULE_TECHS,
            EXISTING,
            retirement_classes=frozenset({S.RetireBefore2039_Cofire40From2030}),
            description="steam units retiring before 2039 co-fire 40% gas by heat input",
        ),
        PolicyRule(
            "coal-ccs",
            ccs_from,
            (_ccs(),),
            STEAM_RULE_TECHS,
            EXISTING,
            retirement_classes=frozenset({S.OperatePast2039_CCSFrom2032}),
            description="steam units operating past 2039 capture 90% of CO2",
        ),
    ]
    if classification == PROPOSED:
        rules.insert(
            0,
            PolicyRule(
                "coal-cf20",
                "2030",
                (Pathway("low-utilisation", (MaxCapacityFactor(0.2),)), _ccs()),
                STEAM_RULE_TECHS,
                EXISTING,
                retirement_classes=frozenset({S.RetireBefore2035_CF20}),
                description="steam units retiring by 2035 stay below 20% capacity factor",
            ),
        )
    return tuple(rules)


def new_gas_rule(threshold: float = 0.4) -> PolicyRule:
    return PolicyRule(
        "new-gas",
        "2035",
        (_ccs(), Pathway("non-baseload", (MaxCapacityFactor(threshold),))),
        NEW_GAS_TECHS,
        NEW_BUILD,
        description="new turbines capture CO2 or stay non-baseload",
    )


def existing_gas_rule(rule_id: str, min_mw: float | None, pathways: tuple[Pathway, ...]) -> PolicyRule:
    return PolicyRule(rule_id, "2035", pathways, EXISTING_GAS_TECHS, EXISTING, min_capacity_mw=min_mw)


def proposed_rules(gas: str = GAS, h2: str = H2) -> tuple[PolicyRule, ...]:
    return coal_rules(PROPOSED, gas) + (
        PolicyRule(
            "new-gas-cc-proposed",
            "2035",
            (_ccs(), Pathway("h2-cofire", (MaxCapacityFactor(0.5), MinFuelHeatShare(h2, 0.3)))),
            frozenset({T.NewNGCC, T.NGCC_CCS}),
            NEW_BUILD,
            description="new combined cycles: capture, or co-fire 30% hydrogen below 50% capacity factor",
        ),
        PolicyRule(
            "new-gas-ct-proposed",
            "2035",
            (_ccs(), Pathway("peaking", (MaxCapacityFactor(0.2),))),
            frozenset({T.NewNGCT}),
            NEW_BUILD,
            description="new combustion turbines stay below 20% capacity factor",
        ),
        existing_gas_rule("existing-gas-proposed", 300.0, (_ccs(), Pathway("non-baseload", (MaxCapacityFactor(0.5),)))),
    )


def all_gas_rule(rule_id: str, peaker: Pathway) -> PolicyRule:
    return PolicyRule(rule_id, "2035", (_ccs(), peaker), NEW_GAS_TECHS | EXISTING_GAS_TECHS, None)


def builtin_library(gas: str = GAS, h2: str = H2) -> dict[str, Scenario]:
    coal = coal_rules(FINAL, gas)
    final = coal + (new_gas_rule(),)
    baseload = Pathway("non-baseload", (MaxCapacityFactor(0.4),))
    lib = [
        Scenario(NO_REGULATIONS, description="benchmark without power plant rules"),
        Scenario(COAL_ONLY, coal, description="existing steam unit rule only"),
        Scenario(NEW_GAS_ONLY, (new_gas_rule(),), description="new turbine rule only"),
        Scenario(COAL_NEW_GAS, final, description="final rules"),
        Scenario(
            COAL_ALL_GAS,
            final + (existing_gas_rule("existing-gas-large", 300.0, (_ccs(), baseload)),),
            description="final rules plus large existing baseload turbines",
        ),
        Scenario(PROPOSED_RULES, proposed_rules(gas, h2), coal_classification=PROPOSED, description="proposed rules"),
        Scenario(CO2_CAP, co2_cap_from=COAL_NEW_GAS, description="sector cap equal to final-rule emissions"),
        Scenario(
            FINAL_BASELOAD_EXISTING,
            final + (existing_gas_rule("existing-gas-baseload", None, (_ccs(), baseload)),),
            description="final rules plus all existing baseload turbines",
        ),
        Scenario(
            FINAL_ALL_EXISTING,
            final + (existing_gas_rule("existing-gas-all", None, (_ccs(),)),),
            description="final rules plus capture on every existing turbine",
        ),
        Scenario(
            CCS_ONLY,
            coal + (all_gas_rule("gas-non-peaker-ccs", Pathway("peaker", (MaxCapacityFactor(0.2),))),),
            description="every non-peaking turbine captures CO2",
        ),
        Scenario(
            CCS_H2,
            coal + (all_gas_rule("gas-ccs-h2", Pathway("h2-peaker", (MaxCapacityFactor(0.2), MinFuelHeatShare(h2, 0.3)))),),
            description="non-peakers capture CO2, peakers co-fire 30% hydrogen",
        ),
    ]
    return {s.name: s for s in lib}


# -- serialisation ------------------------------------------------------
_CONSTRAINT_TYPES = {
    "MaxCapacityFactor": (MaxCapacityFactor, ("gamma",)),
    "MinFuelHeatShare": (MinFuelHeatShare, ("fuel", "share")),
    "RequireCapture": (RequireCapture, ("rate",)),
    "MustRetireBy": (MustRetireBy, ("period",)),
    "MaxEmissionRate": (MaxEmissionRate, ("rate",)),
}


class ScenarioFileError(ValueError):
    pass


def _constraint_to_dict(con) -> dict[str, Any]:
    name = type(con).__name__
    _, attrs = _CONSTRAINT_TYPES[name]
    return {"type": name, **{a: getattr(con, a) for a in attrs}}


def scenario_to_dict(s: Scenario) -> dict[str, Any]:
    tc = asdict(s.tax_credits)
    tc["credit_modes"] = dict(sorted(tc["credit_modes"].items()))
    return {
        "name": s.name,
        "description": s.description,
        "coal_classification": s.coal_classification,
        "co2_cap": dict(s.co2_cap) if s.co2_cap is not None else None,
        "co2_cap_from": s.co2_cap_from,
        "sensitivity": {
            "fuel_price_case": s.fuel_price_case,
            "growth_case": s.growth_case,
            "nuclear_no_retirement": s.nuclear_no_retirement,
        },
        "tax_credits": tc,
        "rules": [
            {
                "id": r.id,
                "description": r.description,
                "applies_to": {
                    "tech_classes": sorted(t.value for t in r.tech_classes),
                    "vintage": r.vintage,
                    "min_capacity_mw": r.min_capacity_mw,
                    "retirement_classes": None
                    if r.retirement_classes is None
                    else sorted(c.value for c in r.retirement_classes),
                },
                "effective_from": r.effective_from,
                "pathways": [
                    {"name": p.name, "constraints": [_constraint_to_dict(c) for c in p.constraints]} for p in r.pathways
                ],
            }
            for r in s.rules
        ],
    }


def dump_scenario(s: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(s), sort_keys=False, allow_unicode=True, default_flow_style=False)


def _constraint_from_dict(d: dict[str, Any]):
    try:
        cls, attrs = _CONSTRAINT_TYPES[d["type"]]
    except KeyError:
        raise ScenarioFileError(f"unknown constraint type {d.get('type')!r}") from None
    kwargs = {a: d[a] for a in attrs}
    if "period" in kwargs:
        kwargs["period"] = str(kwargs["period"])
    return cls(**kwargs)


def scenario_from_dict(d: dict[str, Any]) -> Scenario:
    try:
        rules = []
        for r in d.get("rules") or []:
            ap = r.get("applies_to") or {}
            rc = ap.get("retirement_classes")
            rules.append(
                PolicyRule(
                    id=str(r["id"]),
                    effective_from=str(r["effective_from"]),
                    pathways=tuple(
                        Pathway(str(p["name"]), tuple(_constraint_from_dict(c) for c in p["constraints"]))
                        for p in r["pathways"]
                    ),
                    tech_classes=frozenset(TechClass(t) for t in ap.get("tech_classes") or ()),
                    vintage=ap.get("vintage"),
                    min_capacity_mw=ap.get("min_capacity_mw"),
                    retirement_classes=None if rc is None else frozenset(CoalSubcategory(c) for c in rc),
                    description=r.get("description", ""),
                )
            )
        tc_raw = dict(d.get("tax_credits") or {})
        known = {f.name for f in fields(TaxCreditSettings)}
        unknown = set(tc_raw) - known
        if unknown:
            raise ScenarioFileError(f"unknown tax_credits keys: {sorted(unknown)}")
        tc = TaxCreditSettings(**tc_raw)
        sens = d.get("sensitivity") or {}
        cap = d.get("co2_cap")
        return Scenario(
            name=str(d["name"]),
            rules=tuple(rules),
            co2_cap=None if cap is None else {str(k): float(v) for k, v in cap.items()},
            co2_cap_from=d.get("co2_cap_from"),
            tax_credits=tc,
            fuel_price_case=str(sens.get("fuel_price_case", "ref")),
            growth_case=str(sens.get("growth_case", "ref")),
            nuclear_no_retirement=bool(sens.get("nuclear_no_retirement", False)),
            coal_classification=str(d.get("coal_classification", FINAL)),
            description=str(d.get("description", "")),
        )
    except ScenarioFileError:
        raise
    except (KeyError, TypeError, ValueError, PolicyError) as exc:
        raise ScenarioFileError(f"invalid scenario document: {exc}") from exc


def load_scenario(text: str) -> Scenario:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioFileError(f"not valid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise ScenarioFileError("scenario document must be a mapping")
    return scenario_from_dict(doc)


def read_scenario(path: str | Path) -> Scenario:
    return load_scenario(Path(path).read_text(encoding="utf-8"))


def slug(name: str) -> str:
    out = "".join(ch.lower() if ch.isalnum() else "-" for ch in name)
    while "--" in out:
        out = out.replace("--", "-")
    return out.strip("-")


def export_library(directory: str | Path, library: dict[str, Scenario] | None = None) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    library = library or builtin_library()
    paths = []
    for i, name in enumerate(LIBRARY_ORDER):
        path = directory / f"{i:02d}-{slug(name)}.yaml"
        path.write_text(dump_scenario(library[name]), encoding="utf-8")
        paths.append(path)
    return paths


def with_sensitivity(s: Scenario, **changes) -> Scenario:
    return replace(s, **changes)
