from __future__ import annotations

from dataclasses import replace
from pathlib import Path

import pytest

from epsplan.scenarios import (
    LIBRARY_ORDER,
    ScenarioFileError,
    dump_scenario,
    export_library,
    load_scenario,
    read_scenario,
    slug,
)

GOLDEN = Path(__file__).resolve().parents[1] / "scenarios"


def test_library_has_eleven_named_scenarios(library):
    assert list(library) == list(LIBRARY_ORDER)
    assert len(library) == 11


@pytest.mark.parametrize("name", LIBRARY_ORDER)
def test_yaml_round_trip(library, name):
    s = library[name]
    assert load_scenario(dump_scenario(s)) == s


def test_export_matches_golden_files(tmp_path):
    paths = export_library(tmp_path)
    assert [p.name for p in paths] == sorted(p.name for p in GOLDEN.glob("*.yaml"))
    for p in paths:
        assert p.read_bytes() == (GOLDEN / p.name).read_bytes(), p.name


def test_golden_files_load_to_library(library):
    loaded = {s.name: s for s in (read_scenario(p) for p in sorted(GOLDEN.glob("*.yaml")))}
    assert loaded == library


def test_sensitivity_fields_round_trip(library):
    s = replace(library["Coal + New Gas"], fuel_price_case="high", growth_case="Con", nuclear_no_retirement=True,
                tax_credits=replace(library["Coal + New Gas"].tax_credits, asset_life=20), co2_cap={"2040": 1.5})
    assert load_scenario(dump_scenario(s)) == s


@pytest.mark.parametrize(
    "text",
    [
        "- not a mapping\n",
        "name: x\nrules:\n- id: r\n  effective_from: '2025'\n  pathways:\n  - name: p\n    constraints:\n    - type: Bogus\n",
        "name: x\ntax_credits:\n  nonsense: 1\n",
        "name: x\nrules:\n- id: r\n  effective_from: '2025'\n  pathways: []\n",
        "name: [unclosed\n",
    ],
)
def test_bad_documents_raise(text):
    with pytest.raises(ScenarioFileError):
        load_scenario(text)


def test_slug():
    assert slug("Coal + New Gas") == "coal-new-gas"
    assert slug("CCS + H2") == "ccs-h2"
