from __future__ import annotations

import numpy as np
import pytest

from epsplan.fixtures import single_zone_spec, two_zone_spec
from epsplan.system import HOURS_PER_YEAR, TimeStructure, Zone, validate_system
from epsplan.tables import InputError, read_share_table, read_system, write_system
from epsplan.timeseries import WEEK, TimeSeriesError, aggregate_weeks, parse_hours


def _files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_round_trip_is_byte_stable(tmp_path):
    spec = two_zone_spec(step_hours=8, n_weeks=1)
    a = write_system(spec, tmp_path / "a")
    back = read_system(a)
    b = write_system(back, tmp_path / "b")
    assert _files(a) == _files(b)
    assert [c.id for c in back.clusters] == [c.id for c in spec.clusters]
    assert np.array_equal(back.zones[0].demand, spec.zones[0].demand)
    assert np.array_equal(back.time.weights, spec.time.weights)
    wind = {c.id: c for c in back.clusters}["B.wind"]
    assert np.array_equal(wind.availability, {c.id: c for c in spec.clusters}["B.wind"].availability)
    validate_system(back)


def test_optional_files_may_be_absent(tmp_path):
    d = write_system(single_zone_spec(), tmp_path)
    for name in ("fuel_prices.csv", "retrofits.csv", "availability.csv", "storage.csv", "electrolyzers.csv",
                 "lines.csv", "build_limits.csv", "h2_demand.csv", "system.csv"):
        (d / name).unlink()
    spec = read_system(d)
    assert spec.clusters[0].id == "Z.gas"
    assert spec.lines == () and spec.storage == ()


def test_missing_directory(tmp_path):
    with pytest.raises(InputError):
        read_system(tmp_path / "absent")


def test_missing_required_file(tmp_path):
    d = write_system(single_zone_spec(), tmp_path)
    (d / "clusters.csv").unlink()
    with pytest.raises(InputError) as info:
        read_system(d)
    assert info.value.where == "clusters.csv"


def test_missing_column(tmp_path):
    d = write_system(single_zone_spec(), tmp_path)
    (d / "zones.csv").write_text("name\nZ\n", encoding="utf-8")
    with pytest.raises(InputError, match="zone"):
        read_system(d)


def test_non_numeric_value_names_the_line(tmp_path):
    d = write_system(single_zone_spec(), tmp_path)
    lines = (d / "periods.csv").read_text(encoding="utf-8").splitlines()
    lines[1] = lines[1].replace(",5,", ",five,")
    (d / "periods.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    with pytest.raises(InputError, match="periods.csv:2"):
        read_system(d)


def test_unknown_tech_class(tmp_path):
    d = write_system(single_zone_spec(), tmp_path)
    text = (d / "clusters.csv").read_text(encoding="utf-8").replace("ExistingNGCC", "Fusion")
    (d / "clusters.csv").write_text(text, encoding="utf-8")
    with pytest.raises(InputError, match="Fusion"):
        read_system(d)


def test_share_table(tmp_path):
    known = {"CoalSteam", "ExistingNGCC"}.__contains__
    p = tmp_path / "ref.csv"
    p.write_text("CoalSteam,ExistingNGCC\n0.25,0.75\n", encoding="utf-8")
    assert read_share_table(p, known) == {"CoalSteam": 0.25, "ExistingNGCC": 0.75}
    p.write_text("CoalSteam,Tidal\n0.25,0.75\n", encoding="utf-8")
    with pytest.raises(InputError, match="Tidal"):
        read_share_table(p, known)
    p.write_text("CoalSteam\n0.5\n0.5\n", encoding="utf-8")
    with pytest.raises(InputError):
        read_share_table(p, known)


# -- representative weeks -----------------------------------------------
def test_parse_hours():
    assert parse_hours("full") is None
    assert parse_hours("weeks:8") == 8
    for bad in ("weeks:0", "weeks:x", "days:3", ""):
        with pytest.raises(TimeSeriesError):
            parse_hours(bad)


def _hourly_year(seed=3):
    rng = np.random.default_rng(seed)
    n = int(HOURS_PER_YEAR)
    hours = np.arange(n)
    demand = 5.0 + 2.0 * np.sin(2 * np.pi * hours / n) + rng.normal(0.0, 0.2, n)
    spec = single_zone_spec(n_steps=n, capacity=20.0)
    return spec.replace(zones=(Zone("Z", demand),), time=TimeStructure.uniform(n))


def test_aggregation_of_full_year():
    spec = _hourly_year()
    agg = aggregate_weeks(spec, 8)
    assert agg.time.n == 8 * WEEK
    assert agg.time.weights.sum() == pytest.approx(HOURS_PER_YEAR, rel=1e-12)
    assert agg.zones[0].demand.shape == (8 * WEEK,)
    # every kept hour is an original hour
    original = set(np.round(spec.zones[0].demand, 12).tolist())
    assert set(np.round(agg.zones[0].demand, 12).tolist()) <= original
    validate_system(agg)


def test_aggregation_is_deterministic():
    spec = _hourly_year()
    a, b = aggregate_weeks(spec, 5), aggregate_weeks(spec, 5)
    assert np.array_equal(a.zones[0].demand, b.zones[0].demand)
    assert np.array_equal(a.time.weights, b.time.weights)


def test_pre_aggregated_input_is_unchanged():
    spec = two_zone_spec(step_hours=8, n_weeks=1)
    assert aggregate_weeks(spec, 8) is spec


def test_more_weeks_than_the_year_keeps_all_weeks():
    spec = _hourly_year()
    agg = aggregate_weeks(spec, 60)
    assert agg.time.n == (int(HOURS_PER_YEAR) // WEEK) * WEEK
    assert agg.time.weights.sum() == pytest.approx(HOURS_PER_YEAR, rel=1e-12)
    assert np.allclose(agg.time.weights, agg.time.weights[0])
