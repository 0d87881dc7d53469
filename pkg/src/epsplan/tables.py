"""Read and write a system as a directory of delimited tables.

All files are UTF-8, comma separated, with one header row and a decimal
point.  Files marked optional may be absent.

  system.csv         key,value          baseline_2022_emissions (MtCO2), voll ($/MWh or "none")   optional
  periods.csv        label,years_represented,calendar_anchor,demand_scale
  time.csv           step,weight,duration,segment        segment = representative-week index
  zones.csv          zone
  demand.csv         step,<zone>...                      MW per step
  fuels.csv          fuel,emission_factor,default_price,is_hydrogen
  fuel_prices.csv    fuel,case,zone,period,price         zone may be empty (system-wide)    optional
  clusters.csv       id,zone,tech_class,capacity,vintage,first_period,max_new_capacity,
                     capture_rate,fixed_om,var_om,annuitized_capex,planned_retirement,
                     availability,asset_life             availability = number or "profile"
  heat_rates.csv     cluster,fuel,heat_rate              row order = allowed-fuel order
  retrofits.csv      variant,parent,ratio                                                    optional
  availability.csv   step,<cluster>...                   profiles for "profile" clusters     optional
  storage.csv        id,zone,power_capacity,energy_capacity,round_trip_efficiency,vintage,
                     first_period,max_new_power,fixed_om,var_om,annuitized_capex,
                     annuitized_capex_energy,duration_hours                                  optional
  electrolyzers.csv  id,zone,capacity,max_new_capacity,h2_yield,fixed_om,annuitized_capex,
                     first_period                                                            optional
  lines.csv          id,from_zone,to_zone,capacity,max_expansion,expansion_cost,loss_fraction optional
  build_limits.csv   zone,tech_class,period,case,max_mw                                      optional
  h2_demand.csv      zone,period,mmbtu                                                       optional

Empty cells in optional columns mean "not set".
"""
from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .system import (
    EXISTING,
    Electrolyzer,
    Fuel,
    GeneratorCluster,
    Period,
    StorageCluster,
    SystemSpec,
    TechClass,
    TimeStructure,
    TransmissionLine,
    Zone,
)


class InputError(ValueError):
    def __init__(self, where: str, message: str):
        self.where = where
        super().__init__(f"{where}: {message}")


def _read(directory: Path, name: str, columns: Sequence[str], optional: bool = False) -> list[tuple[int, dict]]:
    path = directory / name
    if not path.exists():
        if optional:
            return []
        raise InputError(name, "file not found")
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in columns if c not in header]
        if missing:
            raise InputError(name, f"missing column(s) {', '.join(missing)}")
        return [(i + 2, row) for i, row in enumerate(reader)]


def _wide(directory: Path, name: str, optional: bool = False) -> tuple[list[str], np.ndarray]:
    path = directory / name
    if not path.exists():
        if optional:
            return [], np.zeros((0, 0))
        raise InputError(name, "file not found")
    with path.open(encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:1] != ["step"]:
        raise InputError(name, "first column must be 'step'")
    cols = rows[0][1:]
    try:
        data = np.array([[float(v) for v in r[1:]] for r in rows[1:]], dtype=float).reshape(len(rows) - 1, len(cols))
    except ValueError as exc:
        raise InputError(name, f"non-numeric value ({exc})") from None
    return cols, data


def _num(value: str, where: str, default: float | None = None) -> float | None:
    if value is None or value.strip() == "":
        if default is None:
            raise InputError(where, "value required")
        return default
    try:
        return float(value)
    except ValueError:
        raise InputError(where, f"not a number: {value!r}") from None


def _opt(value: str | None) -> str | None:
    return None if value is None or value.strip() == "" else value.strip()


def _bool(value: str | None) -> bool:
    return (value or "").strip().lower() in ("1", "true", "yes")


def read_system(directory: str | Path) -> SystemSpec:
    d = Path(directory)
    if not d.is_dir():
        raise InputError(str(d), "system directory not found")

    settings = {row["key"]: row["value"] for _, row in _read(d, "system.csv", ["key", "value"], optional=True)}
    periods = tuple(
        Period(
            row["label"],
            int(_num(row["years_represented"], f"periods.csv:{ln}")),
            int(_num(row["calendar_anchor"], f"periods.csv:{ln}")),
            _num(row.get("demand_scale"), f"periods.csv:{ln}", 1.0),
        )
        for ln, row in _read(d, "periods.csv", ["label", "years_represented", "calendar_anchor"])
    )
    trows = _read(d, "time.csv", ["step", "weight", "duration", "segment"])
    weights = np.array([_num(r["weight"], f"time.csv:{ln}") for ln, r in trows])
    durations = np.array([_num(r["duration"], f"time.csv:{ln}") for ln, r in trows])
    seg_ids = [r["segment"] for _, r in trows]
    segments: list[int] = []
    for i, sid in enumerate(seg_ids):
        if i == 0 or sid != seg_ids[i - 1]:
            segments.append(0)
        segments[-1] += 1
    time = TimeStructure(weights, tuple(segments), durations)

    zone_ids = [row["zone"] for _, row in _read(d, "zones.csv", ["zone"])]
    dcols, demand = _wide(d, "demand.csv")
    for z in zone_ids:
        if z not in dcols:
            raise InputError("demand.csv", f"no column for zone {z!r}")
    limits: dict[str, dict] = defaultdict(dict)
    for ln, row in _read(d, "build_limits.csv", ["zone", "tech_class", "period", "case", "max_mw"], optional=True):
        limits[row["zone"]][(row["tech_class"], row["period"], row["case"] or "ref")] = _num(row["max_mw"], f"build_limits.csv:{ln}")
    h2: dict[str, dict] = defaultdict(dict)
    for ln, row in _read(d, "h2_demand.csv", ["zone", "period", "mmbtu"], optional=True):
        h2[row["zone"]][row["period"]] = _num(row["mmbtu"], f"h2_demand.csv:{ln}")
    zones = tuple(
        Zone(z, demand[:, dcols.index(z)], dict(limits.get(z, {})), dict(h2.get(z, {}))) for z in zone_ids
    )

    prices: dict[str, dict] = defaultdict(dict)
    for ln, row in _read(d, "fuel_prices.csv", ["fuel", "case", "zone", "period", "price"], optional=True):
        prices[row["fuel"]][(row["case"] or "ref", row["zone"] or "", row["period"])] = _num(row["price"], f"fuel_prices.csv:{ln}")
    fuels = tuple(
        Fuel(
            row["fuel"],
            _num(row["emission_factor"], f"fuels.csv:{ln}"),
            dict(prices.get(row["fuel"], {})),
            _num(row.get("default_price"), f"fuels.csv:{ln}", 0.0),
            _bool(row.get("is_hydrogen")),
        )
        for ln, row in _read(d, "fuels.csv", ["fuel", "emission_factor"])
    )

    hr: dict[str, dict[str, float]] = defaultdict(dict)
    for ln, row in _read(d, "heat_rates.csv", ["cluster", "fuel", "heat_rate"]):
        hr[row["cluster"]][row["fuel"]] = _num(row["heat_rate"], f"heat_rates.csv:{ln}")
    parents: dict[str, list[tuple[str, float]]] = defaultdict(list)
    for ln, row in _read(d, "retrofits.csv", ["variant", "parent", "ratio"], optional=True):
        parents[row["variant"]].append((row["parent"], _num(row["ratio"], f"retrofits.csv:{ln}")))
    acols, avail = _wide(d, "availability.csv", optional=True)

    clusters = []
    for ln, row in _read(d, "clusters.csv", ["id", "zone", "tech_class", "capacity"]):
        where = f"clusters.csv:{ln}"
        cid = row["id"]
        try:
            tech = TechClass(row["tech_class"])
        except ValueError:
            raise InputError(where, f"unknown tech_class {row['tech_class']!r}") from None
        a = (row.get("availability") or "1").strip()
        if a == "profile":
            if cid not in acols:
                raise InputError("availability.csv", f"no profile column for cluster {cid!r}")
            availability = avail[:, acols.index(cid)]
        else:
            availability = _num(a, where)
        rates = hr.get(cid, {})
        clusters.append(
            GeneratorCluster(
                id=cid,
                zone=row["zone"],
                tech_class=tech,
                heat_rates=dict(rates),
                allowed_fuels=tuple(rates),
                capacity=_num(row["capacity"], where, 0.0),
                vintage=_opt(row.get("vintage")) or EXISTING,
                first_period=_opt(row.get("first_period")),
                max_new_capacity=_num(row.get("max_new_capacity"), where, 0.0),
                capture_rate=_num(row.get("capture_rate"), where, 0.0),
                fixed_om=_num(row.get("fixed_om"), where, 0.0),
                var_om=_num(row.get("var_om"), where, 0.0),
                annuitized_capex=_num(row.get("annuitized_capex"), where, 0.0),
                planned_retirement=_opt(row.get("planned_retirement")),
                availability=availability,
                retrofit_parents=tuple(parents.get(cid, ())),
                asset_life=int(_num(row.get("asset_life"), where, 30.0)),
            )
        )

    storage = tuple(
        StorageCluster(
            id=row["id"],
            zone=row["zone"],
            power_capacity=_num(row.get("power_capacity"), f"storage.csv:{ln}", 0.0),
            energy_capacity=_num(row.get("energy_capacity"), f"storage.csv:{ln}", 0.0),
            round_trip_efficiency=_num(row.get("round_trip_efficiency"), f"storage.csv:{ln}", 0.85),
            vintage=_opt(row.get("vintage")) or EXISTING,
            first_period=_opt(row.get("first_period")),
            max_new_power=_num(row.get("max_new_power"), f"storage.csv:{ln}", 0.0),
            fixed_om=_num(row.get("fixed_om"), f"storage.csv:{ln}", 0.0),
            var_om=_num(row.get("var_om"), f"storage.csv:{ln}", 0.0),
            annuitized_capex=_num(row.get("annuitized_capex"), f"storage.csv:{ln}", 0.0),
            annuitized_capex_energy=_num(row.get("annuitized_capex_energy"), f"storage.csv:{ln}", 0.0),
            duration_hours=_num(row.get("duration_hours"), f"storage.csv:{ln}", 4.0),
        )
        for ln, row in _read(d, "storage.csv", ["id", "zone"], optional=True)
    )
    electrolyzers = tuple(
        Electrolyzer(
            id=row["id"],
            zone=row["zone"],
            capacity=_num(row.get("capacity"), f"electrolyzers.csv:{ln}", 0.0),
            max_new_capacity=_num(row.get("max_new_capacity"), f"electrolyzers.csv:{ln}", 0.0),
            h2_yield=_num(row.get("h2_yield"), f"electrolyzers.csv:{ln}", 2.4),
            fixed_om=_num(row.get("fixed_om"), f"electrolyzers.csv:{ln}", 0.0),
            annuitized_capex=_num(row.get("annuitized_capex"), f"electrolyzers.csv:{ln}", 0.0),
            first_period=_opt(row.get("first_period")),
        )
        for ln, row in _read(d, "electrolyzers.csv", ["id", "zone"], optional=True)
    )
    lines = tuple(
        TransmissionLine(
            id=row["id"],
            from_zone=row["from_zone"],
            to_zone=row["to_zone"],
            capacity=_num(row["capacity"], f"lines.csv:{ln}", 0.0),
            max_expansion=_num(row.get("max_expansion"), f"lines.csv:{ln}", 0.0),
            expansion_cost=_num(row.get("expansion_cost"), f"lines.csv:{ln}", 0.0),
            loss_fraction=_num(row.get("loss_fraction"), f"lines.csv:{ln}", 0.0),
        )
        for ln, row in _read(d, "lines.csv", ["id", "from_zone", "to_zone", "capacity"], optional=True)
    )
    voll_raw = (settings.get("voll") or "").strip().lower()
    voll = None if voll_raw == "none" else _num(settings.get("voll"), "system.csv:voll", 5000.0)
    return SystemSpec(
        zones=zones,
        fuels=fuels,
        clusters=tuple(clusters),
        time=time,
        periods=periods,
        storage=storage,
        electrolyzers=electrolyzers,
        lines=lines,
        baseline_2022_emissions=_num(settings.get("baseline_2022_emissions"), "system.csv", 0.0),
        voll=voll,
    )


# -- writing ------------------------------------------------------------
def _f(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_f(v) for v in r])


def write_system(spec: SystemSpec, directory: str | Path) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    n = spec.time.n
    _write(d / "system.csv", ["key", "value"], [
        ["baseline_2022_emissions", float(spec.baseline_2022_emissions)],
        ["voll", "none" if spec.voll is None else float(spec.voll)],
    ])
    _write(d / "periods.csv", ["label", "years_represented", "calendar_anchor", "demand_scale"],
           [[p.label, p.years_represented, p.calendar_anchor, float(p.demand_scale)] for p in spec.periods])
    seg = np.concatenate([np.full(b - a, i) for i, (a, b) in enumerate(spec.time.segment_bounds())]) if n else []
    _write(d / "time.csv", ["step", "weight", "duration", "segment"],
           [[t, float(spec.time.weights[t]), float(spec.time.durations[t]), int(seg[t])] for t in range(n)])
    _write(d / "zones.csv", ["zone"], [[z.id] for z in spec.zones])
    _write(d / "demand.csv", ["step", *(z.id for z in spec.zones)],
           [[t, *(float(z.demand[t]) for z in spec.zones)] for t in range(n)])
    _write(d / "fuels.csv", ["fuel", "emission_factor", "default_price", "is_hydrogen"],
           [[f.id, float(f.emission_factor), float(f.default_price), f.is_hydrogen] for f in spec.fuels])
    _write(d / "fuel_prices.csv", ["fuel", "case", "zone", "period", "price"],
           [[f.id, case, zone, per, float(p)] for f in spec.fuels for (case, zone, per), p in sorted(f.prices.items())])
    profiles = [c for c in spec.clusters if not np.isscalar(c.availability)]
    _write(d / "clusters.csv", [
        "id", "zone", "tech_class", "capacity", "vintage", "first_period", "max_new_capacity", "capture_rate",
        "fixed_om", "var_om", "annuitized_capex", "planned_retirement", "availability", "asset_life",
    ], [[
        c.id, c.zone, c.tech_class.value, float(c.capacity), c.vintage, c.first_period, float(c.max_new_capacity),
        float(c.capture_rate), float(c.fixed_om), float(c.var_om), float(c.annuitized_capex), c.planned_retirement,
        float(c.availability) if np.isscalar(c.availability) else "profile", c.asset_life,
    ] for c in spec.clusters])
    _write(d / "heat_rates.csv", ["cluster", "fuel", "heat_rate"],
           [[c.id, f, float(c.heat_rates[f])] for c in spec.clusters for f in c.allowed_fuels])
    _write(d / "retrofits.csv", ["variant", "parent", "ratio"],
           [[c.id, p, float(r)] for c in spec.clusters for p, r in c.retrofit_parents])
    _write(d / "availability.csv", ["step", *(c.id for c in profiles)],
           [[t, *(float(c.availability[t]) for c in profiles)] for t in range(n)])
    _write(d / "storage.csv", [
        "id", "zone", "power_capacity", "energy_capacity", "round_trip_efficiency", "vintage", "first_period",
        "max_new_power", "fixed_om", "var_om", "annuitized_capex", "annuitized_capex_energy", "duration_hours",
    ], [[
        s.id, s.zone, float(s.power_capacity), float(s.energy_capacity), float(s.round_trip_efficiency), s.vintage,
        s.first_period, float(s.max_new_power), float(s.fixed_om), float(s.var_om), float(s.annuitized_capex),
        float(s.annuitized_capex_energy), float(s.duration_hours),
    ] for s in spec.storage])
    _write(d / "electrolyzers.csv", [
        "id", "zone", "capacity", "max_new_capacity", "h2_yield", "fixed_om", "annuitized_capex", "first_period",
    ], [[
        e.id, e.zone, float(e.capacity), float(e.max_new_capacity), float(e.h2_yield), float(e.fixed_om),
        float(e.annuitized_capex), e.first_period,
    ] for e in spec.electrolyzers])
    _write(d / "lines.csv", ["id", "from_zone", "to_zone", "capacity", "max_expansion", "expansion_cost", "loss_fraction"],
           [[ln.id, ln.from_zone, ln.to_zone, float(ln.capacity), float(ln.max_expansion), float(ln.expansion_cost),
             float(ln.loss_fraction)] for ln in spec.lines])
    _write(d / "build_limits.csv", ["zone", "tech_class", "period", "case", "max_mw"],
           [[z.id, tech, per, case, float(mw)] for z in spec.zones for (tech, per, case), mw in sorted(z.build_limits.items())])
    _write(d / "h2_demand.csv", ["zone", "period", "mmbtu"],
           [[z.id, per, float(v)] for z in spec.zones for per, v in sorted(z.h2_demand.items())])
    return d


def read_share_table(path: str | Path, known: Callable[[str], bool]) -> dict[str, float]:
    """Reference generation shares: one row, columns named by tech class."""
    path = Path(path)
    if not path.exists():
        raise InputError(str(path), "file not found")
    with path.open(encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    if len(rows) != 1:
        raise InputError(path.name, "expected exactly one data row of shares")
    out = {}
    for col, val in rows[0].items():
        if not known(col):
            raise InputError(path.name, f"unknown tech column {col!r}")
        out[col] = _num(val, f"{path.name}:{col}")
    return out
