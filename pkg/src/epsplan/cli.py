"""Command-line entry point.

Exit codes: 0 success, 1 input error, 2 infeasible (or unbounded) stage.
On failure an ``error.json`` document is written to the output directory
when one was given, and a one-line diagnostic goes to stderr.
"""
from __future__ import annotations

import argparse
import csv
import itertools
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import yaml

from .builder import BuildError, initial_carryover
from .credits import InvalidLife
from .driver import DriverError, RunOptions, StageInfeasible, run_stage, run_study
from .lp import LPError
from .policy import PolicyError, Scenario
from .reporting import (
    WINDOW_ACTIVE,
    WINDOW_ALL,
    NotDefined,
    abatement_cost,
    export_tables,
    weighted_total,
    write_comparison,
)
from .scenarios import ScenarioFileError, builtin_library, export_library, read_scenario, slug
from .solver import SolverError
from .system import SystemValidationError, SystemViolation, TechClass, validate_system
from .tables import InputError, read_share_table, read_system, write_system
from .timeseries import TimeSeriesError, aggregate_weeks, parse_hours

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE = 0, 1, 2
INPUT_ERRORS = (
    InputError,
    ScenarioFileError,
    SystemValidationError,
    SystemViolation,
    PolicyError,
    TimeSeriesError,
    BuildError,
    LPError,
    InvalidLife,
    DriverError,
    FileNotFoundError,
    ValueError,
    StageInfeasible,
    SolverError,
)

SWEEP_AXES = ("fuel_price", "growth", "credits")
CREDIT_POINTS = ("ref", "ccs-20yr", "nuclear-no-retire")


class UsageError(ValueError):
    pass


HANDLED = INPUT_ERRORS + (UsageError, OSError)


def _error(out_dir: str | None, code: int, doc: dict) -> int:
    print(f"error: {doc.get('message')}", file=sys.stderr)
    if out_dir:
        path = Path(out_dir)
        path.mkdir(parents=True, exist_ok=True)
        (path / "error.json").write_text(json.dumps({"exit_code": code, **doc}, indent=1, sort_keys=True) + "\n",
                                         encoding="utf-8")
    return code


def _handle(out_dir: str | None, exc: BaseException) -> int:
    if isinstance(exc, StageInfeasible):
        return _error(out_dir, EXIT_INFEASIBLE, {
            "error": "infeasible",
            "message": str(exc),
            "scenario": exc.scenario,
            "period": exc.period,
            "status": exc.status,
            "suspected_rows": exc.suspected,
        })
    return _error(out_dir, EXIT_INPUT, {"error": "input", "type": type(exc).__name__, "message": str(exc)})


def _options(args) -> RunOptions:
    return RunOptions(solver=args.solver, use_voll=not args.no_voll, cache_dir=args.cache_dir)


def load_system(system_dir: str, hours: str):
    spec = read_system(system_dir)
    n = parse_hours(hours)
    if n is not None:
        spec = aggregate_weeks(spec, n)
    return validate_system(spec)


def load_scenarios(path: str) -> list[Scenario]:
    """A YAML file, a directory of YAML files, or ``builtin`` / ``builtin:<name>``."""
    if path == "builtin":
        return list(builtin_library().values())
    if path.startswith("builtin:"):
        lib = builtin_library()
        name = path.split(":", 1)[1]
        if name not in lib:
            raise UsageError(f"no built-in scenario named {name!r}")
        return [lib[name]]
    p = Path(path)
    if p.is_dir():
        files = sorted(p.glob("*.yaml")) + sorted(p.glob("*.yml"))
        if not files:
            raise UsageError(f"no scenario files in {p}")
        return [read_scenario(f) for f in files]
    if not p.exists():
        raise UsageError(f"scenario file {p} not found")
    return [read_scenario(p)]


def with_dependencies(scenarios: list[Scenario], source: str) -> list[Scenario]:
    """Add scenarios referenced by ``co2_cap_from`` from the same source or the built-in library."""
    names = {s.name for s in scenarios}
    pool = {}
    src = Path(source)
    if src.is_file():
        for f in sorted(src.parent.glob("*.yaml")):
            try:
                s = read_scenario(f)
            except ScenarioFileError:
                continue
            pool.setdefault(s.name, s)
    for name, s in builtin_library().items():
        pool.setdefault(name, s)
    out = list(scenarios)
    queue = list(scenarios)
    while queue:
        s = queue.pop()
        ref = s.co2_cap_from
        if ref and ref not in names:
            if ref not in pool:
                raise UsageError(f"{s.name!r} takes its cap from unknown scenario {ref!r}")
            dep = replace(
                pool[ref],
                tax_credits=s.tax_credits,
                fuel_price_case=s.fuel_price_case,
                growth_case=s.growth_case,
                nuclear_no_retirement=s.nuclear_no_retirement,
            )
            out.insert(0, dep)
            names.add(ref)
            queue.append(dep)
    return out


# -- run ----------------------------------------------------------------
def cmd_run(args) -> int:
    try:
        system = load_system(args.system_dir, args.hours)
        requested = load_scenarios(args.scenario_file)
        scenarios = with_dependencies(requested, args.scenario_file)
        results = run_study(system, scenarios, _options(args), jobs=args.jobs)
        out = Path(args.out_dir)
        for s in requested:
            export_tables(results[s.name], out / slug(s.name))
        if len(results) > 1:
            write_comparison(results, out / "comparison.csv", window=args.abatement_window)
    except HANDLED as exc:
        return _handle(args.out_dir, exc)
    return EXIT_OK


# -- validate -----------------------------------------------------------
def cmd_validate(args) -> int:
    try:
        system = load_system(args.system_dir, args.hours)
        period = args.period or system.periods[0].label
        if period not in system.period:
            raise UsageError(f"unknown period {period!r}")
        techs = {c.id: c.tech_class.value for c in system.clusters}
        reference = None
        if args.reference:
            reference = read_share_table(args.reference, lambda name: name in TechClass.__members__)
        options = replace(_options(args), dispatch_only=True)
        stage = run_stage(system, Scenario("No Regulations", fuel_price_case=args.fuel_price_case), period,
                          initial_carryover(system), {}, options)
        energy: dict[str, list[float]] = {}
        for (cid, _f), mwh in stage.generation.items():
            energy.setdefault(techs[cid], []).append(mwh)
        totals = {t: math.fsum(v) for t, v in sorted(energy.items())}
        grand = math.fsum(totals.values())
        shares = {t: (v / grand if grand > 0 else 0.0) for t, v in totals.items()}
        out = Path(args.out_dir) if args.out_dir else None
        rows = []
        worst = 0.0
        for tech in sorted(set(shares) | set(reference or {})):
            s = shares.get(tech, 0.0)
            ref = None if reference is None else reference.get(tech, 0.0)
            dev = None if ref is None else abs(s - ref)
            if dev is not None:
                worst = max(worst, dev)
            rows.append([tech, totals.get(tech, 0.0), s, ref, dev])
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
            with (out / "generation_shares.csv").open("w", encoding="utf-8", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["tech", "generation_mwh", "share", "reference_share", "abs_deviation"])
                for r in rows:
                    w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in r])
        for tech, _e, s, ref, dev in rows:
            extra = "" if ref is None else f"  reference {ref:.4f}  deviation {dev:.4f}"
            print(f"{tech:16s} share {s:.4f}{extra}")
        if reference is not None:
            print(f"max absolute share deviation: {worst:.6f}")
    except HANDLED as exc:
        return _handle(args.out_dir, exc)
    return EXIT_OK


# -- sweep --------------------------------------------------------------
@dataclass(frozen=True)
class SweepPoint:
    fuel_price: str = "ref"
    growth: str = "ref"
    credits: str = "ref"

    @property
    def label(self) -> str:
        return f"fuel_price={self.fuel_price}__growth={self.growth}__credits={self.credits}"

    def apply(self, s: Scenario) -> Scenario:
        tc = s.tax_credits
        nuclear = s.nuclear_no_retirement
        if self.credits == "ccs-20yr":
            tc = replace(tc, asset_life=20)
        elif self.credits == "nuclear-no-retire":
            nuclear = True
        return replace(s, fuel_price_case=self.fuel_price, growth_case=self.growth, tax_credits=tc,
                       nuclear_no_retirement=nuclear)


def parse_sweep(doc) -> list[SweepPoint]:
    if not isinstance(doc, dict) or not doc:
        raise UsageError("sweep spec is empty")
    points = []
    if "points" in doc:
        for p in doc["points"] or []:
            unknown = set(p) - set(SWEEP_AXES)
            if unknown:
                raise UsageError(f"unknown sweep axis {sorted(unknown)}")
            points.append(SweepPoint(**{k: str(v) for k, v in p.items()}))
    else:
        axes = doc.get("axes", doc)
        unknown = set(axes) - set(SWEEP_AXES)
        if unknown:
            raise UsageError(f"unknown sweep axis {sorted(unknown)}")
        values = [[str(v) for v in (axes.get(a) or ["ref"])] for a in SWEEP_AXES]
        if not any(axes.get(a) for a in SWEEP_AXES):
            raise UsageError("sweep spec lists no values")
        points = [SweepPoint(*combo) for combo in itertools.product(*values)]
    if not points:
        raise UsageError("sweep spec lists no points")
    for p in points:
        if p.credits not in CREDIT_POINTS:
            raise UsageError(f"unknown credits point {p.credits!r}; use one of {', '.join(CREDIT_POINTS)}")
    return points


def _sweep_point(job) -> tuple[str, dict]:
    system, scenarios, requested, options, point, out = job
    applied = [point.apply(s) for s in scenarios]
    results = run_study(system, applied, options, keep_detail=False)
    for name in requested:
        export_tables(results[name], out / point.label / slug(name))
    return point.label, {n: results[n] for n in requested}


def cmd_sweep(args) -> int:
    try:
        spec_path = Path(args.sweep_spec)
        if not spec_path.exists():
            raise UsageError(f"sweep spec {spec_path} not found")
        points = parse_sweep(yaml.safe_load(spec_path.read_text(encoding="utf-8")))
        system = load_system(args.system_dir, args.hours)
        requested = load_scenarios(args.scenario_file)
        scenarios = with_dependencies(requested, args.scenario_file)
        out = Path(args.out_dir)
        options = _options(args)
        jobs = [(system, scenarios, [s.name for s in requested], options, p, out) for p in points]
        if args.jobs > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                done = list(pool.map(_sweep_point, jobs))
        else:
            done = [_sweep_point(j) for j in jobs]
        out.mkdir(parents=True, exist_ok=True)
        with (out / "sweep_comparison.csv").open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["point", "scenario", "period", "objective", "emissions_t", "weighted_cost", "weighted_emissions_t"])
            for label, res in done:
                for name, r in res.items():
                    wc, we = weighted_total(r, "objective"), weighted_total(r, "emissions")
                    for s in r.stages:
                        w.writerow([label, name, s.period, repr(s.objective), repr(s.emissions), repr(wc), repr(we)])
    except HANDLED as exc:
        return _handle(args.out_dir, exc)
    return EXIT_OK


# -- compare ------------------------------------------------------------
@dataclass
class _StageRow:
    period: str
    years: int
    objective: float
    emissions: float
    policy_rows: int


@dataclass
class _ResultRows:
    scenario: str
    stages: list[_StageRow]


def _read_result(directory: Path) -> _ResultRows:
    path = directory / "stages.csv"
    if not path.exists():
        raise UsageError(f"{path} not found")
    with path.open(encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        return _ResultRows(directory.name, [])
    stages = [_StageRow(r["period"], int(r["years"]), float(r["objective"]), float(r["emissions_t"]),
                        int(r.get("policy_rows") or 0)) for r in rows]
    return _ResultRows(rows[0]["scenario"], stages)


def cmd_compare(args) -> int:
    try:
        results = [_read_result(Path(d)) for d in args.result_dirs]
        by_name = {r.scenario: r for r in results}
        if args.reference not in by_name:
            raise UsageError(f"reference scenario {args.reference!r} is not among the results")
        ref = by_name[args.reference]
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        with out.open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["scenario", "reference", "window", "weighted_cost", "weighted_emissions_t", "abatement_cost", "note"])
            for r in results:
                if r.scenario == ref.scenario:
                    continue
                ac = abatement_cost(r, ref, args.abatement_window)
                w.writerow([
                    r.scenario, ref.scenario, args.abatement_window,
                    repr(math.fsum(s.years * s.objective for s in r.stages)),
                    repr(math.fsum(s.years * s.emissions for s in r.stages)),
                    str(ac) if isinstance(ac, NotDefined) else repr(ac),
                    ac.reason if isinstance(ac, NotDefined) else "",
                ])
    except HANDLED as exc:
        return _handle(None, exc)
    return EXIT_OK


def cmd_export_scenarios(args) -> int:
    for p in export_library(args.out_dir):
        print(p)
    return EXIT_OK


def cmd_write_fixture(args) -> int:
    from .fixtures import two_zone_spec

    write_system(two_zone_spec(step_hours=args.step_hours), args.out_dir)
    print(args.out_dir)
    return EXIT_OK


# -- parser -------------------------------------------------------------
def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--solver", default="embedded", help="embedded or external:<name> (default embedded)")
    p.add_argument("--hours", default="weeks:8", help="full or weeks:<n>; applies to 8760-step inputs (default weeks:8)")
    p.add_argument("--no-voll", action="store_true", help="disable unserved energy")
    p.add_argument("--cache-dir", default=None, help="directory for the retirement pre-pass cache")
    p.add_argument("--jobs", type=int, default=1, help="concurrent scenarios or sweep points")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="epsplan", description="Capacity expansion under power plant emission rules")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run scenarios and export tables")
    p.add_argument("system_dir")
    p.add_argument("scenario_file", help="YAML file, directory of YAML files, builtin or builtin:<name>")
    p.add_argument("out_dir")
    p.add_argument("--abatement-window", choices=(WINDOW_ALL, WINDOW_ACTIVE), default=WINDOW_ALL)
    _common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="dispatch-only run with installed capacity")
    p.add_argument("system_dir")
    p.add_argument("--period", default=None, help="period whose prices and demand are used (default first)")
    p.add_argument("--fuel-price-case", default="ref")
    p.add_argument("--reference", default=None, help="CSV with one row of generation shares by tech class")
    p.add_argument("--out-dir", default=None)
    _common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("sweep", help="run a sensitivity sweep")
    p.add_argument("system_dir")
    p.add_argument("scenario_file")
    p.add_argument("sweep_spec", help="YAML with axes fuel_price/growth/credits or a points list")
    p.add_argument("out_dir")
    _common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="abatement costs from exported result directories")
    p.add_argument("result_dirs", nargs="+")
    p.add_argument("--reference", default="No Regulations")
    p.add_argument("--out", default="comparison.csv")
    p.add_argument("--abatement-window", choices=(WINDOW_ALL, WINDOW_ACTIVE), default=WINDOW_ALL)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("export-scenarios", help="write the built-in scenario library as YAML")
    p.add_argument("out_dir")
    p.set_defaults(func=cmd_export_scenarios)

    p = sub.add_parser("write-fixture", help="write the two-zone demo system as tables")
    p.add_argument("out_dir")
    p.add_argument("--step-hours", type=int, default=4)
    p.set_defaults(func=cmd_write_fixture)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
