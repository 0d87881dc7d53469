"""Adapter that hands an LP to an outside solver through an MPS file.

``external:highs`` uses the ``highspy`` bindings when they are importable.
Setting ``EPSPLAN_SOLVER_PATH`` to a HiGHS command-line executable makes the
adapter run that binary instead (``--model_file``/``--solution_file``) and
parse its raw solution file.
"""
from __future__ import annotations

import math
import os
import subprocess
import tempfile
from pathlib import Path

import numpy as np

from ..lp import LinearProgram
from .mps import write_file
from .simplex import INFEASIBLE, OPTIMAL, UNBOUNDED, LPSolution, SolverError

SOLVER_PATH_ENV = "EPSPLAN_SOLVER_PATH"

_STATUS = {
    "Optimal": OPTIMAL,
    "Infeasible": INFEASIBLE,
    "Unbounded": UNBOUNDED,
    "Primal infeasible or unbounded": INFEASIBLE,
}


def available(name: str = "highs") -> bool:
    if os.environ.get(SOLVER_PATH_ENV):
        return True
    if name != "highs":
        return False
    try:
        import highspy  # noqa: F401
    except ImportError:
        return False
    return True


def solve_external(lp: LinearProgram, name: str = "highs", workdir: str | Path | None = None) -> LPSolution:
    if name != "highs":
        raise SolverError(f"unknown external solver {name!r} (supported: highs)")
    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        model = write_file(lp, Path(tmp) / "model.mps")
        exe = os.environ.get(SOLVER_PATH_ENV)
        if exe:
            return _run_binary(lp, exe, model, Path(tmp) / "model.sol")
        return _run_highspy(lp, model)


def _run_highspy(lp: LinearProgram, model: Path) -> LPSolution:
    try:
        import highspy
    except ImportError as exc:
        raise SolverError("external:highs needs the highspy package or EPSPLAN_SOLVER_PATH") from exc
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.readModel(str(model))
    h.run()
    status = _STATUS.get(h.modelStatusToString(h.getModelStatus()))
    if status is None:
        raise SolverError(f"highs returned {h.modelStatusToString(h.getModelStatus())}")
    names = list(h.getLp().col_names_)
    sol = h.getSolution()
    values = dict(zip(names, sol.col_value))
    x = np.array([values.get(n, 0.0) for n in lp.var_names], dtype=float)
    if status != OPTIMAL:
        return LPSolution(status, x, np.zeros(lp.num_rows), math.nan, 0)
    row_names = list(h.getLp().row_names_)
    duals = dict(zip(row_names, sol.row_dual))
    y = np.array([duals.get(n, 0.0) for n in lp.row_names], dtype=float)
    obj = float(h.getInfo().objective_function_value)
    return LPSolution(OPTIMAL, x, y, obj, int(h.getInfo().simplex_iteration_count))


def _run_binary(lp: LinearProgram, exe: str, model: Path, solfile: Path) -> LPSolution:
    proc = subprocess.run(
        [exe, "--model_file", str(model), "--solution_file", str(solfile)],
        capture_output=True,
        text=True,
        check=False,
    )
    if proc.returncode != 0 or not solfile.exists():
        raise SolverError(f"{exe} failed ({proc.returncode}): {proc.stderr.strip()[:500]}")
    status, objective, values = parse_highs_solution(solfile.read_text())
    x = np.array([values.get(n, 0.0) for n in lp.var_names], dtype=float)
    return LPSolution(status, x, np.zeros(lp.num_rows), objective if status == OPTIMAL else math.nan, 0)


def parse_highs_solution(text: str) -> tuple[str, float, dict[str, float]]:
    """Parse the raw-style solution file HiGHS writes with ``--solution_file``."""
    lines = [ln.strip() for ln in text.splitlines()]
    status = None
    objective = math.nan
    values: dict[str, float] = {}
    i = 0
    while i < len(lines):
        ln = lines[i]
        if ln == "Model status" and i + 1 < len(lines):
            status = _STATUS.get(lines[i + 1])
            i += 2
            continue
        if ln.startswith("Objective ") and math.isnan(objective):
            objective = float(ln.split()[1])
        if ln.startswith("# Columns") and not values:
            count = int(ln.split()[2])
            for row in lines[i + 1:i + 1 + count]:
                name, val = row.split()[:2]
                values[name] = float(val)
            i += count + 1
            continue
        i += 1
    if status is None:
        raise SolverError("could not find a model status in the solution file")
    return status, objective, values
