from __future__ import annotations

from ..lp import LinearProgram
from .external import available as external_available, solve_external
from .mps import ParseError, read_file, read_standard_format, write_file, write_standard_format
from .simplex import (
    INFEASIBLE,
    OPTIMAL,
    UNBOUNDED,
    IterationLimit,
    LPSolution,
    SolverError,
    Tolerances,
    solve as solve_embedded,
)

__all__ = [
    "INFEASIBLE",
    "OPTIMAL",
    "UNBOUNDED",
    "IterationLimit",
    "LPSolution",
    "ParseError",
    "SolverError",
    "Tolerances",
    "external_available",
    "read_file",
    "read_standard_format",
    "solve",
    "solve_embedded",
    "solve_external",
    "write_file",
    "write_standard_format",
]


def solve(lp: LinearProgram, solver: str = "embedded", tolerances: Tolerances | None = None) -> LPSolution:
    """Dispatch on a solver spec: ``embedded`` or ``external:<name>``."""
    if solver == "embedded":
        return solve_embedded(lp, tolerances)
    if solver.startswith("external:"):
        return solve_external(lp, solver.split(":", 1)[1])
    raise SolverError(f"unknown solver {solver!r}")
