"""In-memory linear program with bounded variables and named rows."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
import scipy.sparse as sp

SENSES = ("L", "G", "E")


class LPError(ValueError):
    pass


class InfeasibleBounds(LPError):
    """A variable was declared with lower > upper."""

    def __init__(self, name: str, lower: float, upper: float):
        super().__init__(f"variable {name!r} has lower bound {lower} > upper bound {upper}")
        self.name = name


@dataclass
class LinearProgram:
    """min c'x + offset  s.t.  rows, lb <= x <= ub.

    Variables and rows are appended in emission order, which is also the
    order the solver uses for tie-breaking.
    """

    name: str = "lp"
    var_names: list[str] = field(default_factory=list)
    lower: list[float] = field(default_factory=list)
    upper: list[float] = field(default_factory=list)
    cost: list[float] = field(default_factory=list)
    row_names: list[str] = field(default_factory=list)
    senses: list[str] = field(default_factory=list)
    rhs: list[float] = field(default_factory=list)
    objective_offset: float = 0.0
    _rows: list[int] = field(default_factory=list, repr=False)
    _cols: list[int] = field(default_factory=list, repr=False)
    _vals: list[float] = field(default_factory=list, repr=False)
    _var_index: dict[str, int] = field(default_factory=dict, repr=False)
    _row_index: dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        self._var_index = {n: i for i, n in enumerate(self.var_names)}
        self._row_index = {n: i for i, n in enumerate(self.row_names)}

    # -- construction -------------------------------------------------
    def add_var(self, name: str, lower: float = 0.0, upper: float = math.inf, cost: float = 0.0) -> int:
        if name in self._var_index:
            raise LPError(f"duplicate variable name {name!r}")
        if lower > upper:
            raise InfeasibleBounds(name, lower, upper)
        if not math.isfinite(cost):
            raise LPError(f"variable {name!r} has non-finite cost {cost}")
        idx = len(self.var_names)
        self.var_names.append(name)
        self.lower.append(float(lower))
        self.upper.append(float(upper))
        self.cost.append(float(cost))
        self._var_index[name] = idx
        return idx

    def add_row(self, name: str, coeffs: Iterable[tuple[int, float]], sense: str, rhs: float) -> int:
        if sense not in SENSES:
            raise LPError(f"row {name!r}: unknown sense {sense!r}")
        if name in self._row_index:
            raise LPError(f"duplicate row name {name!r}")
        idx = len(self.row_names)
        merged: dict[int, float] = {}
        for col, val in coeffs:
            if not 0 <= col < len(self.var_names):
                raise LPError(f"row {name!r} references unknown variable index {col}")
            merged[col] = merged.get(col, 0.0) + float(val)
        for col, val in merged.items():
            if val != 0.0:
                self._rows.append(idx)
                self._cols.append(col)
                self._vals.append(val)
        self.row_names.append(name)
        self.senses.append(sense)
        self.rhs.append(float(rhs))
        self._row_index[name] = idx
        return idx

    def set_bounds(self, index: int, lower: float, upper: float) -> None:
        if lower > upper:
            raise InfeasibleBounds(self.var_names[index], lower, upper)
        self.lower[index] = float(lower)
        self.upper[index] = float(upper)

    def without_rows(self, names: Iterable[str]) -> "LinearProgram":
        """Copy with the named rows removed (variables untouched)."""
        drop = {self._row_index[n] for n in names}
        keep = [i for i in range(self.num_rows) if i not in drop]
        new_index = {old: new for new, old in enumerate(keep)}
        out = LinearProgram(
            name=self.name,
            var_names=list(self.var_names),
            lower=list(self.lower),
            upper=list(self.upper),
            cost=list(self.cost),
            row_names=[self.row_names[i] for i in keep],
            senses=[self.senses[i] for i in keep],
            rhs=[self.rhs[i] for i in keep],
            objective_offset=self.objective_offset,
        )
        for r, c, v in zip(self._rows, self._cols, self._vals):
            if r in new_index:
                out._rows.append(new_index[r])
                out._cols.append(c)
                out._vals.append(v)
        return out

    # -- queries ------------------------------------------------------
    @property
    def num_vars(self) -> int:
        return len(self.var_names)

    @property
    def num_rows(self) -> int:
        return len(self.row_names)

    def var(self, name: str) -> int:
        return self._var_index[name]

    def row(self, name: str) -> int:
        return self._row_index[name]

    def has_var(self, name: str) -> bool:
        return name in self._var_index

    def has_row(self, name: str) -> bool:
        return name in self._row_index

    def matrix(self) -> sp.csr_matrix:
        """Row-major constraint matrix (duplicates already merged per row)."""
        return sp.csr_matrix(
            (np.asarray(self._vals, dtype=float), (np.asarray(self._rows, dtype=np.int64), np.asarray(self._cols, dtype=np.int64))),
            shape=(self.num_rows, self.num_vars),
        )

    def triplets(self) -> list[tuple[int, int, float]]:
        return list(zip(self._rows, self._cols, self._vals))

    def row_coefficients(self, index: int) -> dict[int, float]:
        out: dict[int, float] = {}
        for r, c, v in zip(self._rows, self._cols, self._vals):
            if r == index:
                out[c] = v
        return out

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (
            np.asarray(self.cost, dtype=float),
            np.asarray(self.lower, dtype=float),
            np.asarray(self.upper, dtype=float),
        )

    def activities(self, x: np.ndarray) -> np.ndarray:
        return self.matrix() @ np.asarray(x, dtype=float)

    def objective_value(self, x: np.ndarray) -> float:
        return float(np.dot(self.cost, x)) + self.objective_offset

    def max_violation(self, x: np.ndarray) -> float:
        """Largest row or bound violation, scaled by 1 + |rhs|."""
        x = np.asarray(x, dtype=float)
        worst = 0.0
        lo, up = np.asarray(self.lower), np.asarray(self.upper)
        if x.size:
            worst = max(worst, float(np.max(np.maximum(lo - x, 0.0) / (1 + np.abs(np.where(np.isfinite(lo), lo, 0.0))))))
            worst = max(worst, float(np.max(np.maximum(x - up, 0.0) / (1 + np.abs(np.where(np.isfinite(up), up, 0.0))))))
        if self.num_rows:
            act = self.activities(x)
            b = np.asarray(self.rhs)
            s = np.asarray(self.senses)
            viol = np.where(s == "L", act - b, np.where(s == "G", b - act, np.abs(act - b)))
            worst = max(worst, float(np.max(np.maximum(viol, 0.0) / (1 + np.abs(b)))))
        return worst

    def validate(self) -> None:
        for name, lo, up in zip(self.var_names, self.lower, self.upper):
            if lo > up:
                raise InfeasibleBounds(name, lo, up)
            if lo == math.inf or up == -math.inf:
                raise LPError(f"variable {name!r} has an empty bound interval")
        if not all(math.isfinite(c) for c in self.cost):
            raise LPError("objective has non-finite coefficients")
        if not all(math.isfinite(v) for v in self._vals):
            raise LPError("constraint matrix has non-finite coefficients")
