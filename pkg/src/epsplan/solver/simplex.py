"""Bounded-variable revised primal simplex.

The LP  min c'x, rows A x (<=,>=,=) b, lo <= x <= up  is solved in the form
A x + s = b with one logical s_i per row (s >= 0 for <=, s <= 0 for >=,
s = 0 for =).  The starting basis is crashed from logicals and column
singletons; whatever residual remains is carried by artificials that phase 1
drives to zero.  The basis inverse is kept as a sparse LU (SuperLU) plus a
product-form eta file, refactorized every ``refactor_every`` pivots.

Pricing is Dantzig (largest |d_j|, lowest index on ties) with a Harris
two-pass ratio test; after ``bland_after`` consecutive degenerate pivots the
solver switches to Bland's rule until it makes progress again.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from ..lp import LinearProgram

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"

_AT_LOWER, _AT_UPPER, _FREE, _FIXED, _BASIC = 1, 2, 3, 4, 0


class SolverError(RuntimeError):
    pass


class IterationLimit(SolverError):
    """Raised when the pivot budget is exhausted; carries the last basis."""

    def __init__(self, iterations: int, basis: list[int], x: np.ndarray):
        super().__init__(f"iteration limit reached after {iterations} pivots")
        self.iterations = iterations
        self.basis = basis
        self.x = x


@dataclass
class Tolerances:
    feasibility: float = 1e-9
    optimality: float = 1e-9
    pivot: float = 1e-9
    refactor_every: int = 64
    bland_after: int = 50
    iteration_factor: int = 50


@dataclass
class LPSolution:
    status: str
    x: np.ndarray
    duals: np.ndarray
    objective: float
    iterations: int
    dual_objective: float = math.nan
    reduced_costs: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


class _Factor:
    def __init__(self, cols: sp.csc_matrix, basis: np.ndarray):
        self.cols = cols
        self.load(basis)

    def load(self, basis: np.ndarray) -> None:
        B = self.cols[:, basis].tocsc()
        try:
            self.lu = splu(B, permc_spec="COLAMD", options={"SymmetricMode": False})
        except RuntimeError as exc:  # singular basis
            raise SolverError(f"basis factorization failed: {exc}") from exc
        self.etas: list[tuple[int, np.ndarray]] = []

    def ftran(self, v: np.ndarray) -> np.ndarray:
        z = self.lu.solve(v)
        for r, alpha in self.etas:
            zr = z[r] / alpha[r]
            if zr != 0.0:
                z -= zr * alpha
            z[r] = zr
        return z

    def btran(self, v: np.ndarray) -> np.ndarray:
        u = v.copy()
        for r, alpha in reversed(self.etas):
            ur = u[r]
            u[r] = (ur - (alpha @ u - alpha[r] * ur)) / alpha[r]
        return self.lu.solve(u, trans="T")

    def push(self, r: int, alpha: np.ndarray) -> None:
        self.etas.append((r, alpha))


class _Simplex:
    def __init__(self, lp: LinearProgram, tol: Tolerances):
        self.tol = tol
        self.m = lp.num_rows
        self.n = lp.num_vars
        c, lo, up = lp.arrays()
        A = lp.matrix().tocsc()
        b = np.asarray(lp.rhs, dtype=float)
        senses = lp.senses
        slo = np.array([0.0 if s in ("L", "E") else -math.inf for s in senses])
        sup = np.array([0.0 if s in ("G", "E") else math.inf for s in senses])
        self.b = b
        self.c_struct = c
        self.lo = np.concatenate([lo, slo])
        self.up = np.concatenate([up, sup])
        self.cols = sp.hstack([A, sp.identity(self.m, format="csc")], format="csc")
        self._crash(A)
        self.MT = self.cols.T.tocsr()
        self.iterations = 0

    # -- start basis --------------------------------------------------
    def _crash(self, A: sp.csc_matrix) -> None:
        n, m = self.n, self.m
        lo, up = self.lo, self.up
        x = np.where(np.isfinite(lo), lo, np.where(np.isfinite(up), up, 0.0))
        x[n:] = 0.0
        res = self.b - A @ x[:n]
        counts = np.diff(A.indptr)
        singleton: dict[int, int] = {}
        for j in np.flatnonzero(counts == 1):
            i = int(A.indices[A.indptr[j]])
            if i not in singleton and lo[j] < up[j]:
                singleton[i] = int(j)
        basis = np.empty(m, dtype=np.int64)
        art_rows, art_signs, art_vals = [], [], []
        tol = self.tol.feasibility
        for i in range(m):
            s = n + i
            r = res[i]
            if lo[s] - tol <= r <= up[s] + tol:
                basis[i] = s
                x[s] = r
                continue
            x[s] = min(max(r, lo[s]), up[s])
            rem = r - x[s]
            j = singleton.get(i)
            if j is not None:
                a = A.data[A.indptr[j]]
                v = x[j] + rem / a
                if lo[j] - tol <= v <= up[j] + tol:
                    basis[i] = j
                    x[j] = v
                    continue
            art_rows.append(i)
            art_signs.append(1.0 if rem > 0 else -1.0)
            art_vals.append(abs(rem))
            basis[i] = -1
        k = len(art_rows)
        self.n_art = k
        if k:
            art = sp.csc_matrix((np.array(art_signs), (np.array(art_rows), np.arange(k))), shape=(m, k))
            self.cols = sp.hstack([self.cols, art], format="csc")
            self.lo = np.concatenate([self.lo, np.zeros(k)])
            self.up = np.concatenate([self.up, np.full(k, math.inf)])
            x = np.concatenate([x, np.array(art_vals)])
            for a_idx, i in enumerate(art_rows):
                basis[i] = n + m + a_idx
        self.x = x
        self.basis = basis
        self.status = np.empty(self.cols.shape[1], dtype=np.int8)
        self._set_nonbasic_status()
        self.status[basis] = _BASIC

    def _set_nonbasic_status(self) -> None:
        lo, up, x = self.lo, self.up, self.x
        st = np.where(lo == up, _FIXED, np.where(
            np.isfinite(lo) & (x <= lo), _AT_LOWER, np.where(
                np.isfinite(up) & (x >= up), _AT_UPPER, np.where(
                    ~np.isfinite(lo) & ~np.isfinite(up), _FREE, _AT_LOWER))))
        self.status = st.astype(np.int8)

    # -- core loop ----------------------------------------------------
    def _recompute_xb(self) -> None:
        xn = self.x.copy()
        xn[self.basis] = 0.0
        rhs = self.b - self.cols @ xn
        self.x[self.basis] = self.factor.ftran(rhs)

    def run(self, cost: np.ndarray, budget: int) -> str:
        tol = self.tol
        self.factor = _Factor(self.cols, self.basis)
        self._recompute_xb()
        degenerate = 0
        bland = False
        lo, up = self.lo, self.up
        while True:
            if self.iterations >= budget:
                raise IterationLimit(self.iterations, self.basis.tolist(), self.x.copy())
            y = self.factor.btran(cost[self.basis])
            d = cost - self.MT @ y
            st = self.status
            elig = ((st == _AT_LOWER) & (d < -tol.optimality)) | ((st == _AT_UPPER) & (d > tol.optimality)) | (
                (st == _FREE) & (np.abs(d) > tol.optimality)
            )
            cand = np.flatnonzero(elig)
            if cand.size == 0:
                self.y, self.d = y, d
                return OPTIMAL
            if bland:
                q = int(cand[0])
            else:
                q = int(cand[np.argmax(np.abs(d[cand]))])
            direction = 1.0 if d[q] < 0 else -1.0
            col = self.cols[:, q].toarray().ravel()
            alpha = self.factor.ftran(col)
            theta, r, to_upper = self._ratio(alpha * direction, q, bland)
            if r == -2:
                self.y, self.d = y, d
                self.unbounded_column = q
                return UNBOUNDED
            self.iterations += 1
            if theta <= 1e-12:
                degenerate += 1
                if degenerate > tol.bland_after:
                    bland = True
            else:
                degenerate = 0
                bland = False
            xb = self.x[self.basis]
            xb -= theta * direction * alpha
            self.x[self.basis] = xb
            if r == -1:
                self.x[q] = up[q] if direction > 0 else lo[q]
                st[q] = _AT_UPPER if direction > 0 else _AT_LOWER
                continue
            leaving = int(self.basis[r])
            self.x[q] = self.x[q] + direction * theta
            self.x[leaving] = up[leaving] if to_upper else lo[leaving]
            if lo[leaving] == up[leaving]:
                st[leaving] = _FIXED
            else:
                st[leaving] = _AT_UPPER if to_upper else _AT_LOWER
            st[q] = _BASIC
            self.basis[r] = q
            if len(self.factor.etas) >= tol.refactor_every:
                self.factor.load(self.basis)
                self._recompute_xb()
            else:
                self.factor.push(r, alpha)

    def _ratio(self, a: np.ndarray, q: int, bland: bool) -> tuple[float, int, bool]:
        """Return (step, leaving position, leaves at upper).

        Position -1 means a bound flip of the entering column, -2 unbounded.
        ``a`` is the column already multiplied by the movement direction, so
        basic variable i moves by -step * a[i].
        """
        tol = self.tol
        B = self.basis
        xb = self.x[B]
        lob, upb = self.lo[B], self.up[B]
        dec = (a > tol.pivot) & np.isfinite(lob)
        inc = (a < -tol.pivot) & np.isfinite(upb)
        flip = self.up[q] - self.lo[q]
        idx_dec = np.flatnonzero(dec)
        idx_inc = np.flatnonzero(inc)
        if idx_dec.size == 0 and idx_inc.size == 0:
            if math.isfinite(flip):
                return flip, -1, False
            return math.inf, -2, False
        if bland:
            r_dec = (xb[idx_dec] - lob[idx_dec]) / a[idx_dec]
            r_inc = (upb[idx_inc] - xb[idx_inc]) / (-a[idx_inc])
            ratios = np.concatenate([r_dec, r_inc])
            rows = np.concatenate([idx_dec, idx_inc])
            uppers = np.concatenate([np.zeros(idx_dec.size, bool), np.ones(idx_inc.size, bool)])
            ratios = np.maximum(ratios, 0.0)
            best = ratios.min()
            if math.isfinite(flip) and flip <= best:
                return flip, -1, False
            ties = np.flatnonzero(ratios <= best + 1e-12)
            pick = ties[np.argmin(B[rows[ties]])]
            return float(ratios[pick]), int(rows[pick]), bool(uppers[pick])
        # Harris pass 1: relaxed bounds
        ftol = tol.feasibility
        r_dec = (xb[idx_dec] - lob[idx_dec] + ftol) / a[idx_dec]
        r_inc = (upb[idx_inc] - xb[idx_inc] + ftol) / (-a[idx_inc])
        theta_max = min(r_dec.min() if r_dec.size else math.inf, r_inc.min() if r_inc.size else math.inf)
        if math.isfinite(flip) and flip <= theta_max:
            return flip, -1, False
        # pass 2: among ratios within theta_max pick the largest pivot
        e_dec = np.maximum((xb[idx_dec] - lob[idx_dec]) / a[idx_dec], 0.0)
        e_inc = np.maximum((upb[idx_inc] - xb[idx_inc]) / (-a[idx_inc]), 0.0)
        ratios = np.concatenate([e_dec, e_inc])
        rows = np.concatenate([idx_dec, idx_inc])
        uppers = np.concatenate([np.zeros(idx_dec.size, bool), np.ones(idx_inc.size, bool)])
        ok = np.flatnonzero(ratios <= theta_max)
        mags = np.abs(a[rows[ok]])
        pick = ok[np.argmax(mags)]
        return float(ratios[pick]), int(rows[pick]), bool(uppers[pick])


def _lagrangian_bound(lp: LinearProgram, y: np.ndarray, tol: float) -> float:
    """min over the variable box of c'x + y'(b - A x - s); a valid lower bound."""
    c, lo, up = lp.arrays()
    A = lp.matrix()
    d = c - A.T @ y
    total = float(np.dot(lp.rhs, y)) if lp.num_rows else 0.0
    terms = []
    for dj, l, u in zip(d, lo, up):
        if abs(dj) <= tol:
            continue
        bound = l if dj > 0 else u
        if not math.isfinite(bound):
            return -math.inf
        terms.append(dj * bound)
    senses = lp.senses
    for yi, s in zip(y, senses):
        ds = -yi
        if abs(ds) <= tol:
            continue
        # logical bounds: L -> [0, inf), G -> (-inf, 0], E -> [0, 0]
        if s == "E" or (s == "L" and ds > 0) or (s == "G" and ds < 0):
            continue
        return -math.inf
    return total + math.fsum(terms) + lp.objective_offset


def solve(lp: LinearProgram, tolerances: Tolerances | None = None) -> LPSolution:
    """Solve ``lp`` with the embedded simplex.

    Infeasible and unbounded problems come back as statuses; only an
    exhausted pivot budget raises (:class:`IterationLimit`).
    """
    tol = tolerances or Tolerances()
    lp.validate()
    n, m = lp.num_vars, lp.num_rows
    if m == 0:
        c, lo, up = lp.arrays()
        x = np.where(c > 0, lo, np.where(c < 0, up, np.where(np.isfinite(lo), lo, np.where(np.isfinite(up), up, 0.0))))
        if not np.all(np.isfinite(x)):
            return LPSolution(UNBOUNDED, x, np.zeros(0), -math.inf, 0)
        obj = lp.objective_value(x)
        return LPSolution(OPTIMAL, x, np.zeros(0), obj, 0, dual_objective=obj, reduced_costs=c.copy())
    sx = _Simplex(lp, tol)
    budget = tol.iteration_factor * (m + n)
    if sx.n_art:
        phase1 = np.zeros(sx.cols.shape[1])
        phase1[n + m:] = 1.0
        sx.run(phase1, budget)
        infeas = float(np.sum(sx.x[n + m:]))
        if infeas > tol.feasibility * (1.0 + float(np.max(np.abs(sx.b)))) * max(1, sx.n_art) ** 0.5:
            return LPSolution(INFEASIBLE, sx.x[:n].copy(), sx.y.copy(), math.nan, sx.iterations)
        sx.up[n + m:] = 0.0
        art = np.arange(n + m, sx.cols.shape[1])
        nb = art[sx.status[art] != _BASIC]
        sx.x[nb] = 0.0
        sx.status[nb] = _FIXED
    cost = np.zeros(sx.cols.shape[1])
    cost[:n] = sx.c_struct
    status = sx.run(cost, budget)
    x = sx.x[:n].copy()
    # snap structurals onto bounds they sit within tolerance of
    lo, up = sx.lo[:n], sx.up[:n]
    x = np.where(np.abs(x - lo) <= tol.feasibility * (1 + np.abs(np.where(np.isfinite(lo), lo, 0))), lo, x)
    x = np.where(np.abs(x - up) <= tol.feasibility * (1 + np.abs(np.where(np.isfinite(up), up, 0))), up, x)
    if status == UNBOUNDED:
        return LPSolution(UNBOUNDED, x, sx.y.copy(), -math.inf, sx.iterations)
    obj = lp.objective_value(x)
    y = sx.y.copy()
    return LPSolution(
        OPTIMAL,
        x,
        y,
        obj,
        sx.iterations,
        dual_objective=_lagrangian_bound(lp, y, 1e-7),
        reduced_costs=sx.d[:n].copy(),
    )
