"""Bounded-variable LP kernel with duals and Farkas infeasibility certificates.

The simplex work is delegated to HiGHS (dual simplex, presolve off, one
thread). The model is kept alive between solves, so row additions and
bound changes re-solve from the previous basis.

Dual sign convention (minimization): a ``<=`` row has a nonpositive
multiplier, a ``>=`` row a nonnegative one, ``=`` rows are free. An
infeasibility certificate ``y`` in this convention satisfies::

    Σ_r row_floor(y_r) - Σ_j col_ceiling((yᵀA)_j) > 0

where ``row_floor`` picks the row bound that bounds ``y_r·a_r x`` from below
and ``col_ceiling`` bounds ``(yᵀA)_j x_j`` from above over the column box.
"""
from __future__ import annotations

import dataclasses
from typing import Iterable, Optional, Sequence, Union

import highspy
import numpy as np

INF = highspy.kHighsInf
FEAS_TOL = 1e-7
OPT_TOL = 1e-7
PIVOT_TOL = 1e-10
FARKAS_TOL = 1e-8

Row = tuple[Sequence[int], Sequence[float], str, float]


class NumericalFailure(RuntimeError):
    pass


@dataclasses.dataclass
class Optimal:
    x: np.ndarray
    duals: np.ndarray
    reduced_costs: np.ndarray
    objective: float


@dataclasses.dataclass
class Infeasible:
    farkas: np.ndarray


@dataclasses.dataclass
class Unbounded:
    ray: np.ndarray


LpOutcome = Union[Optimal, Infeasible, Unbounded]


def _row_bounds(sense: str, rhs: float) -> tuple[float, float]:
    if sense in ("<=", "L"):
        return -INF, rhs
    if sense in (">=", "G"):
        return rhs, INF
    if sense in ("=", "==", "E"):
        return rhs, rhs
    raise ValueError(f"unknown row sense {sense!r}")


class LinearProgram:
    """min cᵀx s.t. rows, lb <= x <= ub. Rows are appended, never removed."""

    def __init__(self, lb: Sequence[float], ub: Sequence[float], cost: Sequence[float], names: Optional[Sequence[str]] = None):
        self.lb = np.array(lb, dtype=float)
        self.ub = np.array(ub, dtype=float)
        self.cost = np.array(cost, dtype=float)
        if not (len(self.lb) == len(self.ub) == len(self.cost)):
            raise ValueError("column arrays differ in length")
        if np.any(self.lb > self.ub):
            raise ValueError("column lower bound exceeds upper bound")
        if not np.all(np.isfinite(self.cost)):
            raise ValueError("objective coefficients must be finite")
        self.names = list(names) if names is not None else [f"c{j}" for j in range(len(self.lb))]
        self.row_lo: list[float] = []
        self.row_hi: list[float] = []
        self.senses: list[str] = []
        self.rows_idx: list[np.ndarray] = []
        self.rows_val: list[np.ndarray] = []
        self._h = highspy.Highs()
        for opt, val in (("output_flag", False), ("presolve", "off"), ("threads", 1),
                         ("primal_feasibility_tolerance", FEAS_TOL), ("dual_feasibility_tolerance", OPT_TOL),
                         ("random_seed", 0)):
            self._h.setOptionValue(opt, val)
        n = len(self.lb)
        self._h.addCols(n, self.cost, np.clip(self.lb, -INF, INF), np.clip(self.ub, -INF, INF), 0,
                        np.zeros(0, dtype=np.int32), np.zeros(0, dtype=np.int32), np.zeros(0))

    @property
    def num_cols(self) -> int:
        return len(self.lb)

    @property
    def num_rows(self) -> int:
        return len(self.senses)

    def add_rows(self, rows: Iterable[Row]) -> "LinearProgram":
        rows = list(rows)
        if not rows:
            return self
        starts, idx_all, val_all, lo, hi = [], [], [], [], []
        nnz = 0
        for idx, val, sense, rhs in rows:
            idx = np.asarray(idx, dtype=np.int32)
            val = np.asarray(val, dtype=float)
            if idx.shape != val.shape:
                raise ValueError("row index/value length mismatch")
            if idx.size and (idx.min() < 0 or idx.max() >= self.num_cols):
                raise IndexError("row references a column out of range")
            lo_r, hi_r = _row_bounds(sense, float(rhs))
            starts.append(nnz)
            nnz += idx.size
            idx_all.append(idx)
            val_all.append(val)
            lo.append(lo_r)
            hi.append(hi_r)
            self.rows_idx.append(idx)
            self.rows_val.append(val)
            self.senses.append(sense if sense in ("<=", ">=", "=") else {"L": "<=", "G": ">=", "E": "=", "==": "="}[sense])
            self.row_lo.append(lo_r)
            self.row_hi.append(hi_r)
        self._h.addRows(len(rows), np.array(lo), np.array(hi), nnz, np.array(starts, dtype=np.int32),
                        np.concatenate(idx_all).astype(np.int32), np.concatenate(val_all))
        return self

    def set_bounds(self, lb: np.ndarray, ub: np.ndarray) -> None:
        lb = np.asarray(lb, dtype=float)
        ub = np.asarray(ub, dtype=float)
        changed = np.flatnonzero((lb != self.lb) | (ub != self.ub))
        if changed.size:
            self.lb[changed] = lb[changed]
            self.ub[changed] = ub[changed]
            self._h.changeColsBounds(changed.size, changed.astype(np.int32), self.lb[changed], self.ub[changed])

    def set_row_bounds(self, rows: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> None:
        rows = np.asarray(rows, dtype=np.int32)
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        for r, a, b in zip(rows.tolist(), lo.tolist(), hi.tolist()):
            self.row_lo[r] = a
            self.row_hi[r] = b
        self._h.changeRowsBounds(rows.size, rows, lo, hi)

    def matrix(self) -> np.ndarray:
        A = np.zeros((self.num_rows, self.num_cols))
        for r, (idx, val) in enumerate(zip(self.rows_idx, self.rows_val)):
            np.add.at(A[r], idx, val)
        return A

    def row_activity(self, x: np.ndarray) -> np.ndarray:
        return np.array([val @ x[idx] for idx, val in zip(self.rows_idx, self.rows_val)])

    def to_lp_text(self) -> str:
        """Debug dump in CPLEX LP text layout."""

        def expr(idx, val):
            parts = [f"{'-' if v < 0 else '+'} {abs(v):.17g} {self.names[j]}" for j, v in zip(idx, val) if v != 0]
            return " ".join(parts) if parts else "0 " + self.names[0]

        lines = ["Minimize", " obj: " + expr(range(self.num_cols), self.cost), "Subject To"]
        for r in range(self.num_rows):
            op = {"<=": "<=", ">=": ">=", "=": "="}[self.senses[r]]
            rhs = self.row_hi[r] if op == "<=" else self.row_lo[r]
            lines.append(f" r{r}: {expr(self.rows_idx[r], self.rows_val[r])} {op} {rhs:.17g}")
        lines.append("Bounds")
        for j in range(self.num_cols):
            lo = "-inf" if self.lb[j] <= -INF else f"{self.lb[j]:.17g}"
            hi = "+inf" if self.ub[j] >= INF else f"{self.ub[j]:.17g}"
            lines.append(f" {lo} <= {self.names[j]} <= {hi}")
        lines.append("End")
        return "\n".join(lines) + "\n"


def farkas_margin(lp: LinearProgram, y: np.ndarray) -> float:
    """Certificate value; > 0 proves infeasibility. -inf if ``y`` has a wrong-signed entry."""
    y = np.asarray(y, dtype=float)
    total = 0.0
    for r in range(lp.num_rows):
        if y[r] > 0:
            if lp.row_lo[r] <= -INF:
                return -np.inf
            total += y[r] * lp.row_lo[r]
        elif y[r] < 0:
            if lp.row_hi[r] >= INF:
                return -np.inf
            total += y[r] * lp.row_hi[r]
    g = np.zeros(lp.num_cols)
    for idx, val, yr in zip(lp.rows_idx, lp.rows_val, y):
        if yr:
            np.add.at(g, idx, yr * val)
    for j in range(lp.num_cols):
        if g[j] > 0:
            if lp.ub[j] >= INF:
                if g[j] > FARKAS_TOL:
                    return -np.inf
                continue
            total -= g[j] * lp.ub[j]
        elif g[j] < 0:
            if lp.lb[j] <= -INF:
                if g[j] < -FARKAS_TOL:
                    return -np.inf
                continue
            total -= g[j] * lp.lb[j]
    return total


def clean_ray(lp: LinearProgram, y: np.ndarray, rel: float = 1e-9) -> np.ndarray:
    """Zero out wrong-signed entries that are round-off relative to the largest entry.
    Larger wrong-signed entries are kept so the certificate check rejects them."""
    y = np.array(y, dtype=float)
    if not y.size:
        return y
    tiny = np.abs(y) <= rel * float(np.abs(y).max())
    no_lo = np.array(lp.row_lo) <= -INF
    no_hi = np.array(lp.row_hi) >= INF
    y[tiny & (((y > 0) & no_lo) | ((y < 0) & no_hi))] = 0.0
    return y


def is_certificate(lp: LinearProgram, y: np.ndarray) -> bool:
    scale = max(1.0, float(np.abs(y).max())) if len(y) else 1.0
    return farkas_margin(lp, y) > FARKAS_TOL * scale


def _auxiliary_farkas(lp: LinearProgram) -> Optional[np.ndarray]:
    """Certificate from an explicit LP: max margin(y) over |y|_inf <= 1 with sign rules."""
    m, n = lp.num_rows, lp.num_cols
    # variables: y (m), then column-slack pairs s_plus (n), s_minus (n)
    lb = np.empty(m + 2 * n)
    ub = np.empty(m + 2 * n)
    cost = np.zeros(m + 2 * n)
    for r in range(m):
        lo_ok = lp.row_lo[r] > -INF
        hi_ok = lp.row_hi[r] < INF
        lb[r] = -1.0 if hi_ok else 0.0
        ub[r] = 1.0 if lo_ok else 0.0
    # margin is piecewise in the sign of y_r; split only rows that can take both signs
    split = [r for r in range(m) if lb[r] < 0 < ub[r] and lp.row_lo[r] != lp.row_hi[r]]
    if split:
        return None
    for r in range(m):
        # maximize Σ y_r * bound -> minimize -(...)
        cost[r] = -(lp.row_lo[r] if ub[r] > 0 else lp.row_hi[r])
    # gᵀ = yᵀA = s_plus - s_minus;  margin subtracts ub·s_plus - lb·s_minus
    for j in range(n):
        lb[m + j], lb[m + n + j] = 0.0, 0.0
        ub[m + j] = INF if lp.ub[j] < INF else 0.0
        ub[m + n + j] = INF if lp.lb[j] > -INF else 0.0
        cost[m + j] = lp.ub[j] if lp.ub[j] < INF else 0.0
        cost[m + n + j] = -lp.lb[j] if lp.lb[j] > -INF else 0.0
    aux = LinearProgram(lb, ub, cost)
    A = lp.matrix()
    rows = []
    for j in range(n):
        col = np.flatnonzero(A[:, j])
        idx = list(col) + [m + j, m + n + j]
        val = list(A[col, j]) + [-1.0, 1.0]
        rows.append((idx, val, "=", 0.0))
    aux.add_rows(rows)
    out = _run(aux)
    if isinstance(out, Optimal) and out.objective < -FARKAS_TOL:
        return out.x[:m]
    return None


def _run(lp: LinearProgram, retries: int = 2) -> LpOutcome:
    h = lp._h
    for attempt in range(retries + 1):
        h.run()
        status = h.getModelStatus()
        S = highspy.HighsModelStatus
        if status == S.kOptimal:
            sol = h.getSolution()
            x = np.array(sol.col_value)
            return Optimal(x=x, duals=np.array(sol.row_dual), reduced_costs=np.array(sol.col_dual),
                           objective=float(lp.cost @ x))
        if status == S.kInfeasible:
            has, ray = h.getDualRay()[1:]
            return Infeasible(farkas=np.array(ray) if has else np.zeros(0))
        if status == S.kUnbounded:
            has, ray = h.getPrimalRay()[1:]
            return Unbounded(ray=np.array(ray) if has else np.zeros(0))
        if status == S.kUnboundedOrInfeasible:
            has, ray = h.getPrimalRay()[1:]
            if has:
                return Unbounded(ray=np.array(ray))
            return Infeasible(farkas=np.zeros(0))
        # anything else: drop the basis and retry cold
        h.clearSolver()
    raise NumericalFailure(f"LP solver ended with status {h.modelStatusToString(status)}")


def solve(lp: LinearProgram) -> LpOutcome:
    """Solve ``lp``; infeasible outcomes always carry a verified certificate."""
    out = _run(lp)
    if isinstance(out, Infeasible):
        y = out.farkas
        for cand in (y, -y):
            if cand.size == lp.num_rows:
                cand = clean_ray(lp, cand)
                if is_certificate(lp, cand):
                    return Infeasible(farkas=cand)
        # cold re-solve, then an explicit certificate LP
        lp._h.clearSolver()
        out = _run(lp)
        if isinstance(out, Infeasible):
            y = out.farkas
            for cand in (y, -y):
                if cand.size == lp.num_rows:
                    cand = clean_ray(lp, cand)
                    if is_certificate(lp, cand):
                        return Infeasible(farkas=cand)
            y = _auxiliary_farkas(lp)
            if y is not None:
                y = clean_ray(lp, y)
                if is_certificate(lp, y):
                    return Infeasible(farkas=y)
            raise NumericalFailure("infeasible LP without a verifiable Farkas certificate")
    return out


def add_rows(lp: LinearProgram, rows: Iterable[Row]) -> LinearProgram:
    return lp.add_rows(rows)


def optimality_residuals(lp: LinearProgram, out: Optimal) -> dict:
    """Primal/dual feasibility residuals and the duality gap of an optimal outcome."""
    x, y, d = out.x, out.duals, out.reduced_costs
    act = lp.row_activity(x) if lp.num_rows else np.zeros(0)
    lo = np.array(lp.row_lo)
    hi = np.array(lp.row_hi)
    primal = max(
        float(np.max(np.maximum(lo - act, 0), initial=0.0)),
        float(np.max(np.maximum(act - hi, 0), initial=0.0)),
        float(np.max(np.maximum(lp.lb - x, 0), initial=0.0)),
        float(np.max(np.maximum(x - lp.ub, 0), initial=0.0)),
    )
    A = lp.matrix()
    stat = lp.cost - A.T @ y - d if lp.num_rows else lp.cost - d
    sign_err = 0.0
    for r in range(lp.num_rows):
        if lo[r] <= -INF:
            sign_err = max(sign_err, y[r])
        if hi[r] >= INF:
            sign_err = max(sign_err, -y[r])
    for j in range(lp.num_cols):
        if lp.lb[j] <= -INF:
            sign_err = max(sign_err, d[j])
        if lp.ub[j] >= INF:
            sign_err = max(sign_err, -d[j])
    dual_obj = 0.0
    for r in range(lp.num_rows):
        dual_obj += y[r] * (lo[r] if y[r] > 0 else hi[r]) if y[r] else 0.0
    for j in range(lp.num_cols):
        if d[j] > 0:
            dual_obj += d[j] * lp.lb[j]
        elif d[j] < 0:
            dual_obj += d[j] * lp.ub[j]
    return {
        "primal": primal,
        "dual": max(float(np.abs(stat).max(initial=0.0)), sign_err),
        "dual_objective": dual_obj,
        "gap": abs(dual_obj - out.objective) / max(1.0, abs(out.objective)),
    }
