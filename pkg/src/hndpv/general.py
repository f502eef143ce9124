"""General (incomplete) inter-hub networks: flows may pass through intermediate hubs.

Feasibility of a master point is decided by a multi-commodity routing LP
(one commodity per origin node) and infeasible points are cut off with the
LP's Farkas ray.
"""
from __future__ import annotations

import dataclasses
import math
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from . import costs
from .benders import CUT_TOL, FeasibilityCut, MasterModel, build_master
from .bnc import SolverOptions, SolveResult, solve
from .instance import Instance
from .lp import INF, Infeasible, LinearProgram, NumericalFailure, is_certificate, solve as lp_solve

DUAL_TOL = 1e-7


@dataclasses.dataclass
class GeneralSubproblem:
    lp: LinearProgram
    nh: int
    n: int
    rhs: np.ndarray  # |H| x N conservation right-hand sides

    def col(self, i: int, a: int, c: int) -> int:
        return (i * self.nh + a) * self.nh + c


def conservation_rhs(xbar: np.ndarray, flow: np.ndarray) -> np.ndarray:
    """O_i x̄_hi - Σ_j w_ij x̄_hj for every hub position h and origin i."""
    O = flow.sum(axis=1)
    return O[None, :] * xbar - xbar @ flow.T


def build_gbsp(xbar: np.ndarray, ybar: np.ndarray, flow: np.ndarray, Q: float) -> GeneralSubproblem:
    """Routing LP over z_ihk >= 0 with arc capacities Q·ȳ_hk and per-origin conservation."""
    xbar = np.asarray(xbar, dtype=float)
    ybar = np.asarray(ybar, dtype=float)
    nh, n = xbar.shape
    ncol = n * nh * nh
    lp = LinearProgram(np.zeros(ncol), np.full(ncol, INF), np.zeros(ncol))
    sub = GeneralSubproblem(lp, nh, n, conservation_rhs(xbar, flow))
    rows = []
    for a in range(nh):
        for c in range(nh):
            rows.append(([sub.col(i, a, c) for i in range(n)], [1.0] * n, "<=", Q * ybar[a, c]))
    for a in range(nh):
        for i in range(n):
            idx, val = [], []
            for c in range(nh):
                if c == a:
                    continue  # z_iaa enters both sums and cancels
                idx += [sub.col(i, a, c), sub.col(i, c, a)]
                val += [1.0, -1.0]
            rows.append((idx, val, "=", sub.rhs[a, i]))
    lp.add_rows(rows)
    return sub


def extract_general_cut(master: MasterModel, sub: GeneralSubproblem, farkas: np.ndarray,
                        xbar: np.ndarray, ybar: np.ndarray, scenario: int = 0) -> FeasibilityCut:
    """Cut Σ Q·λ_hk·y_hk + Σ η_hi (O_i x_hi - Σ_j w_ij x_hj) <= 0 from a certified ray."""
    if not is_certificate(sub.lp, farkas):
        raise NumericalFailure("Farkas ray fails the replay check; refusing to pool the cut")
    nh, n = sub.nh, sub.n
    ray = np.asarray(farkas, dtype=float) / max(1e-300, float(np.abs(farkas).max()))
    lam = ray[: nh * nh].reshape(nh, nh)
    eta = ray[nh * nh:].reshape(nh, n)
    if np.any(lam > DUAL_TOL):
        raise NumericalFailure("capacity multipliers must be nonpositive")
    dual_lhs = lam[:, :, None] + eta[:, None, :] - eta[None, :, :]
    off = ~np.eye(nh, dtype=bool)
    if dual_lhs[off].max(initial=-np.inf) > DUAL_TOL or np.diagonal(lam).max(initial=-np.inf) > DUAL_TOL:
        raise NumericalFailure("ray violates the routing dual constraints")
    flow = master.flows[scenario]
    O = flow.sum(axis=1)
    cx = O[None, :] * eta - eta @ flow
    cy = master.Q * lam
    dense = np.zeros(master.num_cols)
    dense[: master.nx] = cx.ravel()
    base = master.nx + scenario * master.ny
    dense[base: base + master.ny] = cy.ravel()
    keep = np.abs(dense) > 1e-12
    idx = np.flatnonzero(keep)
    trigger = float((cx * xbar).sum() + (cy * ybar).sum())
    if trigger <= CUT_TOL:
        raise NumericalFailure(f"Farkas cut does not separate the trigger point (lhs={trigger:.3g})")
    return FeasibilityCut(
        idx=idx, val=dense[idx], source="farkas", pair=None,
        scenario=scenario if master.stochastic else None, trigger_value=trigger, ray=ray,
    )


def separate_general(master: MasterModel, xbar: np.ndarray, ybar: np.ndarray, scenario: int = 0) -> Optional[FeasibilityCut]:
    sub = build_gbsp(xbar, ybar, master.flows[scenario], master.Q)
    out = lp_solve(sub.lp)
    if not isinstance(out, Infeasible):
        return None
    return extract_general_cut(master, sub, out.farkas, xbar, ybar, scenario)


def solve_general(instance: Instance, options: Optional[SolverOptions] = None, scenarios=None, trace=None) -> SolveResult:
    options = options or SolverOptions()
    master = build_master(instance, scenarios, valid_inequalities=options.valid_inequalities, general=True)
    return solve(master, options, trace)


# -- exhaustive oracle -----------------------------------------------------

def routable(xbar: np.ndarray, y: np.ndarray, flow: np.ndarray, Q: float) -> bool:
    """Routing feasibility decided with scipy's LP front end (independent of the search path)."""
    nh, n = xbar.shape
    rhs = conservation_rhs(xbar, flow)
    arcs = [(a, c) for a in range(nh) for c in range(nh) if a != c and y[a, c] > 0]
    if not arcs:
        return bool(np.all(np.abs(rhs) <= 1e-9))
    ncol = n * len(arcs)
    A_eq = np.zeros((nh * n, ncol))
    A_ub = np.zeros((len(arcs), ncol))
    for t, (a, c) in enumerate(arcs):
        for i in range(n):
            j = i * len(arcs) + t
            A_eq[a * n + i, j] += 1.0
            A_eq[c * n + i, j] -= 1.0
            A_ub[t, j] = 1.0
    b_ub = np.array([Q * y[a, c] for a, c in arcs])
    res = linprog(np.zeros(ncol), A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=rhs.ravel(), bounds=(0, None), method="highs")
    return res.status == 0


def general_oracle(instance: Instance, y_max: int = 3, budget: int = costs.DEFAULT_BUDGET) -> Optional[costs.Solution]:
    """Exact optimum for the general network by enumerating assignments and fleets.

    Fleets are enumerated on arcs between open hubs with at most ``y_max``
    vehicles per arc, cheapest first, stopping at the first routable one.
    Exact whenever some optimal fleet respects ``y_max``; this holds when the
    total flow is at most ``y_max·Q``.
    """
    Q = instance.vehicle.Q
    C = costs.interhub_cost_matrix(instance)
    flow = instance.flow
    best: Optional[costs.Solution] = None
    for a in costs.feasible_assignments(instance, (flow,), budget):
        direct = costs.evaluate_assignment(a, flow, instance, check=False)
        base = direct.costs.LC + direct.costs.DC
        if best is not None and base >= best.TC - 1e-9 * max(1.0, abs(best.TC)):
            continue
        open_pos = [instance.hub_position(h) for h in a.open_hubs]
        cand = _cheapest_fleet(a.x_matrix(instance), direct, open_pos, C, flow, Q, y_max,
                               budget=(best.TC - base) if best is not None else math.inf)
        sol = direct if cand is None else costs.evaluate_with_vehicles(a, flow, instance, cand)
        if best is None or sol.TC < best.TC - 1e-9 * max(1.0, abs(best.TC)) or (
            abs(sol.TC - best.TC) <= 1e-9 * max(1.0, abs(best.TC)) and a.assign < best.assignment.assign
        ):
            best = sol
    return best


def _cheapest_fleet(x, direct, open_pos, C, flow, Q, y_max, budget):
    """Cheapest routable fleet strictly cheaper than the direct one (and than ``budget``), else None."""
    arcs = [(a, c) for a in open_pos for c in open_pos if a != c]
    limit = min(direct.costs.HC, budget) - 1e-9
    if not arcs or limit <= 0:
        return None
    F = direct.F
    out_need = {a: sum(F[a, c] for c in open_pos if c != a) for a in open_pos}
    in_need = {a: sum(F[c, a] for c in open_pos if c != a) for a in open_pos}
    total = sum(out_need.values())
    cap = min(y_max, max(1, costs.tol_ceil(total / Q)))
    found = []

    def rec(t, y, cost):
        if cost >= limit:
            return
        if t == len(arcs):
            for a in open_pos:
                if Q * sum(y[a, c] for c in open_pos) < out_need[a] - 1e-9:
                    return
                if Q * sum(y[c, a] for c in open_pos) < in_need[a] - 1e-9:
                    return
            found.append((cost, y.copy()))
            return
        a, c = arcs[t]
        for v in range(cap + 1):
            y[a, c] = v
            rec(t + 1, y, cost + C[a, c] * v)
        y[a, c] = 0

    nh = len(C)
    rec(0, np.zeros((nh, nh), dtype=int), 0.0)
    found.sort(key=lambda p: (p[0], p[1].ravel().tolist()))
    for _, y in found:
        if routable(x, y, flow, Q):
            return y
    return None
