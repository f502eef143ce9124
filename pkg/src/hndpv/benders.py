"""Benders master problem, feasibility checks and closed-form feasibility cuts.

Master columns are laid out as ``x`` (|H| x N, row-major by hub position)
followed by one |H| x |H| block of ``y`` per scenario. A deterministic
model is the single-scenario case with probability 1.
"""
from __future__ import annotations

import dataclasses
import hashlib
import math
from typing import Optional, Sequence

import numpy as np

from . import costs
from .instance import Instance, NetworkMode, ScenarioSet
from .lp import INF, LinearProgram

CUT_TOL = 1e-6
FEAS_TOL = 1e-6
RAY_TOL = 1e-9


class InfeasibleModel(ValueError):
    """The master cannot have a feasible assignment by construction."""


class NonSeparatingCut(ValueError):
    pass


@dataclasses.dataclass
class ClosedFormRay:
    """Dual ray (λ, μ, ν) for one violated hub pair, in hub positions."""

    hat_h: int
    hat_k: int
    lam: np.ndarray  # |H| x |H|
    mu: np.ndarray  # |H| x N
    nu: np.ndarray  # |H| x N
    gamma: float = 1.0


@dataclasses.dataclass
class FeasibilityCut:
    """Homogeneous inequality Σ coef·var <= 0 over master columns."""

    idx: np.ndarray
    val: np.ndarray
    source: str  # "closed_form" | "farkas"
    pair: Optional[tuple[int, int]]  # hub positions of the violated pair
    scenario: Optional[int]
    trigger_value: float
    x_row: Optional[np.ndarray] = None  # snapshot of x̄ row ĥ
    ray: Optional[object] = None

    def lhs(self, vec: np.ndarray) -> float:
        return float(self.val @ vec[self.idx])

    def as_row(self):
        return (self.idx, self.val, "<=", 0.0)

    def checksum(self) -> str:
        payload = ",".join(f"{j}:{v:.12g}" for j, v in zip(self.idx.tolist(), self.val.tolist()))
        return hashlib.sha1(payload.encode()).hexdigest()[:12]


class MasterModel:
    def __init__(self, instance: Instance, scenarios: Optional[ScenarioSet], valid_inequalities: bool, general: bool):
        self.instance = instance
        self.stochastic = scenarios is not None
        if scenarios is None:
            self.flows = [instance.flow]
            self.probabilities = [1.0]
        else:
            self.flows = list(scenarios.flows)
            self.probabilities = list(scenarios.probabilities)
        self.scenarios = scenarios
        self.general = general
        self.valid_inequalities = valid_inequalities
        self.nh = instance.n_hubs
        self.n = instance.n
        self.m = len(self.flows)
        self.nx = self.nh * self.n
        self.ny = self.nh * self.nh
        self.num_cols = self.nx + self.m * self.ny
        self.Q = instance.vehicle.Q
        self.own = [instance.hubs[a] for a in range(self.nh)]  # node of hub position a
        self.y_ub = [max(1, costs.tol_ceil(f.sum() / self.Q)) for f in self.flows]
        self.cuts: list[FeasibilityCut] = []
        self.block_counts: dict[str, int] = {}
        self.lp: LinearProgram = None  # set by build_master

    # -- layout -------------------------------------------------------------
    def xi(self, a: int, i: int) -> int:
        return a * self.n + i

    def yi(self, s: int, a: int, c: int) -> int:
        return self.nx + s * self.ny + a * self.nh + c

    def hub_open_index(self, a: int) -> int:
        return self.xi(a, self.own[a])

    def split(self, vec: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        x = vec[: self.nx].reshape(self.nh, self.n)
        ys = [vec[self.nx + s * self.ny: self.nx + (s + 1) * self.ny].reshape(self.nh, self.nh) for s in range(self.m)]
        return x, ys

    def point(self, x: np.ndarray, ys: Sequence[np.ndarray]) -> np.ndarray:
        vec = np.zeros(self.num_cols)
        vec[: self.nx] = np.asarray(x, dtype=float).ravel()
        for s, y in enumerate(ys):
            vec[self.nx + s * self.ny: self.nx + (s + 1) * self.ny] = np.asarray(y, dtype=float).ravel()
        return vec

    def completion_point(self, assignment: costs.Assignment) -> np.ndarray:
        """(x, forced y^s) with diagonal y at its forced value, as a master vector."""
        x = assignment.x_matrix(self.instance)
        ys = []
        for f in self.flows:
            F = costs.interhub_flows(x, f)
            ys.append(np.vectorize(lambda v: costs.forced_vehicle_count(v, self.Q))(F).astype(float))
        return self.point(x, ys)

    def is_y_diag(self, j: int) -> bool:
        if j < self.nx:
            return False
        r = (j - self.nx) % self.ny
        return r // self.nh == r % self.nh

    def add_cuts(self, cuts: Sequence[FeasibilityCut]) -> None:
        self.lp.add_rows(c.as_row() for c in cuts)
        self.cuts.extend(cuts)

    def objective_value(self, vec: np.ndarray) -> float:
        return float(self.lp.cost @ vec)

    def audit_lines(self) -> list[str]:
        """One line per pooled cut: index, source, pair (hub nodes), scenario, trigger value, checksum."""
        out = []
        for t, c in enumerate(self.cuts):
            pair = "-" if c.pair is None else f"{self.own[c.pair[0]]}->{self.own[c.pair[1]]}"
            scen = "-" if c.scenario is None else str(c.scenario)
            out.append(f"{t}\t{c.source}\t{pair}\t{scen}\t{c.trigger_value:.9g}\t{c.checksum()}")
        return out


def build_master(
    instance: Instance,
    scenarios: Optional[ScenarioSet] = None,
    valid_inequalities: bool = True,
    general: Optional[bool] = None,
) -> MasterModel:
    if general is None:
        general = instance.network is NetworkMode.GENERAL
    M = MasterModel(instance, scenarios, valid_inequalities, general)
    nh, n = M.nh, M.n
    if instance.p_hubs is not None and not 1 <= instance.p_hubs <= nh:
        raise InfeasibleModel(f"p_hubs={instance.p_hubs} with {nh} candidates")
    if instance.capacitated:
        cap_max = instance.capacity.max()
        for f in M.flows:
            O = f.sum(axis=1)
            if np.any(O > cap_max * (1 + 1e-12)):
                i = int(np.argmax(O))
                raise InfeasibleModel(f"node {i} origin demand {O[i]} exceeds every hub capacity")

    lb = np.zeros(M.num_cols)
    ub = np.ones(M.num_cols)
    cost = np.zeros(M.num_cols)
    names = [f"x_{M.own[a]}_{i}" for a in range(nh) for i in range(n)]
    cmat = costs.access_cost_matrix(instance)
    C = costs.interhub_cost_matrix(instance)
    for a in range(nh):
        cost[M.hub_open_index(a)] += instance.fixed_cost[a]
    for s, (f, p) in enumerate(zip(M.flows, M.probabilities)):
        dc = cmat * costs.secondary_counts(f, instance.vehicle.q)[None, :]
        cost[: M.nx] += p * dc.ravel()
        base = M.nx + s * M.ny
        ub[base: base + M.ny] = M.y_ub[s]
        cost[base: base + M.ny] = p * C.ravel()
        names += [f"y{s}_{M.own[a]}_{M.own[c]}" for a in range(nh) for c in range(nh)]
    M.lp = LinearProgram(lb, ub, cost, names)

    rows = []
    for i in range(n):
        rows.append(([M.xi(a, i) for a in range(nh)], [1.0] * nh, "=", 1.0))
    M.block_counts["assignment"] = n
    for a in range(nh):
        for i in range(n):
            if i == M.own[a]:
                rows.append(([], [], "<=", 0.0))
            else:
                rows.append(([M.xi(a, i), M.hub_open_index(a)], [1.0, -1.0], "<=", 0.0))
    M.block_counts["linking"] = nh * n
    if instance.capacitated:
        seen = set()
        k = 0
        for f in M.flows:
            O = f.sum(axis=1)
            key = O.tobytes()
            if key in seen:
                continue
            seen.add(key)
            for a in range(nh):
                U = instance.capacity[a]
                if math.isinf(U):
                    continue
                idx = [M.xi(a, i) for i in range(n)]
                val = O.tolist()
                j = M.hub_open_index(a)
                pos = idx.index(j)
                val[pos] -= U
                rows.append((idx, val, "<=", 0.0))
                k += 1
        M.block_counts["capacity"] = k
    if instance.p_hubs is not None:
        rows.append(([M.hub_open_index(a) for a in range(nh)], [1.0] * nh, "=", float(instance.p_hubs)))
        M.block_counts["p_hubs"] = 1
    if general:
        # vehicles only run between open hubs, so flows cannot transship at closed candidates
        for s in range(M.m):
            for a in range(nh):
                for c in range(nh):
                    if a != c:
                        for b in (a, c):
                            rows.append(([M.yi(s, a, c), M.hub_open_index(b)], [1.0, -float(M.y_ub[s])], "<=", 0.0))
        M.block_counts["arc_linking"] = 2 * M.m * nh * (nh - 1)
    M.lp.add_rows(rows)
    if valid_inequalities:
        add_valid_inequalities(M, instance)
    return M


def add_valid_inequalities(master: MasterModel, instance: Instance) -> int:
    """Vehicle-count lower bounds per hub and, on complete networks, per open hub pair.

    The per-hub sums include the zero-cost diagonal y_hh.
    """
    M = master
    nh, n, Q = M.nh, M.n, M.Q
    rows = []
    for s, f in enumerate(M.flows):
        O, D = f.sum(axis=1), f.sum(axis=0)
        for a in range(nh):
            xs = [M.xi(a, i) for i in range(n)]
            rows.append((xs + [M.yi(s, c, a) for c in range(nh)], list(D / Q) + [-1.0] * nh, "<=", 0.0))
            rows.append((xs + [M.yi(s, a, c) for c in range(nh)], list(O / Q) + [-1.0] * nh, "<=", 0.0))
        if M.general:
            continue
        for a in range(nh):
            for c in range(nh):
                if a == c:
                    continue
                k = costs.tol_ceil(f[M.own[a], M.own[c]] / Q)
                if k == 0:
                    continue
                rows.append(([M.hub_open_index(a), M.hub_open_index(c), M.yi(s, a, c)], [k, k, -1.0], "<=", float(k)))
    M.lp.add_rows(rows)
    M.block_counts["valid_inequalities"] = M.block_counts.get("valid_inequalities", 0) + len(rows)
    return len(rows)


def check_feasibility(xbar: np.ndarray, ybar: np.ndarray, flow: np.ndarray, Q: float, tol: float = FEAS_TOL):
    """Hub-position pairs (h, k, F_hk - Q·ȳ_hk) whose consolidated flow exceeds vehicle capacity."""
    F = costs.interhub_flows(np.asarray(xbar, dtype=float), flow)
    excess = F - Q * np.asarray(ybar, dtype=float)
    return [(int(a), int(c), float(excess[a, c])) for a, c in zip(*np.nonzero(excess > tol))]


def select_violations(violations, mode: str = "multi"):
    if mode in ("multi", "MultiCut"):
        return list(violations)
    if not violations:
        return []
    best = min(violations, key=lambda v: (-v[2], v[0], v[1]))
    return [best]


def closed_form_ray(hat_h: int, hat_k: int, xbar: np.ndarray, gamma: float = 1.0) -> ClosedFormRay:
    """Closed-form unbounded dual ray for the violated pair (hat_h, hat_k)."""
    xbar = np.asarray(xbar, dtype=float)
    nh = xbar.shape[0]
    lam = np.zeros((nh, nh))
    lam[hat_h, hat_k] = -gamma
    # μ_hi = Σ_{h'k} λ_h'k x̄_h'i - Σ_k λ_hk x̄_hi ;  ν_ki = -Σ_h λ_hk x̄_hi
    mu = (lam.sum(axis=1) @ xbar)[None, :] - lam.sum(axis=1)[:, None] * xbar
    nu = -(lam.T @ xbar)
    return ClosedFormRay(hat_h, hat_k, lam, mu, nu, gamma)


def realize_cut_coefficients(ray: ClosedFormRay, flow: np.ndarray, Q: float):
    """(x coefficients |H| x N, y coefficients |H| x |H|) of the inequality Ω <= 0."""
    O = flow.sum(axis=1)
    cx = O[None, :] * ray.mu + ray.nu @ flow
    cy = Q * ray.lam
    return cx, cy


def dsp_objective(ray: ClosedFormRay, xbar: np.ndarray, ybar: np.ndarray, flow: np.ndarray, Q: float) -> float:
    O = flow.sum(axis=1)
    xbar = np.asarray(xbar, dtype=float)
    return float(
        (Q * np.asarray(ybar) * ray.lam).sum()
        + (O[None, :] * xbar * ray.mu).sum()
        + (ray.nu * (xbar @ flow.T)).sum()
    )


def make_cut(
    master: MasterModel,
    hat_h: int,
    hat_k: int,
    xbar: np.ndarray,
    scenario: Optional[int] = None,
    ybar: Optional[np.ndarray] = None,
    gamma: float = 1.0,
) -> FeasibilityCut:
    """Feasibility cut for a violated pair (hub positions) at the master point (x̄, ȳ).

    Raises NonSeparatingCut if the realized inequality does not cut off
    (x̄, ȳ) by more than 1e-6.
    """
    s = 0 if scenario is None else scenario
    flow = master.flows[s]
    xbar = np.asarray(xbar, dtype=float)
    ray = closed_form_ray(hat_h, hat_k, xbar, gamma)
    cx, cy = realize_cut_coefficients(ray, flow, master.Q)
    dense = np.zeros(master.num_cols)
    dense[: master.nx] = cx.ravel()
    base = master.nx + s * master.ny
    dense[base: base + master.ny] = cy.ravel()
    idx = np.flatnonzero(dense)
    val = dense[idx]
    if ybar is None:
        ybar = np.zeros((master.nh, master.nh))
    trigger = float((cx * xbar).sum() + (cy * ybar).sum())
    if trigger <= CUT_TOL:
        raise NonSeparatingCut(f"pair ({hat_h},{hat_k}) is not cut off at the given point (lhs={trigger:.3g})")
    return FeasibilityCut(
        idx=idx, val=val, source="closed_form", pair=(hat_h, hat_k),
        scenario=scenario if master.stochastic else None, trigger_value=trigger,
        x_row=xbar[hat_h].copy(), ray=ray,
    )


def closed_form_cut_value(hat_h: int, hat_k: int, xbar: np.ndarray, ybar: np.ndarray, flow: np.ndarray, Q: float) -> float:
    """Left side of the pair's cut at its own trigger point, without building it."""
    O = flow.sum(axis=1)
    F = xbar[hat_h] @ flow @ xbar[hat_k]
    return float(F - Q * ybar[hat_h, hat_k] - (O * xbar[hat_h] * (1.0 - xbar[hat_h])).sum())


@dataclasses.dataclass
class RayDiagnostic:
    ok: bool
    max_dual_lhs: float
    violated: Optional[tuple[int, int, int]]
    objective: float
    expected: float
    separating: bool
    lambda_sign_ok: bool


def verify_ray(ray: ClosedFormRay, xbar: np.ndarray, ybar: np.ndarray, flow: np.ndarray, Q: float) -> RayDiagnostic:
    """Check dual feasibility of every (h, k, i) triple and the dual objective at (x̄, ȳ)."""
    lhs = ray.lam[:, :, None] + ray.mu[:, None, :] + ray.nu[None, :, :]
    worst = float(lhs.max())
    violated = None
    if worst > RAY_TOL:
        violated = tuple(int(v) for v in np.argwhere(lhs > RAY_TOL)[0])
    lam_ok = bool(np.all(ray.lam <= RAY_TOL))
    obj = dsp_objective(ray, xbar, ybar, flow, Q)
    F = np.asarray(xbar, dtype=float)[ray.hat_h] @ flow @ np.asarray(xbar, dtype=float)[ray.hat_k]
    expected = ray.gamma * (F - Q * float(np.asarray(ybar)[ray.hat_h, ray.hat_k]))
    scale = max(1.0, abs(expected))
    ok = violated is None and lam_ok and abs(obj - expected) <= RAY_TOL * scale and obj > 0
    return RayDiagnostic(ok, worst, violated, obj, expected, obj > 0, lam_ok)


class RoutingSubproblem:
    """Flow LP of the complete network for one scenario, kept alive between calls.

    Rows: Σ_i z_ihk <= Q·ȳ_hk, then Σ_k z_ihk = O_i x̄_hi per (h, i), then
    Σ_h z_ihk = Σ_j w_ij x̄_kj per (k, i). Only right-hand sides change
    between calls, so HiGHS re-solves from the previous basis.
    """

    def __init__(self, master: MasterModel, scenario: int = 0):
        from .lp import LinearProgram

        nh, n = master.nh, master.n
        self.master = master
        self.scenario = scenario
        self.flow = master.flows[scenario]
        self.O = self.flow.sum(axis=1)
        ncol = n * nh * nh
        self.lp = LinearProgram(np.zeros(ncol), np.full(ncol, INF), np.zeros(ncol))
        col = lambda i, a, c: (i * nh + a) * nh + c
        rows = []
        for a in range(nh):
            for c in range(nh):
                rows.append(([col(i, a, c) for i in range(n)], [1.0] * n, "<=", 0.0))
        for a in range(nh):
            for i in range(n):
                rows.append(([col(i, a, c) for c in range(nh)], [1.0] * nh, "=", 0.0))
        for c in range(nh):
            for i in range(n):
                rows.append(([col(i, a, c) for a in range(nh)], [1.0] * nh, "=", 0.0))
        self.lp.add_rows(rows)
        self.all_rows = np.arange(self.lp.num_rows)

    def update(self, xbar: np.ndarray, ybar: np.ndarray) -> None:
        nh = self.master.nh
        cap = self.master.Q * np.asarray(ybar, dtype=float).ravel()
        out = (self.O[None, :] * xbar).ravel()
        into = (xbar @ self.flow.T).ravel()  # [k, i] = Σ_j w_ij x̄_kj
        lo = np.concatenate([np.full(nh * nh, -INF), out, into])
        hi = np.concatenate([cap, out, into])
        self.lp.set_row_bounds(self.all_rows, lo, hi)

    def separate(self, xbar: np.ndarray, ybar: np.ndarray) -> Optional[FeasibilityCut]:
        """Farkas-ray feasibility cut at (x̄, ȳ), or None if the flows can be routed."""
        from .lp import Infeasible, NumericalFailure, solve

        self.update(xbar, ybar)
        out = solve(self.lp)
        if not isinstance(out, Infeasible):
            return None
        M = self.master
        nh, n = M.nh, M.n
        ray_vec = out.farkas / float(np.abs(out.farkas).max())
        lam = ray_vec[: nh * nh].reshape(nh, nh)
        mu = ray_vec[nh * nh: nh * nh + nh * n].reshape(nh, n)
        nu = ray_vec[nh * nh + nh * n:].reshape(nh, n)
        ray = ClosedFormRay(-1, -1, lam, mu, nu)
        cx, cy = realize_cut_coefficients(ray, self.flow, M.Q)
        dense = np.zeros(M.num_cols)
        dense[: M.nx] = cx.ravel()
        base = M.nx + self.scenario * M.ny
        dense[base: base + M.ny] = cy.ravel()
        dense[np.abs(dense) < 1e-11] = 0.0
        idx = np.flatnonzero(dense)
        trigger = float((cx * xbar).sum() + (cy * ybar).sum())
        if trigger <= CUT_TOL:
            return None
        if np.any(lam > 1e-9):
            raise NumericalFailure("capacity multipliers of a routing ray must be nonpositive")
        return FeasibilityCut(
            idx=idx, val=dense[idx], source="farkas", pair=None,
            scenario=self.scenario if M.stochastic else None, trigger_value=trigger, ray=ray,
        )
