"""Cost functions, forced vehicle counts, solution evaluation and brute-force oracles."""
from __future__ import annotations

import dataclasses
import itertools
import math
from typing import Iterator, Optional, Sequence

import numpy as np

from .instance import Instance, ScenarioSet

CEIL_TOL = 1e-9
DEFAULT_BUDGET = 10**7


class BudgetExceeded(RuntimeError):
    pass


def tol_ceil(v: float) -> int:
    """Ceiling that ignores float noise below 1e-9."""
    return max(0, math.ceil(v - CEIL_TOL))


def secondary_vehicle_count(O_i: float, D_i: float, q: float) -> int:
    return max(tol_ceil(D_i / q), tol_ceil(O_i / q))


def access_cost(h: int, i: int, instance: Instance) -> float:
    """Round-trip cost of serving node ``i`` from hub node ``h`` by one secondary vehicle."""
    v = instance.vehicle
    d = instance.distance
    return (v.g + v.b * d[h, i]) + v.b * d[i, h]


def interhub_vehicle_cost(h: int, k: int, instance: Instance) -> float:
    v = instance.vehicle
    return v.G + v.B * instance.distance[h, k]


def forced_vehicle_count(F_hk: float, Q: float) -> int:
    return tol_ceil(F_hk / Q)


def access_cost_matrix(instance: Instance) -> np.ndarray:
    """|H| x N matrix of round-trip access costs, zero on a hub's own node."""
    v = instance.vehicle
    hubs = list(instance.hubs)
    d = instance.distance
    c = v.g + v.b * d[hubs, :] + v.b * d[:, hubs].T
    for a, h in enumerate(hubs):
        c[a, h] = 0.0
    return c


def interhub_cost_matrix(instance: Instance) -> np.ndarray:
    """|H| x |H| primary vehicle costs with a zero diagonal."""
    hubs = list(instance.hubs)
    C = instance.vehicle.G + instance.vehicle.B * instance.distance[np.ix_(hubs, hubs)]
    np.fill_diagonal(C, 0.0)
    return C


def secondary_counts(flow: np.ndarray, q: float) -> np.ndarray:
    O, D = flow.sum(axis=1), flow.sum(axis=0)
    return np.array([secondary_vehicle_count(o, d, q) for o, d in zip(O, D)], dtype=int)


def dc_coefficients(instance: Instance, flow: Optional[np.ndarray] = None) -> np.ndarray:
    """|H| x N matrix of n±_i · c±_hi; the per-scenario version takes that scenario's flow."""
    flow = instance.flow if flow is None else flow
    return access_cost_matrix(instance) * secondary_counts(flow, instance.vehicle.q)[None, :]


@dataclasses.dataclass(frozen=True)
class Assignment:
    """Single allocation: ``assign[i]`` is the hub *node* serving node ``i``."""

    assign: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "assign", tuple(int(h) for h in self.assign))

    @property
    def open_hubs(self) -> tuple[int, ...]:
        return tuple(sorted(set(self.assign)))

    def x_matrix(self, instance: Instance) -> np.ndarray:
        """|H| x N indicator matrix x_hi."""
        x = np.zeros((instance.n_hubs, instance.n))
        pos = {h: a for a, h in enumerate(instance.hubs)}
        for i, h in enumerate(self.assign):
            x[pos[h], i] = 1.0
        return x

    @classmethod
    def from_x(cls, x: np.ndarray, instance: Instance) -> "Assignment":
        return cls(tuple(instance.hubs[a] for a in np.asarray(x).argmax(axis=0)))

    def violations(self, instance: Instance, flows: Sequence[np.ndarray] = ()) -> list[str]:
        """Reasons this assignment is outside the feasible assignment set (empty if feasible)."""
        out = []
        hubs = set(instance.hubs)
        if len(self.assign) != instance.n:
            return [f"assignment covers {len(self.assign)} nodes, instance has {instance.n}"]
        for i, h in enumerate(self.assign):
            if h not in hubs:
                out.append(f"node {i} assigned to non-candidate {h}")
            elif self.assign[h] != h:
                out.append(f"node {i} assigned to {h}, which is not open")
        if out:
            return out
        if instance.p_hubs is not None and len(self.open_hubs) != instance.p_hubs:
            out.append(f"{len(self.open_hubs)} hubs open, p={instance.p_hubs}")
        if instance.capacitated:
            for f in flows or (instance.flow,):
                O = f.sum(axis=1)
                load = np.zeros(instance.n_hubs)
                for i, h in enumerate(self.assign):
                    load[instance.hub_position(h)] += O[i]
                over = load > instance.capacity * (1 + 1e-12)
                for a in np.flatnonzero(over):
                    out.append(f"hub {instance.hubs[a]} load {load[a]} exceeds capacity {instance.capacity[a]}")
        return out


def interhub_flows(x: np.ndarray, flow: np.ndarray) -> np.ndarray:
    """F_hk = Σ_i Σ_j w_ij x_hi x_kj for (possibly fractional) x of shape |H| x N."""
    return x @ flow @ x.T


def origin_decomposition(x: np.ndarray, flow: np.ndarray) -> np.ndarray:
    """z_ihk = x_hi Σ_j w_ij x_kj as an N x |H| x |H| array."""
    to_cluster = flow @ x.T  # N x |H|: Σ_j w_ij x_kj
    return x.T[:, :, None] * to_cluster[:, None, :]


@dataclasses.dataclass
class Costs:
    TC: float
    LC: float
    DC: float
    HC: float


@dataclasses.dataclass
class Metrics:
    veh1: int
    veh2: int
    hflow: float
    vutil: Optional[float]


@dataclasses.dataclass
class Solution:
    assignment: Assignment
    y: np.ndarray  # |H| x |H| primary vehicles, zero diagonal
    costs: Costs
    metrics: Metrics
    F: np.ndarray

    @property
    def TC(self) -> float:
        return self.costs.TC

    @property
    def open_hubs(self) -> tuple[int, ...]:
        return self.assignment.open_hubs


def vutil(hflow: float, veh1: int, Q: float) -> Optional[float]:
    return 100.0 * hflow / (veh1 * Q) if veh1 > 0 else None


def evaluate_assignment(assignment: Assignment, flow: np.ndarray, instance: Instance, check: bool = True) -> Solution:
    """Optimal completion of ``assignment``: forced vehicle counts and all cost terms."""
    if check:
        bad = assignment.violations(instance, (flow,))
        if bad:
            raise ValueError("infeasible assignment: " + "; ".join(bad))
    v = instance.vehicle
    x = assignment.x_matrix(instance)
    open_pos = [instance.hub_position(h) for h in assignment.open_hubs]
    LC = float(math.fsum(instance.fixed_cost[open_pos]))
    counts = secondary_counts(flow, v.q)
    cmat = access_cost_matrix(instance)
    DC = 0.0
    veh2 = 0
    for i, h in enumerate(assignment.assign):
        if i != h:
            DC += float(counts[i] * cmat[instance.hub_position(h), i])
            veh2 += int(counts[i])
    F = interhub_flows(x, flow)
    nh = instance.n_hubs
    y = np.zeros((nh, nh), dtype=int)
    for a in range(nh):
        for c in range(nh):
            if a != c and F[a, c] > 0:
                y[a, c] = forced_vehicle_count(F[a, c], v.Q)
    HC = float((interhub_cost_matrix(instance) * y).sum())
    off = ~np.eye(nh, dtype=bool)
    hflow = float(F[off].sum())
    veh1 = int(y.sum())
    return Solution(
        assignment=assignment, y=y, costs=Costs(TC=LC + DC + HC, LC=LC, DC=DC, HC=HC),
        metrics=Metrics(veh1=veh1, veh2=veh2, hflow=hflow, vutil=vutil(hflow, veh1, v.Q)), F=F,
    )


@dataclasses.dataclass
class StochasticSolution:
    assignment: Assignment
    probabilities: tuple[float, ...]
    scenarios: list[Solution]  # per-scenario completions (their LC is the shared location cost)
    LC: float
    TC: float

    @property
    def open_hubs(self) -> tuple[int, ...]:
        return self.assignment.open_hubs

    @property
    def y(self) -> list[np.ndarray]:
        return [s.y for s in self.scenarios]


def evaluate_stochastic(assignment: Assignment, scenarios: ScenarioSet, instance: Instance, check: bool = True) -> StochasticSolution:
    if check:
        bad = assignment.violations(instance, scenarios.flows)
        if bad:
            raise ValueError("infeasible assignment: " + "; ".join(bad))
    sols = [evaluate_assignment(assignment, f, instance, check=False) for f in scenarios.flows]
    LC = sols[0].costs.LC
    TC = LC + sum(p * (s.costs.DC + s.costs.HC) for p, s in zip(scenarios.probabilities, sols))
    return StochasticSolution(assignment, scenarios.probabilities, sols, LC, TC)


def count_maps(instance: Instance) -> int:
    return instance.n_hubs ** instance.n


def feasible_assignments(instance: Instance, flows: Sequence[np.ndarray] = (), budget: int = DEFAULT_BUDGET) -> Iterator[Assignment]:
    """All single allocations satisfying the open-hub, p-hub and capacity rules.

    The admissible maps are generated hub set by hub set rather than by
    filtering all |H|^N maps; the budget still applies to |H|^N.
    """
    if count_maps(instance) > budget:
        raise BudgetExceeded(f"|H|^N = {count_maps(instance)} exceeds enumeration budget {budget}")
    hubs = instance.hubs
    flows = tuple(flows) or (instance.flow,)
    loads = [f.sum(axis=1) for f in flows]
    sizes = [instance.p_hubs] if instance.p_hubs else range(1, len(hubs) + 1)
    for k in sizes:
        for S in itertools.combinations(hubs, k):
            others = [i for i in range(instance.n) if i not in S]
            for choice in itertools.product(S, repeat=len(others)):
                assign = list(range(instance.n))
                for i, h in zip(others, choice):
                    assign[i] = h
                a = Assignment(tuple(assign))
                if instance.capacitated and not _capacity_ok(a, instance, loads):
                    continue
                yield a


def _capacity_ok(a: Assignment, instance: Instance, loads) -> bool:
    for O in loads:
        load = {}
        for i, h in enumerate(a.assign):
            load[h] = load.get(h, 0.0) + O[i]
        for h, l in load.items():
            if l > instance.capacity[instance.hub_position(h)] * (1 + 1e-12):
                return False
    return True


def _better(tc: float, key: tuple, best_tc: float, best_key: tuple) -> bool:
    tol = 1e-9 * max(1.0, abs(best_tc))
    if tc < best_tc - tol:
        return True
    return abs(tc - best_tc) <= tol and key < best_key


def brute_force_oracle(instance: Instance, budget: int = DEFAULT_BUDGET, flow: Optional[np.ndarray] = None) -> Optional[Solution]:
    """Exhaustive optimum over all feasible assignments (None if there is none).

    Ties within 1e-9 relative go to the lexicographically smallest assignment.
    """
    flow = instance.flow if flow is None else flow
    best = None
    for a in feasible_assignments(instance, (flow,), budget):
        sol = evaluate_assignment(a, flow, instance, check=False)
        if best is None or _better(sol.TC, a.assign, best.TC, best.assignment.assign):
            best = sol
    return best


def brute_force_oracle_stochastic(instance: Instance, scenarios: ScenarioSet, budget: int = DEFAULT_BUDGET) -> Optional[StochasticSolution]:
    best = None
    for a in feasible_assignments(instance, scenarios.flows, budget):
        sol = evaluate_stochastic(a, scenarios, instance, check=False)
        if best is None or _better(sol.TC, a.assign, best.TC, best.assignment.assign):
            best = sol
    return best


def evaluate_with_vehicles(assignment: Assignment, flow: np.ndarray, instance: Instance, y: np.ndarray) -> Solution:
    """Costs of ``assignment`` operated with the given primary fleet ``y`` (diagonal ignored).

    Used where the forced counts are not the cheapest fleet, i.e. when
    flows may be routed over intermediate hubs.
    """
    base = evaluate_assignment(assignment, flow, instance, check=False)
    y = np.rint(np.asarray(y, dtype=float)).astype(int)
    np.fill_diagonal(y, 0)
    HC = float((interhub_cost_matrix(instance) * y).sum())
    veh1 = int(y.sum())
    c = base.costs
    return Solution(
        assignment=assignment, y=y, costs=Costs(TC=c.LC + c.DC + HC, LC=c.LC, DC=c.DC, HC=HC),
        metrics=Metrics(veh1=veh1, veh2=base.metrics.veh2, hflow=base.metrics.hflow,
                        vutil=vutil(base.metrics.hflow, veh1, instance.vehicle.Q)),
        F=base.F,
    )


def combine_stochastic(assignment: Assignment, scenarios: ScenarioSet, sols: Sequence[Solution]) -> StochasticSolution:
    LC = sols[0].costs.LC
    TC = LC + sum(p * (s.costs.DC + s.costs.HC) for p, s in zip(scenarios.probabilities, sols))
    return StochasticSolution(assignment, scenarios.probabilities, list(sols), LC, TC)
