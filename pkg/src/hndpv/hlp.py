"""Classical single-allocation hub location with constant discount factors, used as a baseline."""
from __future__ import annotations

import dataclasses
import warnings
from typing import Optional

import numpy as np

from . import costs
from .costs import Assignment, BudgetExceeded, Solution
from .instance import Instance


@dataclasses.dataclass(frozen=True)
class DiscountFactors:
    chi: float = 3.0  # collection
    alpha: float = 0.75  # transfer between hubs
    delta: float = 2.0  # distribution

    def __post_init__(self):
        if min(self.chi, self.alpha, self.delta) <= 0:
            raise ValueError("discount factors must be positive")
        if not (self.alpha < self.chi and self.alpha < self.delta):
            warnings.warn("transfer factor is not below the collection/distribution factors", stacklevel=2)

    @classmethod
    def parse(cls, text: str) -> "DiscountFactors":
        parts = [p for p in text.replace(" ", "").split(",") if p]
        if len(parts) != 3:
            raise ValueError(f"expected chi,alpha,delta, got {text!r}")
        return cls(*(float(p) for p in parts))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclasses.dataclass
class HLPResult:
    assignment: Assignment
    objective: float
    exact: bool


def hlp_objective(assign, instance: Instance, factors: DiscountFactors) -> float:
    """Fixed costs plus discounted per-unit transport cost of a single-allocation map."""
    a = np.asarray(assign, dtype=int)
    d = instance.distance
    w = instance.flow
    n = instance.n
    idx = np.arange(n)
    opened = sorted(set(a.tolist()))
    LC = float(sum(instance.fixed_cost[instance.hub_position(h)] for h in opened))
    collect = factors.chi * float(instance.origin @ d[idx, a])
    distribute = factors.delta * float(instance.destination @ d[a, idx])
    transfer = factors.alpha * float((w * d[np.ix_(a, a)]).sum())
    return LC + collect + transfer + distribute


def solve_classical_hlp(instance: Instance, factors: Optional[DiscountFactors] = None,
                        budget: int = costs.DEFAULT_BUDGET, allow_heuristic: bool = True) -> HLPResult:
    """Exact minimum by enumeration within ``budget``; otherwise a local search flagged as heuristic."""
    factors = factors or DiscountFactors()
    try:
        best, best_val = None, np.inf
        for a in costs.feasible_assignments(instance, (instance.flow,), budget):
            v = hlp_objective(a.assign, instance, factors)
            if best is None or costs._better(v, a.assign, best_val, best.assign):
                best, best_val = a, v
        if best is None:
            raise ValueError("no feasible assignment")
        return HLPResult(best, best_val, exact=True)
    except BudgetExceeded:
        if not allow_heuristic:
            raise
    return _local_search(instance, factors)


def _feasible(assign, instance: Instance) -> bool:
    return not Assignment(tuple(assign)).violations(instance)


def _greedy_seed(instance: Instance) -> list[int]:
    """Open hubs cheapest-first until the capacity fits, then assign each node to its nearest open hub."""
    order = sorted(instance.hubs, key=lambda h: instance.fixed_cost[instance.hub_position(h)])
    k = instance.p_hubs or 1
    while k <= len(order):
        opened = order[:k]
        assign = _nearest_with_capacity(instance, opened)
        if assign is not None and _feasible(assign, instance):
            return assign
        if instance.p_hubs:
            break
        k += 1
    raise ValueError("greedy seed found no feasible assignment")


def _nearest_with_capacity(instance: Instance, opened) -> Optional[list[int]]:
    O = instance.origin
    load = {h: O[h] for h in opened}
    assign = list(range(instance.n))
    for i in sorted((i for i in range(instance.n) if i not in opened), key=lambda i: -O[i]):
        for h in sorted(opened, key=lambda h: (instance.distance[i, h], h)):
            if load[h] + O[i] <= instance.capacity[instance.hub_position(h)] * (1 + 1e-12):
                assign[i] = h
                load[h] += O[i]
                break
        else:
            return None
    return assign


def _local_search(instance: Instance, factors: DiscountFactors) -> HLPResult:
    cur = _greedy_seed(instance)
    val = hlp_objective(cur, instance, factors)
    improved = True
    while improved:
        improved = False
        opened = sorted(set(cur))
        # single-node reassignments among open hubs
        for i in range(instance.n):
            if cur[i] == i:
                continue
            for h in opened:
                if h == cur[i]:
                    continue
                cand = cur.copy()
                cand[i] = h
                if _feasible(cand, instance):
                    v = hlp_objective(cand, instance, factors)
                    if v < val - 1e-9:
                        cur, val, improved = cand, v, True
                        break
            if improved:
                break
        if improved:
            continue
        # hub swaps: move every node of an open hub to a closed candidate
        for h in opened:
            for g in instance.hubs:
                if g in opened:
                    continue
                cand = [g if x == h else x for x in cur]
                cand[g] = g
                if _feasible(cand, instance):
                    v = hlp_objective(cand, instance, factors)
                    if v < val - 1e-9:
                        cur, val, improved = cand, v, True
                        break
            if improved:
                break
    return HLPResult(Assignment(tuple(cur)), val, exact=False)


def post_assign_vehicles(assignment: Assignment, instance: Instance) -> Solution:
    """The design re-costed with the minimum vehicle fleet."""
    return costs.evaluate_assignment(assignment, instance.flow, instance)


def _diff(base: Optional[float], other: Optional[float]) -> dict:
    if base is None or other is None:
        return {"value": None, "kind": "undefined"}
    if base == 0:
        return {"value": float(other - base), "kind": "absolute"}
    return {"value": 100.0 * (other - base) / base, "kind": "percent"}


def compare(hndpv: Solution, hlp: Solution) -> dict:
    """Differences of the HLP design against the HNDPv design; positive means the HLP value is larger."""
    h, b = hndpv, hlp
    return {
        "TC": _diff(h.TC, b.TC),
        "veh1": _diff(h.metrics.veh1, b.metrics.veh1),
        "veh2": _diff(h.metrics.veh2, b.metrics.veh2),
        "vutil": _diff(h.metrics.vutil, b.metrics.vutil),
        "hndpv": {"TC": h.TC, "veh1": h.metrics.veh1, "veh2": h.metrics.veh2, "vutil": h.metrics.vutil,
                  "hflow": h.metrics.hflow, "hubs": list(h.open_hubs)},
        "hlp": {"TC": b.TC, "veh1": b.metrics.veh1, "veh2": b.metrics.veh2, "vutil": b.metrics.vutil,
                "hflow": b.metrics.hflow, "hubs": list(b.open_hubs)},
    }
