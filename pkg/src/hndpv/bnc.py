"""LP-based branch-and-cut over the Benders master with lazy feasibility cuts."""
from __future__ import annotations

import csv
import dataclasses
import heapq
import logging
import math
import time
from typing import Optional, Union

import numpy as np

from . import benders, costs
from .benders import MasterModel
from .instance import Instance, ScenarioSet
from .lp import Infeasible, Optimal, solve as lp_solve

log = logging.getLogger(__name__)

OPTIMAL = "Optimal"
TIME_LIMIT_FEASIBLE = "TimeLimitFeasible"
TIME_LIMIT_NO_INCUMBENT = "TimeLimitNoIncumbent"
INFEASIBLE = "Infeasible"


@dataclasses.dataclass
class SolverOptions:
    time_limit: float = 3600.0
    rel_gap_tolerance: float = 1e-6
    integrality_tolerance: float = 1e-6
    cut_mode: str = "multi"  # "multi" | "single"
    valid_inequalities: bool = True
    root_fractional_rounds: int = 20
    fractional_depth: int = 0  # tree depth down to which fractional points are separated
    fractional_rounds: int = 5  # per non-root node
    routing_lp_cuts: bool = False  # fall back to the routing LP when no closed-form cut separates a fractional point
    seed: int = 0
    max_nodes: Optional[int] = None
    reduced_cost_fixing: bool = True

    def __post_init__(self):
        if not self.time_limit > 0:
            raise ValueError("time_limit must be positive")
        for name in ("rel_gap_tolerance", "integrality_tolerance"):
            if not 0 < getattr(self, name) < 1:
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.cut_mode not in ("multi", "single"):
            raise ValueError("cut_mode must be 'multi' or 'single'")


@dataclasses.dataclass
class Stats:
    bnodes: int = 0
    cuts: int = 0
    subproblem_calls: int = 0
    cpu_total_s: float = 0.0
    cpu_cuts_s: float = 0.0
    root_bound: float = -math.inf
    root_bound_final: float = -math.inf
    lp_solves: int = 0
    multi_violation_calls: int = 0
    productive_calls: int = 0  # calls that added at least one cut
    fixings: int = 0


@dataclasses.dataclass
class SolveResult:
    status: str
    incumbent: Optional[Union[costs.Solution, costs.StochasticSolution]]
    lower_bound: float
    gap_percent: float
    stats: Stats
    master: MasterModel
    trace: list = dataclasses.field(default_factory=list)

    @property
    def TC(self) -> Optional[float]:
        return None if self.incumbent is None else self.incumbent.TC


class TraceSink:
    """Collects (time_s, lower_bound, upper_bound, cuts, nodes) rows; optionally mirrors them to CSV."""

    HEADER = ("time_s", "lower_bound", "upper_bound", "cuts", "nodes")

    def __init__(self, path=None):
        self.rows: list[tuple] = []
        self._fh = None
        self._writer = None
        if path is not None:
            try:
                self._fh = open(path, "w", newline="")
                self._writer = csv.writer(self._fh)
                self._writer.writerow(self.HEADER)
            except OSError as exc:
                log.warning("trace disabled: %s", exc)
                self._fh = None

    def write(self, row: tuple) -> None:
        self.rows.append(row)
        if self._writer is not None:
            try:
                self._writer.writerow(row)
                self._fh.flush()
            except (OSError, ValueError) as exc:
                log.warning("trace aborted: %s", exc)
                self._writer = None

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


def gap_percent(ub: float, lb: float) -> float:
    if math.isinf(ub):
        return math.inf
    return 100.0 * (ub - lb) / max(abs(ub), 1e-9)


@dataclasses.dataclass
class _Node:
    changes: tuple  # ((col, lb, ub), ...) made at this node; ancestors hold the rest
    bound: float
    depth: int
    parent: Optional["_Node"] = None
    rounds: int = 0

    def all_changes(self) -> list:
        chain = []
        nd = self
        while nd is not None:
            chain.append(nd.changes)
            nd = nd.parent
        return [c for part in reversed(chain) for c in part]


class _Search:
    def __init__(self, master: MasterModel, options: SolverOptions, sink: Optional[TraceSink]):
        self.M = master
        self.opt = options
        self.sink = sink
        self.stats = Stats()
        self.lb0 = master.lp.lb.copy()
        self.ub0 = master.lp.ub.copy()
        self.ub = math.inf
        self.incumbent = None
        self.best_lb = -math.inf
        self.last_row = (None, None)
        self.t0 = time.perf_counter()
        self.c0 = time.process_time()
        self.seq = 0
        nh = master.nh
        self.x_open = np.array([master.hub_open_index(a) for a in range(nh)])
        self.x_other = np.array([master.xi(a, i) for a in range(nh) for i in range(master.n) if i != master.own[a]])
        self.y_cols = np.array([j for j in range(master.nx, master.num_cols) if not master.is_y_diag(j)], dtype=int)
        self.int_cols = np.concatenate([np.arange(master.nx), self.y_cols])
        self.root_rounds = 0
        self.routing = None
        self.pruned_min = math.inf

    # -- bookkeeping --------------------------------------------------------
    def elapsed(self) -> float:
        return time.perf_counter() - self.t0

    def out_of_time(self) -> bool:
        return self.elapsed() >= self.opt.time_limit

    def prune_level(self) -> float:
        if math.isinf(self.ub):
            return math.inf
        return self.ub - self.opt.rel_gap_tolerance * max(abs(self.ub), 1e-9)

    def record(self, lb: float) -> None:
        lb = min(lb, self.ub)
        improved = lb > self.best_lb + 1e-12 or self.ub != self.last_row[1]
        if lb > self.best_lb:
            self.best_lb = lb
        if improved and self.sink is not None:
            self.sink.write((round(self.elapsed(), 6), self.best_lb, self.ub, self.stats.cuts, self.stats.bnodes))
        self.last_row = (self.best_lb, self.ub)

    def offer(self, sol) -> None:
        if sol.TC < self.ub - 1e-9 * max(1.0, abs(self.ub) if not math.isinf(self.ub) else 1.0):
            self.ub = sol.TC
            self.incumbent = sol

    # -- incumbent construction ---------------------------------------------
    def completion(self, assignment: costs.Assignment):
        inst = self.M.instance
        if self.M.stochastic:
            return costs.evaluate_stochastic(assignment, self.M.scenarios, inst, check=False)
        return costs.evaluate_assignment(assignment, inst.flow, inst, check=False)

    def with_fleet(self, assignment: costs.Assignment, ys):
        inst = self.M.instance
        sols = [costs.evaluate_with_vehicles(assignment, f, inst, y) for f, y in zip(self.M.flows, ys)]
        if self.M.stochastic:
            return costs.combine_stochastic(assignment, self.M.scenarios, sols)
        return sols[0]

    # -- separation ---------------------------------------------------------
    def separate(self, x: np.ndarray, ys, integral: bool) -> list:
        M = self.M
        t = time.process_time()
        mode = "multi" if self.opt.cut_mode == "multi" else "single"
        cuts = []
        for s, (f, y) in enumerate(zip(M.flows, ys)):
            if M.general:
                from .general import separate_general
                self.stats.subproblem_calls += 1
                cut = separate_general(M, x, y, s)
                if cut is not None:
                    cuts.append(cut)
                    self.stats.productive_calls += 1
                continue
            viol = [v for v in benders.check_feasibility(x, y, f, M.Q) if v[0] != v[1]]
            if not integral:
                viol = [v for v in viol if benders.closed_form_cut_value(v[0], v[1], x, y, f, M.Q) > benders.CUT_TOL]
                if not viol and self.opt.routing_lp_cuts:
                    # no closed-form ray separates here; ask the routing LP for one
                    if self.routing is None:
                        self.routing = [benders.RoutingSubproblem(M, k) for k in range(M.m)]
                    self.stats.subproblem_calls += 1
                    cut = self.routing[s].separate(x, y)
                    if cut is not None:
                        cuts.append(cut)
                        self.stats.productive_calls += 1
                    continue
            self.stats.subproblem_calls += 1
            if len(viol) >= 2:
                self.stats.multi_violation_calls += 1
            before = len(cuts)
            for a, c, _ in benders.select_violations(viol, mode):
                try:
                    cuts.append(benders.make_cut(M, a, c, x, scenario=s, ybar=y))
                except benders.NonSeparatingCut:
                    pass
            self.stats.productive_calls += len(cuts) > before
        if cuts:
            M.add_cuts(cuts)
            self.stats.cuts += len(cuts)
        self.stats.cpu_cuts_s += time.process_time() - t
        return cuts

    # -- node processing ----------------------------------------------------
    def apply(self, node: _Node) -> None:
        lb = self.lb0.copy()
        ub = self.ub0.copy()
        for j, lo, hi in node.all_changes():
            lb[j], ub[j] = lo, hi
        self.M.lp.set_bounds(lb, ub)

    def fractional_allowed(self, node: _Node) -> bool:
        if node.depth == 0:
            self.root_rounds += 1
            return self.root_rounds <= self.opt.root_fractional_rounds
        if node.depth > self.opt.fractional_depth:
            return False
        node.rounds += 1
        return node.rounds <= self.opt.fractional_rounds

    def process(self, node: _Node):
        """Returns a list of children (possibly empty) or None if the time ran out."""
        M = self.M
        tol = self.opt.integrality_tolerance
        self.apply(node)
        is_root = node.depth == 0
        while True:
            if self.out_of_time():
                return None
            out = lp_solve(M.lp)
            self.stats.lp_solves += 1
            if isinstance(out, Infeasible) or not isinstance(out, Optimal):
                return []
            bound = out.objective
            if is_root and self.stats.root_bound == -math.inf:
                self.stats.root_bound = bound
            node.bound = max(node.bound, bound)
            if bound >= self.prune_level():
                self.pruned_min = min(self.pruned_min, bound)
                return []
            vec = out.x
            x, ys = M.split(vec)
            x_int = bool(np.all(np.abs(x - np.rint(x)) <= tol))
            if not x_int:
                if not M.general and self.fractional_allowed(node):
                    if self.separate(x, ys, integral=False):
                        continue
                break
            xr = np.rint(x)
            assignment = costs.Assignment.from_x(xr, M.instance)
            self.offer(self.completion(assignment))
            if self.separate(xr, ys, integral=True):
                continue
            y_off = vec[self.y_cols]
            if np.all(np.abs(y_off - np.rint(y_off)) <= tol):
                if M.general:
                    self.offer(self.with_fleet(assignment, [np.rint(y) for y in ys]))
                return []
            break
        if is_root:
            self.stats.root_bound_final = node.bound
        if node.bound >= self.prune_level():
            return []
        if self.opt.reduced_cost_fixing:
            node.changes = node.changes + self.tighten(out, bound)
        return self.branch(node, vec)

    def tighten(self, out: Optimal, bound: float) -> tuple:
        """Bound changes implied by reduced costs: moving an integer column t steps off its
        bound raises the node LP value by at least t·|d|, so it can only help while t·|d| < UB − bound."""
        slack = self.prune_level() - bound
        if not math.isfinite(slack):
            return ()
        lp = self.M.lp
        j = self.int_cols
        d = out.reduced_costs[j]
        lo, hi, v = lp.lb[j], lp.ub[j], out.x[j]
        eps = 1e-7 * max(1.0, abs(bound))
        changes = []
        at_lo = (np.abs(v - lo) <= 1e-9) & (d > eps)
        for c, l, u, dc in zip(j[at_lo], lo[at_lo], hi[at_lo], d[at_lo]):
            new_u = l + math.floor((slack + eps) / dc)
            if new_u < u:
                changes.append((int(c), float(l), float(new_u)))
                self.pruned_min = min(self.pruned_min, bound + (new_u - l + 1) * dc)
        at_hi = (np.abs(v - hi) <= 1e-9) & (d < -eps) & np.isfinite(hi)
        for c, l, u, dc in zip(j[at_hi], lo[at_hi], hi[at_hi], d[at_hi]):
            new_l = u - math.floor((slack + eps) / -dc)
            if new_l > l:
                changes.append((int(c), float(new_l), float(u)))
                self.pruned_min = min(self.pruned_min, bound + (u - new_l + 1) * -dc)
        self.stats.fixings += len(changes)
        return tuple(changes)

    def branch(self, node: _Node, vec: np.ndarray) -> list:
        tol = self.opt.integrality_tolerance
        for cols in (self.x_open, self.x_other, self.y_cols):
            vals = vec[cols]
            frac = np.abs(vals - np.rint(vals))
            if np.any(frac > tol):
                # most fractional; argmax returns the smallest index on ties
                k = int(np.argmax(np.minimum(vals - np.floor(vals), np.ceil(vals) - vals)))
                j = int(cols[k])
                v = vals[k]
                break
        else:
            return []
        lo, hi = self.M.lp.lb[j], self.M.lp.ub[j]
        down = _Node(((j, lo, math.floor(v)),), node.bound, node.depth + 1, node)
        up = _Node(((j, math.ceil(v), hi),), node.bound, node.depth + 1, node)
        # the child nearer the LP value is explored first while plunging
        return [down, up] if v - math.floor(v) >= 0.5 else [up, down]

    # -- main loop ----------------------------------------------------------
    def run(self) -> SolveResult:
        root = _Node((), -math.inf, 0)
        stack: list[_Node] = [root]  # depth-first until the first incumbent
        heap: list = []
        timed_out = False
        current_bound = math.inf
        self.record(-math.inf)
        while stack or heap:
            if self.opt.max_nodes is not None and self.stats.bnodes >= self.opt.max_nodes:
                timed_out = True
                break
            if self.incumbent is not None and stack:
                for nd in stack:
                    heapq.heappush(heap, (nd.bound, self._next(), nd))
                stack = []
            if stack:
                node = stack.pop()
            else:
                _, _, node = heapq.heappop(heap)
            if node.bound >= self.prune_level():
                self.pruned_min = min(self.pruned_min, node.bound)
                continue
            self.stats.bnodes += 1
            children = self.process(node)
            if children is None:
                timed_out = True
                current_bound = node.bound
                break
            if stack or self.incumbent is None:
                stack.extend(reversed(children))
            else:
                for ch in children:
                    heapq.heappush(heap, (ch.bound, self._next(), ch))
            self.record(self.open_bound(stack, heap))
        open_lb = self.open_bound(stack, heap)
        if timed_out:
            lb = min(open_lb, current_bound, self.ub)
            status = TIME_LIMIT_FEASIBLE if self.incumbent is not None else TIME_LIMIT_NO_INCUMBENT
        elif self.incumbent is None:
            lb, status = math.inf, INFEASIBLE
        else:
            lb, status = min(self.ub, self.pruned_min), OPTIMAL
        if lb > self.best_lb or status == OPTIMAL:
            self.record(lb)
        if self.stats.root_bound_final == -math.inf:
            self.stats.root_bound_final = self.stats.root_bound
        self.stats.cpu_total_s = time.process_time() - self.c0
        return SolveResult(
            status=status, incumbent=self.incumbent, lower_bound=lb,
            gap_percent=gap_percent(self.ub, lb) if self.incumbent is not None else math.inf,
            stats=self.stats, master=self.M, trace=list(self.sink.rows) if self.sink else [],
        )

    def _next(self) -> int:
        self.seq += 1
        return self.seq

    def open_bound(self, stack, heap) -> float:
        vals = [nd.bound for nd in stack]
        if heap:
            vals.append(heap[0][0])
        if not vals:
            return self.ub if self.incumbent is not None else -math.inf
        return min(min(vals), self.ub)


def solve(master: MasterModel, options: Optional[SolverOptions] = None, trace=None) -> SolveResult:
    """Branch-and-cut on ``master``; ``trace`` is a TraceSink, a CSV path, or None."""
    options = options or SolverOptions()
    sink = trace if isinstance(trace, TraceSink) or trace is None else TraceSink(trace)
    if sink is None:
        sink = TraceSink()
    try:
        return _Search(master, options, sink).run()
    finally:
        sink.close()


def solve_instance(instance: Instance, options: Optional[SolverOptions] = None,
                   scenarios: Optional[ScenarioSet] = None, trace=None) -> SolveResult:
    """Build the master for ``instance`` (deterministic or scenario-based) and solve it."""
    options = options or SolverOptions()
    master = benders.build_master(instance, scenarios, valid_inequalities=options.valid_inequalities)
    return solve(master, options, trace)
