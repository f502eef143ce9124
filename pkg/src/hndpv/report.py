"""Run reports: construction, JSON serialization and self-consistency validation."""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Optional

import numpy as np

from . import costs
from .bnc import SolveResult
from .instance import Instance

SCHEMA_VERSION = 1
REL_TOL = 1e-9


def _clean(v):
    """JSON-safe copy: numpy scalars/arrays to Python, non-finite floats to null."""
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    return v


def instance_block(instance: Instance) -> dict:
    return {
        "name": instance.name,
        "label": instance.label,
        "N": instance.n,
        "hub_candidates": list(instance.hubs),
        "capacity_mode": instance.capacity_mode.value if instance.capacity_mode else None,
        "vehicle": instance.vehicle.label,
        "vehicle_params": instance.vehicle.to_dict(),
        "p_hubs": instance.p_hubs,
        "network": instance.network.value,
    }


def solution_block(sol: costs.Solution) -> dict:
    return {
        "costs": {"TC": sol.costs.TC, "LC": sol.costs.LC, "DC": sol.costs.DC, "HC": sol.costs.HC},
        "hubs": list(sol.open_hubs),
        "assignment": {str(i): h for i, h in enumerate(sol.assignment.assign)},
        "y": np.asarray(sol.y, dtype=int).tolist(),
        "metrics": {"veh1": sol.metrics.veh1, "veh2": sol.metrics.veh2,
                    "vutil": sol.metrics.vutil, "hflow": sol.metrics.hflow},
    }


def stochastic_block(sol: costs.StochasticSolution) -> dict:
    scen = []
    for p, s in zip(sol.probabilities, sol.scenarios):
        scen.append({
            "probability": p, "DC": s.costs.DC, "HC": s.costs.HC,
            "y": np.asarray(s.y, dtype=int).tolist(),
            "metrics": {"veh1": s.metrics.veh1, "veh2": s.metrics.veh2,
                        "vutil": s.metrics.vutil, "hflow": s.metrics.hflow},
        })
    return {
        "costs": {"TC": sol.TC, "LC": sol.LC},
        "hubs": list(sol.open_hubs),
        "assignment": {str(i): h for i, h in enumerate(sol.assignment.assign)},
        "scenarios": scen,
    }


def stats_block(result: SolveResult) -> dict:
    s = result.stats
    return {
        "bnodes": s.bnodes, "cuts": s.cuts, "calls": s.subproblem_calls,
        "cpu_total_s": s.cpu_total_s, "cpu_cuts_s": s.cpu_cuts_s,
        "gap_percent": result.gap_percent, "lower_bound": result.lower_bound,
        "root_bound": s.root_bound, "lp_solves": s.lp_solves,
    }


def build_report(command: str, instance: Instance, options: dict, status: str,
                 solution=None, result: Optional[SolveResult] = None, baseline: Optional[dict] = None,
                 extra: Optional[dict] = None) -> dict:
    rep = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "instance": instance_block(instance),
        "options": options,
        "status": status,
        "stochastic": isinstance(solution, costs.StochasticSolution),
    }
    if isinstance(solution, costs.StochasticSolution):
        rep.update(stochastic_block(solution))
    elif solution is not None:
        rep.update(solution_block(solution))
    if result is not None:
        rep["stats"] = stats_block(result)
    if baseline is not None:
        rep["baseline"] = baseline
    if extra:
        rep.update(extra)
    return _clean(rep)


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def write_report(report: dict, path) -> None:
    text = dumps(report)
    if path is None or str(path) == "-":
        print(text, end="")
    else:
        Path(path).write_text(text)


def _close(a: float, b: float) -> bool:
    return abs(a - b) <= REL_TOL * max(1.0, abs(a), abs(b))


def _check_metrics(m: dict, y, Q: float, where: str) -> list[str]:
    errs = []
    veh1, hflow, vu = m.get("veh1"), m.get("hflow"), m.get("vutil")
    if y is not None:
        y = np.asarray(y)
        if np.any(np.diagonal(y) != 0):
            errs.append(f"{where}: diagonal y entries must be zero")
        if int(y.sum()) != veh1:
            errs.append(f"{where}: veh1={veh1} but y sums to {int(y.sum())}")
    if veh1 and veh1 >= 1:
        expected = costs.vutil(hflow, veh1, Q)
        if vu != expected:
            errs.append(f"{where}: vutil {vu!r} != 100*hflow/(veh1*Q) = {expected!r}")
        elif not 0 < vu <= 100 + 1e-9:
            errs.append(f"{where}: vutil {vu!r} outside (0, 100]")
    elif vu is not None:
        errs.append(f"{where}: vutil must be null without primary vehicles")
    return errs


def validate_report(rep: dict) -> list[str]:
    """Self-consistency problems of a report (empty list when it is consistent)."""
    errs = []
    if rep.get("schema_version") != SCHEMA_VERSION:
        errs.append(f"schema_version {rep.get('schema_version')!r} is not {SCHEMA_VERSION}")
    if "costs" not in rep:
        return errs
    Q = float(rep["instance"]["vehicle_params"]["Q"])
    c = rep["costs"]
    if rep.get("stochastic"):
        scen = rep["scenarios"]
        total = c["LC"] + sum(s["probability"] * (s["DC"] + s["HC"]) for s in scen)
        if not _close(c["TC"], total):
            errs.append(f"TC {c['TC']!r} != LC + sum p_s(DC_s + HC_s) = {total!r}")
        if not _close(sum(s["probability"] for s in scen), 1.0):
            errs.append("scenario probabilities do not sum to 1")
        for k, s in enumerate(scen):
            errs += _check_metrics(s["metrics"], s.get("y"), Q, f"scenario {k}")
    else:
        total = c["LC"] + c["DC"] + c["HC"]
        if not _close(c["TC"], total):
            errs.append(f"TC {c['TC']!r} != LC + DC + HC = {total!r}")
        errs += _check_metrics(rep["metrics"], rep.get("y"), Q, "metrics")
    hubs = set(rep.get("hubs", []))
    assign = rep.get("assignment", {})
    if set(assign.values()) != hubs:
        errs.append("hubs list differs from the set of assigned hubs")
    for h in hubs:
        if assign.get(str(h)) != h:
            errs.append(f"hub {h} is not assigned to itself")
    if "baseline" in rep and rep["baseline"].get("hlp"):
        b = rep["baseline"]["hlp"]
        if b.get("veh1"):
            if b.get("vutil") != costs.vutil(b["hflow"], b["veh1"], Q):
                errs.append("baseline vutil is not 100*hflow/(veh1*Q)")
    return errs
