"""Command-line interface: ``hndpv solve|solve-stochastic|oracle|import-ap|compare-hlp|validate``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import benders, bnc, costs, hlp, report
from .instance import (
    CapacityMode, InstanceError, NetworkMode, generate_scenarios, import_ap, load_instance,
    load_scenarios, parse_vehicle,
)
from .lp import NumericalFailure

EXIT_OK = 0
EXIT_TIME_FEASIBLE = 2
EXIT_INFEASIBLE = 3
EXIT_INPUT = 4
EXIT_TIME_NO_INCUMBENT = 5

STATUS_EXIT = {
    bnc.OPTIMAL: EXIT_OK,
    bnc.TIME_LIMIT_FEASIBLE: EXIT_TIME_FEASIBLE,
    bnc.INFEASIBLE: EXIT_INFEASIBLE,
    bnc.TIME_LIMIT_NO_INCUMBENT: EXIT_TIME_NO_INCUMBENT,
}

log = logging.getLogger("hndpv")


class InputError(Exception):
    pass


def _add_instance_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("instance", help="instance JSON file")
    p.add_argument("--capacity", choices=[m.value for m in CapacityMode], help="capacity level to use")
    p.add_argument("--vehicle", help="L1|L2|L3|L4 or 'custom Q,q,B,b,G,g' (overrides the file)")
    p.add_argument("--p", type=int, dest="p_hubs", help="open exactly this many hubs")
    p.add_argument("--network", choices=[m.value for m in NetworkMode], help="inter-hub network structure")
    p.add_argument("--report", default="-", help="report path ('-' for stdout)")


def _add_solver_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--cuts", choices=["multi", "single"], default="multi")
    p.add_argument("--valid-ineq", choices=["on", "off"], default="on")
    p.add_argument("--time-limit", type=float, default=3600.0)
    p.add_argument("--gap", type=float, default=1e-6, help="relative gap tolerance")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1, help="accepted for compatibility; the search is single-worker")
    p.add_argument("--trace", help="convergence trace CSV path")
    p.add_argument("--cut-audit", help="write one line per pooled cut to this path")


def _load(args):
    try:
        inst = load_instance(args.instance, CapacityMode(args.capacity) if args.capacity else None)
        changes = {}
        if args.vehicle:
            changes["vehicle"] = parse_vehicle(args.vehicle)
        if args.p_hubs is not None:
            changes["p_hubs"] = args.p_hubs
        if args.network:
            changes["network"] = NetworkMode(args.network)
        return inst.replace(**changes) if changes else inst
    except (OSError, InstanceError, ValueError) as exc:
        raise InputError(str(exc)) from None


def _options(args) -> bnc.SolverOptions:
    try:
        return bnc.SolverOptions(
            time_limit=args.time_limit, rel_gap_tolerance=args.gap, cut_mode=args.cuts,
            valid_inequalities=args.valid_ineq == "on", seed=args.seed,
        )
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _options_echo(args, opts: bnc.SolverOptions) -> dict:
    return {
        "cuts": opts.cut_mode, "valid_ineq": opts.valid_inequalities, "time_limit": opts.time_limit,
        "gap": opts.rel_gap_tolerance, "seed": opts.seed, "threads": args.threads,
    }


def _run(instance, opts, scenarios, args) -> bnc.SolveResult:
    master = benders.build_master(instance, scenarios, valid_inequalities=opts.valid_inequalities)
    result = bnc.solve(master, opts, args.trace)
    if args.cut_audit:
        Path(args.cut_audit).write_text("".join(line + "\n" for line in master.audit_lines()))
    return result


def _infeasible_report(cmd, instance, echo, msg) -> dict:
    return report.build_report(cmd, instance, echo, bnc.INFEASIBLE, extra={"message": msg})


def cmd_solve(args) -> int:
    instance = _load(args)
    opts = _options(args)
    echo = _options_echo(args, opts)
    try:
        result = _run(instance, opts, None, args)
    except benders.InfeasibleModel as exc:
        report.write_report(_infeasible_report("solve", instance, echo, str(exc)), args.report)
        return EXIT_INFEASIBLE
    rep = report.build_report("solve", instance, echo, result.status, result.incumbent, result)
    report.write_report(rep, args.report)
    return STATUS_EXIT[result.status]


def cmd_solve_stochastic(args) -> int:
    instance = _load(args)
    opts = _options(args)
    try:
        if args.scenarios:
            scen = load_scenarios(args.scenarios, instance.n)
        elif args.gen:
            scen = generate_scenarios(instance, args.gen, args.seed)
        else:
            raise InputError("need --scenarios FILE or --gen M")
    except (OSError, InstanceError, ValueError) as exc:
        raise InputError(str(exc)) from None
    echo = _options_echo(args, opts)
    echo["scenarios"] = args.scenarios if args.scenarios else {"gen": args.gen, "seed": args.seed}
    try:
        result = _run(instance, opts, scen, args)
    except benders.InfeasibleModel as exc:
        report.write_report(_infeasible_report("solve-stochastic", instance, echo, str(exc)), args.report)
        return EXIT_INFEASIBLE
    rep = report.build_report("solve-stochastic", instance, echo, result.status, result.incumbent, result)
    report.write_report(rep, args.report)
    return STATUS_EXIT[result.status]


def cmd_oracle(args) -> int:
    instance = _load(args)
    echo = {"budget": args.budget}
    try:
        if instance.network is NetworkMode.GENERAL:
            from .general import general_oracle
            sol = general_oracle(instance, budget=args.budget)
        else:
            sol = costs.brute_force_oracle(instance, budget=args.budget)
    except costs.BudgetExceeded as exc:
        raise InputError(str(exc)) from None
    status = bnc.OPTIMAL if sol is not None else bnc.INFEASIBLE
    report.write_report(report.build_report("oracle", instance, echo, status, sol), args.report)
    return EXIT_OK if sol is not None else EXIT_INFEASIBLE


def cmd_import_ap(args) -> int:
    try:
        vehicle = parse_vehicle(args.vehicle)
        tight = import_ap(args.raw, CapacityMode.TIGHT, vehicle, args.name)
        loose = import_ap(args.raw, CapacityMode.LOOSE, vehicle, args.name)
    except (OSError, InstanceError, ValueError) as exc:
        raise InputError(str(exc)) from None
    doc = tight.to_dict()
    doc["capacity"] = {"tight": tight.capacity.tolist(), "loose": loose.capacity.tolist()}
    doc.pop("capacity_mode", None)
    text = json.dumps(doc, indent=1, sort_keys=True) + "\n"
    if args.out in (None, "-"):
        print(text, end="")
    else:
        Path(args.out).write_text(text)
    return EXIT_OK


def cmd_compare_hlp(args) -> int:
    instance = _load(args)
    opts = _options(args)
    try:
        factors = hlp.DiscountFactors.parse(args.factors)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    echo = _options_echo(args, opts)
    echo["factors"] = factors.to_dict()
    try:
        result = _run(instance, opts, None, args)
    except benders.InfeasibleModel as exc:
        report.write_report(_infeasible_report("compare-hlp", instance, echo, str(exc)), args.report)
        return EXIT_INFEASIBLE
    baseline = None
    if result.incumbent is not None:
        base = hlp.solve_classical_hlp(instance, factors)
        hlp_sol = hlp.post_assign_vehicles(base.assignment, instance)
        baseline = hlp.compare(result.incumbent, hlp_sol)
        baseline["exact"] = base.exact
        baseline["hlp_objective"] = base.objective
        baseline["hlp_assignment"] = {str(i): h for i, h in enumerate(base.assignment.assign)}
    rep = report.build_report("compare-hlp", instance, echo, result.status, result.incumbent, result, baseline)
    report.write_report(rep, args.report)
    return STATUS_EXIT[result.status]


def cmd_validate(args) -> int:
    try:
        rep = json.loads(Path(args.report_file).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(str(exc)) from None
    errs = report.validate_report(rep)
    for e in errs:
        print(e, file=sys.stderr)
    if not errs:
        print("ok")
    return EXIT_OK if not errs else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hndpv", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one deterministic instance")
    _add_instance_args(p)
    _add_solver_args(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("solve-stochastic", help="solve the scenario-expanded model")
    _add_instance_args(p)
    _add_solver_args(p)
    p.add_argument("--scenarios", help="scenario JSON file")
    p.add_argument("--gen", type=int, help="generate this many equiprobable scenarios (uses --seed)")
    p.set_defaults(func=cmd_solve_stochastic)

    p = sub.add_parser("oracle", help="exhaustive enumeration (tiny instances)")
    _add_instance_args(p)
    p.add_argument("--budget", type=int, default=costs.DEFAULT_BUDGET, help="maximum |H|^N")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("import-ap", help="convert a raw AP text file to the instance JSON format")
    p.add_argument("raw")
    p.add_argument("--vehicle", default="L1")
    p.add_argument("--name")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_import_ap)

    p = sub.add_parser("compare-hlp", help="solve and compare with the discount-factor hub location design")
    _add_instance_args(p)
    _add_solver_args(p)
    p.add_argument("--factors", default="3,0.75,2", help="chi,alpha,delta")
    p.set_defaults(func=cmd_compare_hlp)

    p = sub.add_parser("validate", help="re-check a report's internal consistency")
    p.add_argument("report_file")
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0, None) else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
