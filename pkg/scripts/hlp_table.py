"""Compare vehicle-based designs with the discount-factor baseline over a grid of
synthetic instances and print percent differences (TC, #Veh1, #Veh2, %VUtil)."""
import argparse

import numpy as np

from hndpv import hlp
from hndpv.bnc import OPTIMAL, SolverOptions, solve_instance
from hndpv.instance import CapacityMode, random_instance


def fmt(d):
    if d["value"] is None:
        return "n/a"
    return f"{d['value']:+.2f}" + ("" if d["kind"] == "percent" else " abs")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=8)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--factors", default="3,0.75,2")
    ap.add_argument("--time-limit", type=float, default=300.0)
    args = ap.parse_args()
    factors = hlp.DiscountFactors.parse(args.factors)

    print(f"{'inst':<12}{'TC':>10}{'Veh1':>10}{'Veh2':>10}{'VUtil':>10}")
    for mode in (CapacityMode.TIGHT, CapacityMode.LOOSE):
        for veh in ("L1", "L2", "L3", "L4"):
            # same network for all four vehicle configurations of a capacity level
            inst = random_instance(args.n, np.random.default_rng(args.seed), mode, veh)
            res = solve_instance(inst, SolverOptions(time_limit=args.time_limit))
            if res.status != OPTIMAL:
                print(f"{inst.label:<12}{res.status}")
                continue
            base = hlp.solve_classical_hlp(inst, factors)
            cmp = hlp.compare(res.incumbent, hlp.post_assign_vehicles(base.assignment, inst))
            print(f"{inst.label:<12}{fmt(cmp['TC']):>10}{fmt(cmp['veh1']):>10}{fmt(cmp['veh2']):>10}{fmt(cmp['vutil']):>10}")


if __name__ == "__main__":
    main()
