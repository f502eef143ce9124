"""Solve one synthetic instance at desk scale and write its convergence trace.

    python scripts/scaling_smoke.py --n 20 --capacity tight --vehicle L1 --trace trace20.csv
"""
import argparse
import time

import numpy as np

from hndpv.bnc import SolverOptions, solve_instance
from hndpv.instance import CapacityMode, load_instance, random_instance


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=20)
    ap.add_argument("--seed", type=int, default=2020)
    ap.add_argument("--capacity", default="tight", choices=[m.value for m in CapacityMode])
    ap.add_argument("--vehicle", default="L1")
    ap.add_argument("--instance", help="solve this instance file instead of a synthetic one")
    ap.add_argument("--time-limit", type=float, default=600.0)
    ap.add_argument("--trace", default="trace.csv")
    args = ap.parse_args()

    mode = CapacityMode(args.capacity)
    if args.instance:
        inst = load_instance(args.instance, mode)
    else:
        inst = random_instance(args.n, np.random.default_rng(args.seed), mode, args.vehicle)
    t0 = time.time()
    res = solve_instance(inst, SolverOptions(time_limit=args.time_limit), trace=args.trace)
    s = res.stats
    print(f"{inst.label}: {res.status} TC={res.TC} LB={res.lower_bound:.2f} gap={res.gap_percent:.4f}%")
    print(f"root={s.root_bound:.2f} root_after_cuts={s.root_bound_final:.2f} nodes={s.bnodes} "
          f"cuts={s.cuts} calls={s.subproblem_calls} wall={time.time() - t0:.1f}s")
    if res.incumbent is not None:
        print("hubs", res.incumbent.assignment.open_hubs)


if __name__ == "__main__":
    main()
