"""Cross-check branch-and-cut against exhaustive enumeration on random tiny instances."""
import argparse

import numpy as np

from hndpv import costs
from hndpv.benders import InfeasibleModel
from hndpv.bnc import SolverOptions, solve_instance
from hndpv.instance import CapacityMode, random_instance


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--count", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    bad = 0
    for t in range(args.count):
        n = int(rng.integers(3, 7))
        mode = list(CapacityMode)[int(rng.integers(3))]
        veh = ["L1", "L2", "L3", "L4"][int(rng.integers(4))]
        inst = random_instance(n, rng, mode, veh)
        ref = costs.brute_force_oracle(inst)
        try:
            got = solve_instance(inst, SolverOptions(time_limit=60)).TC
        except InfeasibleModel:
            got = None
        ok = (ref is None and got is None) or (ref is not None and got is not None and abs(ref.TC - got) <= 1e-6 * max(1, ref.TC))
        bad += not ok
        print(f"{t:3d} {inst.label:<14} oracle={None if ref is None else round(ref.TC, 3)} bc={None if got is None else round(got, 3)} {'ok' if ok else 'MISMATCH'}")
    print(f"{args.count - bad}/{args.count} agree")


if __name__ == "__main__":
    main()
