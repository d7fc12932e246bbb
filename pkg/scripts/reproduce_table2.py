"""Kernel-density runs on the linear-shift problem, averaged over seeds.

    python scripts/reproduce_table2.py --seeds 4
"""
import argparse
import time

import numpy as np

from densmatch.densities import Uniform
from densmatch.models import LinearShift
from densmatch.optimizer import DensityMatchProblem, final_distance, run_density_match
from densmatch.quadrature import trapezoid_grid

ROWS = [(1000, 10**5), (10_000, 10**5), (10_000, 10**6)]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=4)
    args = ap.parse_args()
    print("N,M,seed,s_star,distance_normalized,evaluations,seconds")
    for n, m in ROWS:
        grid = trapezoid_grid(0, 7, n)
        s, d = [], []
        for seed in range(args.seeds):
            t0 = time.perf_counter()
            rep = run_density_match(DensityMatchProblem(LinearShift(), Uniform(3, 4), grid,
                                                        m_samples=m, seed=seed))
            s.append(rep.final_design[0])
            d.append(final_distance(rep, grid, normalized=True))
            print(f"{n},{m},{seed},{s[-1]:.6f},{d[-1]:.6f},{rep.evaluations},"
                  f"{time.perf_counter() - t0:.1f}", flush=True)
        print(f"{n},{m},mean,{np.mean(s):.6f},{np.mean(d):.6f},,")


if __name__ == "__main__":
    main()
