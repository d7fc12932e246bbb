"""Analytic-density runs on the linear-shift problem for several grid sizes.

    python scripts/reproduce_table1.py --sizes 1000 10000 100000
"""
import argparse
import time

from densmatch.densities import Uniform
from densmatch.models import LinearShift
from densmatch.optimizer import DensityMatchProblem, final_distance, run_density_match
from densmatch.quadrature import trapezoid_grid


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[1000, 10_000, 100_000])
    args = ap.parse_args()
    print("N,s_star,distance_normalized,distance,seconds")
    for n in args.sizes:
        grid = trapezoid_grid(0, 7, n)
        t0 = time.perf_counter()
        rep = run_density_match(DensityMatchProblem(LinearShift(), Uniform(3, 4), grid, s0=[1.0],
                                                    response_pdf="analytic"))
        dt = time.perf_counter() - t0
        print(f"{n},{rep.final_design[0]:.6f},{final_distance(rep, grid, normalized=True):.6f},"
              f"{final_distance(rep, grid):.6f},{dt:.2f}")


if __name__ == "__main__":
    main()
