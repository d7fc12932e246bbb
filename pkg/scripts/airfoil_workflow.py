"""Density matching and the NSGA-II baseline on the synthetic airfoil model.

Runs ``match`` for each bundled airfoil target and one ``rdo`` run, then
lists the archive designs whose mean and variance lie within 10% of each
matched design, with their skewness next to the target's.

    python scripts/airfoil_workflow.py --output runs/airfoil
"""
import argparse
import csv
from pathlib import Path

import numpy as np

from densmatch import cli
from densmatch.config import parse_config
from densmatch.densities import derive_seed, sample
from densmatch.rdo import design_moments

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
TARGETS = ["airfoil_uniform", "airfoil_gaussian", "airfoil_beta"]


def target_skewness(dist):
    return dist.skewness() if hasattr(dist, "skewness") else 0.0


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--output", default="runs/airfoil")
    args = ap.parse_args()
    root = Path(args.output)

    rdo_cfg = parse_config(CONFIGS / "airfoil_rdo.json")
    if cli.main(["rdo", "--config", str(CONFIGS / "airfoil_rdo.json"), "--output", str(root / "rdo")]):
        raise SystemExit("rdo run failed")
    with open(root / "rdo" / "pareto.csv", newline="") as fh:
        pareto = np.array(list(csv.reader(fh))[1:], dtype=float)
    mean, var, skew = pareto[:, -3], pareto[:, -2], pareto[:, -1]

    model = rdo_cfg.build_model()
    omegas = sample(model.uncertainty, derive_seed(rdo_cfg.seed, cli.RDO_STREAM), rdo_cfg.kde.m_samples)
    for name in TARGETS:
        cfg = parse_config(CONFIGS / f"{name}.json")
        out = root / name
        if cli.main(["match", "--config", str(CONFIGS / f"{name}.json"), "--output", str(out)]):
            raise SystemExit(f"{name}: match failed")
        s = cli.read_design(out / "design.csv")
        mom = design_moments(model, s, omegas, cfg.surrogate_spec())
        t_skew = target_skewness(cfg.build_target())
        near = (np.abs(mean - mom.mean) <= 0.1 * abs(mom.mean)) & (np.abs(var - mom.variance) <= 0.1 * mom.variance)
        print(f"{name}: mean {mom.mean:.3f} variance {mom.variance:.3f} skewness {mom.skewness:.3f} "
              f"(target mean/variance {cfg.build_target().moments()}, skewness {t_skew:.3f})")
        for k in np.flatnonzero(near):
            print(f"    archive #{k}: mean {mean[k]:.3f} variance {var[k]:.3f} skewness {skew[k]:.3f}")
        if not near.any():
            print("    no archive design within 10% in both mean and variance")


if __name__ == "__main__":
    main()
