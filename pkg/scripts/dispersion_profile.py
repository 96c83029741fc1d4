"""Posterior mean, variance and CV of a new sample's density on the dispersion scenario.

    python scripts/dispersion_profile.py --n-samples 100 --n-obs 200
"""

import argparse
from pathlib import Path

from hapt import io
from hapt.dispersion import dispersion_grid
from hapt.partition import bin_data, build_tree
from hapt.simgen import Scenario, generate
from hapt.tree_hmm import fit


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-samples", type=int, default=100)
    ap.add_argument("--n-obs", type=int, default=200)
    ap.add_argument("--depth", type=int, default=10)
    ap.add_argument("--grid", type=int, default=1024)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--output", type=Path, default=Path("results/dispersion.csv"))
    args = ap.parse_args()

    d = generate(Scenario("disp", seed=args.seed), args.n_samples, args.n_obs)
    tree = build_tree(args.depth)
    g = dispersion_grid(fit(tree, bin_data(tree, d.samples)), args.grid)
    args.output.parent.mkdir(parents=True, exist_ok=True)
    io.write_table(args.output, ["x", "mean", "variance", "cv"], [g.points, g.mean, g.variance, g.cv])
    for lo, hi in ((0.05, 0.2), (0.4, 0.6), (0.8, 0.95)):
        band = (g.points > lo) & (g.points < hi)
        print(f"mean CV on ({lo}, {hi}): {g.cv[band].mean():.3f}")


if __name__ == "__main__":
    main()
