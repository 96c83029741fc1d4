"""Median per-sample L1 error on scenario 1 as the per-sample size grows.

    python scripts/consistency.py --sizes 50 200 800 3200 --replicates 10
"""

import argparse

import numpy as np

from hapt.partition import bin_data, build_tree
from hapt.simgen import Scenario, generate, l1_error
from hapt.tree_hmm import fit


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[50, 200, 800, 3200])
    ap.add_argument("--replicates", type=int, default=10)
    ap.add_argument("--n-samples", type=int, default=3)
    ap.add_argument("--depth", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    tree = build_tree(args.depth)
    for n in args.sizes:
        errs = []
        for rep in range(args.replicates):
            d = generate(Scenario("s1", seed=args.seed + rep), args.n_samples, n)
            f = fit(tree, bin_data(tree, d.samples))
            errs += [l1_error(t, lambda x, i=i: f.sample_density(i, x))
                     for i, t in enumerate(d.densities)]
        q = np.percentile(errs, [25, 50, 75])
        print(f"n={n:5d}  median L1 {q[1]:.4f}  (IQR {q[0]:.4f} to {q[2]:.4f})", flush=True)


if __name__ == "__main__":
    main()
