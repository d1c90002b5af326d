"""Residuals of the four shell-integral identities against direction count.

Usage: python scripts/lemma22_convergence.py [--n 32] [--kmax 4] [--seeds 0 1 2]
"""

import argparse
import time

import numpy as np

from khmlab.grid import Grid, random_field
from khmlab.identities import check_lemma22
from khmlab.increments import DirectionQuadrature
from khmlab.mollify import RadialKernel


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=32)
    ap.add_argument("--kmax", type=float, default=4.0)
    ap.add_argument("--epsilon", type=float, default=0.5)
    ap.add_argument("--radial-nodes", type=int, default=32)
    ap.add_argument("--counts", type=int, nargs="+", default=[128, 256, 512, 1024])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    ap.add_argument("--gauss", type=int, nargs="*", default=[8, 16], help="Gauss product orders for comparison")
    args = ap.parse_args()

    g = Grid(args.n)
    kernel = RadialKernel("bump", args.epsilon)
    rules = [DirectionQuadrature.fibonacci(c) for c in args.counts]
    rules += [DirectionQuadrature.gauss_product(m) for m in args.gauss]
    for seed in args.seeds:
        rng = np.random.default_rng(seed)
        E, F = random_field(g, args.kmax, rng), random_field(g, args.kmax, rng)
        print(f"seed {seed}: relative residual (max |lhs - rhs| / max scale)")
        for i, q in enumerate(rules):
            t0 = time.perf_counter()
            reps = check_lemma22(None, E, F, kernel, q, args.radial_nodes)
            if i == 0:
                print(f"{'rule':>16} {'dirs':>5} " + " ".join(f"{r.identity_name:>9}" for r in reps) + "   time")
            vals = " ".join(f"{r.relative_residual:9.2e}" for r in reps)
            print(f"{q.name:>16} {len(q):5d} {vals}  {time.perf_counter() - t0:5.1f}s")


if __name__ == "__main__":
    main()
