"""Direction rules compared: second-moment isotropy and the D functionals against their spectral oracle.

The increment form of D comes from integrating by parts on the sphere, so it
matches the spectral form only when the angular rule integrates the relevant
harmonics exactly.  Gauss product rules do; Fibonacci lattices only converge.
"""

import argparse

import numpy as np

from khmlab.grid import Grid, random_field
from khmlab.increments import DirectionQuadrature
from khmlab.laws import d_functionals, d_spectral
from khmlab.mollify import RadialKernel


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=32)
    ap.add_argument("--kmax", type=float, default=3.0)
    ap.add_argument("--epsilon", type=float, default=0.5)
    ap.add_argument("--seed", type=int, default=3)
    args = ap.parse_args()

    print("isotropy error max |M2 - I/3| of the raw (not isotropized) Fibonacci lattice")
    for count in (64, 128, 256, 512, 1024):
        q = DirectionQuadrature.fibonacci(count, isotropize=False)
        print(f"  {count:5d}  {np.max(np.abs(q.second_moment() - np.eye(3) / 3)):.2e}")

    b = random_field(Grid(args.n), args.kmax, np.random.default_rng(args.seed))
    kernel = RadialKernel("bump", args.epsilon)
    rules = [DirectionQuadrature.fibonacci(c) for c in (128, 512)] + [DirectionQuadrature.gauss_product(m) for m in (4, 8)]
    print("\nrelative deviation of increment-form D from the spectral form")
    print(f"{'rule':>14}  " + "  ".join(f"{k:>9}" for k in ("D_EL", "D_ET", "D_ML", "D_MT")))
    for q in rules:
        inc = d_functionals(b, kernel, q)
        ref = d_spectral(b, kernel, q)
        print(f"{q.name:>14}  " + "  ".join(f"{abs(inc[k] - ref[k]) / abs(ref[k]):9.2e}" for k in ("D_EL", "D_ET", "D_ML", "D_MT")))


if __name__ == "__main__":
    main()
