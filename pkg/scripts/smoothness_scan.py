"""Small-separation scaling of the S functionals and the D ladder for a smooth field.

For band-limited fields every third-order increment product is O(lambda^3),
so S (which carries 1/lambda) scales like lambda^2 and every D^eps shrinks
like eps^2.
"""

import argparse

import numpy as np

from khmlab.grid import Grid, curl
from khmlab.increments import DirectionQuadrature
from khmlab.laws import d_functionals, fit_slope, s_energy_hallmhd, s_hl_generalized, s_magnetic
from khmlab.mollify import RadialKernel
from khmlab.solver import initial_state


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=128)
    ap.add_argument("--directions", type=int, default=256)
    ap.add_argument("--lambda-min", type=float, default=0.05)
    ap.add_argument("--lambda-max", type=float, default=0.4)
    ap.add_argument("--count", type=int, default=8)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    s = initial_state(Grid(args.n), "hallmhd", "random_lowk", seed=args.seed, d_i=1.0)
    quad = DirectionQuadrature.fibonacci(args.directions)
    omega = curl(s.u)
    lams = np.geomspace(args.lambda_min, args.lambda_max, args.count)
    rows = []
    for lam in lams:
        e = s_energy_hallmhd(s.u, s.b, lam, quad, s.d_i)
        m = s_magnetic(s.b, lam, quad, s.d_i)
        rows.append((e["S_EL"], e["S_ET"], m["S_ML"], m["S_MT"], s_hl_generalized(s.u, omega, s.b, lam, quad)))
    names = ("S_EL", "S_ET", "S_ML", "S_MT", "S_HL")
    print("lambda  " + "  ".join(f"{k:>10}" for k in names))
    for lam, row in zip(lams, rows):
        print(f"{lam:6.3f}  " + "  ".join(f"{v:10.3e}" for v in row))
    cols = np.array(rows).T
    print("slopes  " + "  ".join(f"{fit_slope(lams, c):10.3f}" for c in cols))

    quad_d = DirectionQuadrature.gauss_product(8)
    print("\nepsilon  D_EL        D_ET        D_ML        D_MT")
    for eps in (0.4, 0.2, 0.1):
        if eps < 2 * s.grid.spacing:
            print(f"{eps:6.3f}  not resolvable on {s.grid.n}^3")
            continue
        d = d_functionals(s.b, RadialKernel("bump", eps), quad_d, s.d_i)
        print(f"{eps:6.3f}  " + "  ".join(f"{d[k]:10.3e}" for k in ("D_EL", "D_ET", "D_ML", "D_MT")))


if __name__ == "__main__":
    main()
