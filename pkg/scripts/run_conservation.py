"""Invariant drift of inviscid EMHD and Hall-MHD runs.

Writes one ledger CSV per model and prints the relative drifts.  In Hall-MHD
the cross-helicity is not an invariant; its drift is printed next to the
generalized helicity for comparison.
"""

import argparse
import time
from pathlib import Path

from khmlab.grid import Grid
from khmlab.solver import initial_state, run


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=32)
    ap.add_argument("--dt", type=float, default=1e-3)
    ap.add_argument("--t-end", type=float, default=1.0)
    ap.add_argument("--d-i", type=float, default=1.0)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--out", default="conservation_out")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for model in ("emhd", "hallmhd"):
        t0 = time.perf_counter()
        s = initial_state(Grid(args.n), model, "random_lowk", seed=args.seed, d_i=args.d_i)
        ledger = run(s, args.t_end, args.dt, ledger_interval=0.01).ledger
        ledger.write_csv(out / f"ledger_{model}.csv")
        names = ("E", "H_M") if model == "emhd" else ("E", "H_M", "H_G", "H_C")
        drifts = "  ".join(f"{k} {ledger.drift(k):.2e}" for k in names)
        print(f"{model:8s} {drifts}   ({time.perf_counter() - t0:.0f} s)")


if __name__ == "__main__":
    main()
