"""Decaying dissipative Hall-MHD at 64^3 and the compensated exact-law ratios.

Runs the solver through the command line pipeline, scans the analysis window
and prints -(5/4) S_EL / eps_E and -(15/8) S_ET / eps_E per separation.  With
--split it also prints the velocity-block pieces and the weight of the mixed
term that would make the L and T routes agree exactly under isotropy.
"""

import argparse
import json
from pathlib import Path

import numpy as np

from khmlab.cli import main as khmlab
from khmlab.increments import DirectionQuadrature
from khmlab.laws import IncrementEngine, _shell, _velocity_terms
from khmlab.pipeline import load_states

RUN = [
    "grid.n=64",
    "solver.model=hallmhd",
    "solver.d_i=0.1",
    "solver.nu=2e-3",
    "solver.eta=2e-3",
    "solver.dt=5e-3",
    "solver.t_end=2.5",
    "solver.snapshot_interval=0.25",
    "solver.ledger_interval=0.05",
    "quad.directions=128",
    "scan.lambda_min=0.1",
    "scan.lambda_max=1.5",
    "scan.count=12",
    "scan.window_start=1.5",
    "scan.window_end=2.5",
    "scan.include_hl=false",
]


def mixed_weight(out: Path, lams, t_lo, t_hi):
    """Weight c with S_L + c mix : S_T - c mix = 3 : 2, per snapshot and separation."""
    quad = DirectionQuadrature.fibonacci(64)
    for s in load_states(out):
        if not t_lo <= s.t <= t_hi:
            continue
        eng = IncrementEngine({"u": s.u, "b": s.b})
        for lam in lams:
            v = _shell(eng, lam, quad, [_velocity_terms])
            c = (0.6 * (v["L"] + v["T"]) - v["L"]) / v["mix"]
            print(f"t {s.t:4.2f} lambda {lam:5.3f}  L {v['L']:+.4f}  T {v['T']:+.4f}  mix {v['mix']:+.4f}  weight {c:+.3f}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="plateau_out")
    ap.add_argument("--skip-run", action="store_true", help="reuse snapshots already in --out")
    ap.add_argument("--split", action="store_true")
    args = ap.parse_args()

    out = Path(args.out)
    common = ["--output", str(out)] + [x for kv in RUN for x in ("--set", kv)]
    if not args.skip_run:
        khmlab(["simulate"] + common)
    status = khmlab(["scan-laws"] + common)
    rep = json.loads((out / "scan_laws_report.json").read_text())
    p = rep["plateau"]
    print(f"eps_E = {rep['eps_E']:.4f}")
    print("lambda   -(5/4)S_EL/eps  -(15/8)S_ET/eps")
    for lam, a, b in zip(p["lambdas"], p["ratio_L"], p["ratio_T"]):
        print(f"{lam:6.3f}   {a:14.3f}  {b:15.3f}")
    print(f"band {p['band']}  decades {p['band_decades']:.2f}  route agreement {p['route_agreement']}  exit {status}")
    if args.split:
        mixed_weight(out, [0.2, 0.35, 0.6], 1.5, 2.5)


if __name__ == "__main__":
    main()
