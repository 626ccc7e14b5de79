#!/usr/bin/env python3
"""Scan the input-intensity plane and report the bistability domain.

Presets reproduce the regimes of interest: the symmetric-detuning default
(R1 = R2 = 0.6, eps1 = -eps2 = 0.7), the high-Q cavity (R = 0.99), and the
intermediate R = 0.75 case.
"""

import argparse
import time

from ringob.atom import AtomParams, CellResponse, OpticalConstants
from ringob.domain import GridSpec, boundary_rows, map_domain, map_rows
from ringob.feedback import CavityParams, SolverConfig

PRESETS = {
    "default": dict(R=0.6, eps1=0.7, eps2=-0.7),
    "high_q": dict(R=0.99, eps1=0.7, eps2=-0.7),
    "mid_q": dict(R=0.75, eps1=0.7, eps2=-0.7),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--preset", choices=sorted(PRESETS), default="default")
    ap.add_argument("--i-min", type=float, default=1e-2)
    ap.add_argument("--i-max", type=float, default=1e2)
    ap.add_argument("--steps", type=int, default=40)
    ap.add_argument("--seed-grid", type=int, default=12)
    ap.add_argument("--threads", type=int, default=0)
    ap.add_argument("--out", default=None, help="write map CSV here")
    args = ap.parse_args()

    preset = PRESETS[args.preset]
    atom = AtomParams(eps1=preset["eps1"], eps2=preset["eps2"])
    response = CellResponse(atom, OpticalConstants())
    cav = CavityParams(R1=preset["R"], R2=preset["R"])
    cfg = SolverConfig(seed_grid=args.seed_grid)
    grid = GridSpec(i1_min=args.i_min, i1_max=args.i_max, i1_steps=args.steps,
                    i2_min=args.i_min, i2_max=args.i_max, i2_steps=args.steps)

    t0 = time.time()
    bmap = map_domain(grid, cav, response, cfg, threads=args.threads)
    print(f"{args.steps}x{args.steps} map in {time.time() - t0:.1f}s")
    print(f"bistable cells: {bmap.bistable_cells()}")
    print(f"boundary chains: {len(bmap.boundary)}")

    glyph = {"absorbing": ".", "bistable": "#", "transparent": "o", "failed": "?"}
    for i in range(args.steps):
        print("".join(glyph[bmap.region[i, j]] for j in range(args.steps)))

    if args.out:
        with open(args.out, "w") as fh:
            fh.write("i,j,I1_0,I2_0,solution_count,stable_count,region,min_eta,max_eta\n")
            for row in map_rows(bmap):
                fh.write(",".join(str(v) for v in row) + "\n")
        print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
