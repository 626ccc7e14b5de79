#!/usr/bin/env python3
"""Drag the input point along a parametric path through the bistable band and
compare the forward and backward traces; both outputs switch branches at
different path positions, tracing a two-dimensional hysteresis cycle.
"""

import argparse

from ringob.atom import AtomParams, CellResponse, OpticalConstants
from ringob.feedback import CavityParams
from ringob.sweep import ParametricPath, run_sweep

# enters the band from the high-I2 side and leaves on the high-I1 side
DEFAULT_WAYPOINTS = [(1.0, 2.0), (4.5, 0.05)]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=160)
    ap.add_argument("--R", type=float, default=0.6)
    ap.add_argument("--waypoint", action="append", nargs=2, type=float,
                    metavar=("I1_0", "I2_0"), default=None)
    args = ap.parse_args()

    waypoints = [tuple(w) for w in args.waypoint] if args.waypoint else DEFAULT_WAYPOINTS
    atom = AtomParams()
    response = CellResponse(atom, OpticalConstants())
    cav = CavityParams(R1=args.R, R2=args.R)
    path = ParametricPath(waypoints=waypoints, steps=args.steps, log=True)

    result = run_sweep(path, cav, response)
    for name, jumps in (("forward", result.jumps_forward),
                        ("backward", result.jumps_backward)):
        print(f"{name}: {len(jumps)} jumps")
        for j in jumps:
            print(f"  t = {j.t:.4f}, output {j.output_index}: "
                  f"{j.before:.4e} -> {j.after:.4e}")
    print(f"loop areas: {result.loop_area_1:.6e} (out 1), "
          f"{result.loop_area_2:.6e} (out 2)")


if __name__ == "__main__":
    main()
