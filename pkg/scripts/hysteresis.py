#!/usr/bin/env python3
"""Quasi-static hysteresis: sweep I1_0 across the bistable band and print the
switching points and loop areas of both outputs (the second output shows the
cross-hysteresis effect).
"""

import argparse

from ringob.atom import AtomParams, CellResponse, OpticalConstants
from ringob.feedback import CavityParams
from ringob.sweep import AxisSweep, run_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--start", type=float, default=1.5)
    ap.add_argument("--stop", type=float, default=3.5)
    ap.add_argument("--steps", type=int, default=160)
    ap.add_argument("--fixed-i2", type=float, default=0.05)
    ap.add_argument("--R", type=float, default=0.6)
    ap.add_argument("--eps1", type=float, default=0.7)
    ap.add_argument("--eps2", type=float, default=-0.7)
    args = ap.parse_args()

    atom = AtomParams(eps1=args.eps1, eps2=args.eps2)
    response = CellResponse(atom, OpticalConstants())
    cav = CavityParams(R1=args.R, R2=args.R)
    spec = AxisSweep(axis=1, start=args.start, stop=args.stop,
                     steps=args.steps, fixed=args.fixed_i2)

    result = run_sweep(spec, cav, response)

    def abscissa(t):
        return args.start + t * (args.stop - args.start)

    for name, jumps in (("forward", result.jumps_forward),
                        ("backward", result.jumps_backward)):
        print(f"{name} jumps:")
        for j in jumps:
            print(f"  output {j.output_index}: I1_0 = {abscissa(j.t):.4f}, "
                  f"{j.before:.4e} -> {j.after:.4e}")
    print(f"loop area I1_out: {result.loop_area_1:.6e}")
    print(f"loop area I2_out: {result.loop_area_2:.6e}")
    n_fail = int((~result.forward.converged).sum() + (~result.backward.converged).sum())
    print(f"non-converged samples: {n_fail}")


if __name__ == "__main__":
    main()
