#!/usr/bin/env python3
"""Compare the closed-form two-level absorption expressions against the exact
three-level steady state over a grid of Rabi frequencies, and report how far
the analytic shortcut drifts from the full calculation.
"""

import argparse

import numpy as np

from ringob.atom import (
    AtomParams,
    DegenerateDenominator,
    DriveParams,
    steady_state,
    two_level_im_rho12,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps1", type=float, default=2.0)
    ap.add_argument("--eps2", type=float, default=-0.7)
    ap.add_argument("--omega-min", type=float, default=0.1)
    ap.add_argument("--omega-max", type=float, default=10.0)
    ap.add_argument("--steps", type=int, default=10)
    args = ap.parse_args()

    atom = AtomParams(eps1=args.eps1, eps2=args.eps2)
    g21 = float(atom.gamma[1, 0])
    G21 = float(atom.Gamma[0, 1])
    omegas = np.geomspace(args.omega_min, args.omega_max, args.steps)

    devs = []
    print(f"{'omega1':>10} {'omega2':>10} {'exact':>13} {'approx':>13} {'rel dev':>10}")
    for om1 in omegas:
        for om2 in omegas:
            dm = steady_state(atom, DriveParams(float(om1), float(om2)))
            exact = float(dm.rho[0, 1].imag)
            try:
                approx = two_level_im_rho12(float(om1), float(om2), args.eps1, g21, G21)
            except DegenerateDenominator:
                continue
            dev = abs(approx - exact) / max(abs(exact), 1e-300)
            devs.append(dev)
            print(f"{om1:10.4f} {om2:10.4f} {exact:13.5e} {approx:13.5e} {dev:10.3e}")

    devs = np.array(devs)
    print(f"\nrelative deviation: min {devs.min():.3e}, "
          f"median {np.median(devs):.3e}, max {devs.max():.3e}")


if __name__ == "__main__":
    main()
