"""Continuous-dependence scaling with damping on (a=1) and off (a=0).

The a=0 control is informational: the quadratic scaling of S(delta) is a
property of any smooth flow map, so it need not break without damping.
"""

import argparse
import math
import warnings

from bfmhd.rhs import PhysParams
from bfmhd.spectral import make_grid
from bfmhd.verification import ICSpec, dependence_experiment, make_ic


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alpha", type=float, default=2.0)
    ap.add_argument("--N", type=int, default=16)
    ap.add_argument("--t-end", type=float, default=None)
    args = ap.parse_args()

    grid = make_grid(args.N, 2 * math.pi)
    ic = make_ic(ICSpec(kind="random_band", energy=20.0, seed=7), grid)
    for a in (1.0, 0.0):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            rep = dependence_experiment(ic, [1e-3, 1e-4, 1e-5], PhysParams(0.1, 0.1, a, args.alpha), args.t_end)
        print(f"# a = {a:g}, T = {rep.t_end:.6g}, dt = {rep.dt:.6g}, passed = {rep.passed}")
        print(rep.table())


if __name__ == "__main__":
    main()
