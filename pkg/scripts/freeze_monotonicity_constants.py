"""Print the monotonicity constants frozen in the tests, next to 4^-alpha."""

import argparse

from bfmhd.diagnostics import monotonicity_constant_1d


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alpha", type=float, nargs="+", default=[1.5, 2.0])
    ap.add_argument("--samples", type=int, default=2_000_001)
    args = ap.parse_args()
    print("# alpha c_alpha 4^-alpha")
    for alpha in args.alpha:
        print(f"{alpha:g} {monotonicity_constant_1d(alpha, args.samples):.17g} {4.0 ** -alpha:.17g}")


if __name__ == "__main__":
    main()
