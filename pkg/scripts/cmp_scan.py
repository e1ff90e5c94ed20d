"""Convex monotone property: minimum full-step stencil weight against nu.

    python3 scripts/cmp_scan.py --order 2 --m 11 --advection 0.2 --out results/cmp_scan.csv

For each nu the minimum weight is taken over step fractions of (0, 1]; the
critical nu is where the minimum first becomes non-negative.
"""

import argparse

import numpy as np

from rkg.cli import write_csv
from rkg.problems import cmp_minimum

CMP_FLOOR = -1e-30


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--order", type=int, default=2)
    parser.add_argument("--m", type=int, default=11)
    parser.add_argument("--advection", type=float, default=0.2, help="a (d=1, h=0.1)")
    parser.add_argument("--nu-min", type=float, default=0.1)
    parser.add_argument("--nu-max", type=float, default=2.0)
    parser.add_argument("--points", type=int, default=20)
    parser.add_argument("--samples", type=int, default=100, help="step fractions per nu")
    parser.add_argument("--out", default="results/cmp_scan.csv")
    args = parser.parse_args()

    rows = []
    critical = None
    for nu in np.linspace(args.nu_min, args.nu_max, args.points):
        low = cmp_minimum(args.order, args.m, float(nu), samples=args.samples, a=args.advection)
        rows.append([float(nu), low, low >= CMP_FLOOR])
        if critical is None and low >= CMP_FLOOR:
            critical = float(nu)
        print(f"nu={nu:.4f} min weight={low:.3e}")
    summary = {"critical_nu": critical}
    config = {"order": args.order, "m": args.m, "advection": args.advection, "samples": args.samples}
    write_csv(args.out, config, ["nu", "min_weight", "non_negative"], rows, summary)
    print(f"first non-negative nu on the scan: {critical}")


if __name__ == "__main__":
    main()
