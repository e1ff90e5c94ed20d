"""Brusselator work-precision sweep (f_count against error) for orders 2, 4 and 6.

    python3 scripts/work_precision.py --grid 200 --mu 0.1 --orders 2 4 --out results/wp.csv

Each row is one controlled run; the fitted slope of log f_count against
log err is printed per order (about -1/(2N) for an optimal method).
"""

import argparse
import logging

from rkg.bench import BenchConfig, brusselator_reference, fit_slope, make_problem, run_bench
from rkg.cli import write_csv
from rkg.table import default_table

log = logging.getLogger("work_precision")


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--grid", type=int, default=200)
    parser.add_argument("--mu", type=float, default=0.1)
    parser.add_argument("--t-end", type=float, default=1.0)
    parser.add_argument("--orders", type=int, nargs="+", default=[2])
    parser.add_argument("--atols", type=float, nargs="+", default=[1e-2, 1e-3, 1e-4, 1e-5])
    parser.add_argument("--out", default="results/work_precision.csv")
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    table = default_table([1, 2, 4, 6])
    base = BenchConfig("brusselator", 2, "controlled", grid=args.grid, mu=args.mu, t_end=args.t_end)
    reference = brusselator_reference(make_problem(base.resolved()), args.t_end)
    rows, slopes = [], {}
    for order in args.orders:
        errs, counts = [], []
        for atol in args.atols:
            cfg = BenchConfig("brusselator", order, "controlled", atol=atol, grid=args.grid, mu=args.mu, t_end=args.t_end)
            row, _ = run_bench(cfg, table, reference)
            log.info("N=%d atol=%g err=%.3e f_count=%d steps=%d", order, atol, row.err_l2, row.f_count, row.steps)
            rows.append([order, atol, row.err_l2, row.err_linf, row.f_accepted, row.f_rejected, row.steps, row.m_max, row.flag])
            errs.append(row.err_l2)
            counts.append(row.f_count)
        slopes[f"order{order}"] = fit_slope(errs, counts)
        print(f"N={order}: slope of log f_count vs log err = {slopes[f'order{order}']:.3f} (ideal {-1 / (2 * order):.3f})")
    config = {"grid": args.grid, "mu": args.mu, "t_end": args.t_end, "orders": args.orders, "atols": args.atols}
    header = ["order", "atol", "err_l2", "err_linf", "f_accepted", "f_rejected", "steps", "m_max", "flag"]
    write_csv(args.out, config, header, rows, slopes)


if __name__ == "__main__":
    main()
