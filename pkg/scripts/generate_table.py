"""Regenerate the shipped coefficient tables (one gzip file per order).

    python3 scripts/generate_table.py --orders 1 2 4 6 --m-max 64 --out-dir src/rkg/data
"""

import argparse
import logging
import time
from pathlib import Path

from rkg.polynomial import NU_GRID_SIZE
from rkg.table import CoefficientTable, generate_entries, save_table, table_filename

log = logging.getLogger("generate_table")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--orders", type=int, nargs="+", default=[1, 2, 4, 6])
    parser.add_argument("--m-max", type=int, default=64)
    parser.add_argument("--out-dir", type=Path, default=Path("src/rkg/data"))
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    for order in args.orders:
        start = time.perf_counter()
        table = CoefficientTable()
        for index in range(NU_GRID_SIZE):
            for entry in generate_entries(order, range(1, args.m_max + 1), index):
                table.add(entry)
            log.info("N=%d nu index %d done (%.0f s)", order, index, time.perf_counter() - start)
        path = save_table(table, args.out_dir / table_filename(order))
        log.info("wrote %s: %d entries in %.0f s", path, len(table), time.perf_counter() - start)


if __name__ == "__main__":
    main()
