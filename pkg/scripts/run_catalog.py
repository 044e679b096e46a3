"""Run the built-in catalog and write reports plus a one-line-per-verdict summary CSV.

Usage: python scripts/run_catalog.py [OUT_DIR] [--threads N] [--seed S]
"""

import argparse
import csv
import sys
from pathlib import Path

from phlab.lab import builtin_catalog, run_catalog


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("out", nargs="?", default="reports")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    args = p.parse_args()
    out = Path(args.out)
    reports = run_catalog(builtin_catalog(), args.seed, args.threads)
    rows = []
    for r in reports:
        r.write(out)
        print(f"{r.name:24} {r.status:5} {r.wall_time['total']:7.1f} s")
        rows += [(r.name, v.name, v.status, v.lhs, v.rhs, v.tolerance) for v in r.verdicts]
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("scenario", "verdict", "status", "lhs", "rhs", "tolerance"))
        w.writerows(rows)
    return max(r.exit_code for r in reports)


if __name__ == "__main__":
    sys.exit(main())
