"""Run GEL and the oracle on every registry problem and print comparison tables.

Usage: python3 scripts/reproduce_tables.py [--out DIR] [--workers N]

Writes gel_report.json, oracle_report.json and error_series.csv per problem
when --out is given.
"""

import argparse
import time
from pathlib import Path

from hybridjump.cli import RunOptions, cmd_compare, format_compare
from hybridjump.registry import registry_names


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    start, worst = time.perf_counter(), 0
    for name in registry_names():
        out = args.out / name if args.out else None
        result, code = cmd_compare(name, RunOptions(workers=args.workers), out)
        print(format_compare(result), end="\n\n")
        worst = max(worst, code)
    print(f"total wall time {time.perf_counter() - start:.1f} s")
    return worst


if __name__ == "__main__":
    raise SystemExit(main())
