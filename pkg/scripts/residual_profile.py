"""Tabulate the held-out residual F(tau) for both formulations on one problem.

Usage: python3 scripts/residual_profile.py PROBLEM [--points N] [--out FILE]

Cells where the inner problem has no solution are written as nan; for the
interface formulation this marks the region where GEL needs start-up probes.
"""

import argparse
import math

import numpy as np

from hybridjump.bvp import Formulation
from hybridjump.errors import InnerFailure
from hybridjump.gel import residual_F
from hybridjump.registry import registry_get
from hybridjump.report import write_table


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("problem")
    ap.add_argument("--points", type=int, default=40)
    ap.add_argument("--out")
    args = ap.parse_args()
    p = registry_get(args.problem)
    span = p.tf - p.t0
    rows = []
    for tau in np.linspace(p.t0 + 0.02 * span, p.tf - 0.02 * span, args.points):
        row = [tau]
        for form in Formulation:
            try:
                row.append(residual_F(p, tau, form)[0])
            except InnerFailure:
                row.append(math.nan)
        rows.append(row)
        print("  ".join(f"{v:12.5g}" for v in row))
    if args.out:
        write_table(args.out, ["tau", "F_jump_magnitude", "F_interface"], rows)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
