"""Check the jump law at the oracle minimizer, with and without a corrupted moving-interface term.

Usage: python3 scripts/jump_law_check.py [problem ...]

Flipping the sign of the interface time partial must break agreement on a
moving interface and change nothing on a fixed one.
"""

import sys

from hybridjump.cli import check_jump_law
from hybridjump.oracle import SweepConfig, sweep
from hybridjump.registry import registry_get


def main(names) -> int:
    names = names or ["circle-tiv", "linear-tv"]
    print(f"{'problem':<22}{'law':>8}{'|dlam err|':>13}{'|gap|':>11}{'negated mu':>12}{'|dlam err|':>13}")
    for name in names:
        p = registry_get(name)
        res = sweep(p, SweepConfig())
        good, bad = check_jump_law(p, res), check_jump_law(p, res, negate_mu=True)
        print(f"{name:<22}{good['verdict']:>8}{good['law_error_inf']:>13.2e}{good['hamiltonian_gap']:>11.2e}"
              f"{bad['verdict']:>12}{bad['law_error_inf']:>13.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main(sys.argv[1:]))
