#!/usr/bin/env python3
"""Root-test study of sum c_{2n} s_{2n} for the families b_n = c^c (n+1)^c:
convergent above the exponent 3/2, divergent below, open at the boundary.

Usage: python scripts/dichotomy.py [N]
"""
import sys
from fractions import Fraction

from mpmath import mp

from momenta import PrecisionContext, powerlaw_dichotomy

N = int(sys.argv[1]) if len(sys.argv) > 1 else 60
ctx = PrecisionContext(bits=256)

rows = powerlaw_dichotomy([Fraction(5, 4), Fraction(3, 2), Fraction(7, 4),
                           Fraction(2)], N, ctx)
print(f"{'c':>6} {'verdict':>12} {'slope root':>12} {'max root':>12} "
      f"{'bound 4^(3/2-c)':>16}")
for row in rows:
    print(f"{str(row.c):>6} {row.verdict:>12} "
          f"{mp.nstr(row.report.root_exponent, 5):>12} "
          f"{mp.nstr(row.report.root_stat, 5):>12} "
          f"{mp.nstr(row.target, 5):>16}")
print("\nthe theorem bounds are one-sided: measured statistics sit inside "
      "them, not on them")
