#!/usr/bin/env python3
"""Scan the summability threshold functions and bisect k(alpha) = 1.

Usage: python scripts/threshold_scan.py [bits]
"""
import sys
from fractions import Fraction

from mpmath import mp, mpf

from momenta import PrecisionContext, alpha_value, alpha_threshold

bits = int(sys.argv[1]) if len(sys.argv) > 1 else 128
ctx = PrecisionContext(bits=bits, eps_tail=mpf(10) ** -14)

print(f"{'alpha':>8} {'u':>14} {'v':>14} {'k':>14}")
a = Fraction(12, 10)
while a <= 3:
    av = alpha_value(a, ctx)
    print(f"{float(a):8.2f} {mp.nstr(av.u, 8):>14} {mp.nstr(av.v, 8):>14} "
          f"{mp.nstr(av.k, 8):>14}")
    a += Fraction(3, 10)

root = alpha_threshold(Fraction(15, 10), 2, mpf(10) ** -6, ctx)
print(f"\nk(alpha) = 1 at alpha = {mp.nstr(root, 10)}")
print("absolute summability of the kernel-Hankel products is certified "
      "for decay exponents above this value")
