#!/usr/bin/env python3
"""Demonstrate the failure of kernel-series summability for the symmetrized
cubic birth-and-death family: the terms c_{2n} s_{2n} stay of order one.

Usage: python scripts/cubic_divergence.py [n_max]
"""
import sys

from mpmath import mp, mpf

from momenta import PrecisionContext, cubic_report

n_max = int(sys.argv[1]) if len(sys.argv) > 1 else 60
ctx = PrecisionContext(bits=160, eps_tail=mpf(10) ** -16)

rep = cubic_report(n_max, ctx, quad_upto=4)
print("envelope facts verified on grid:", rep.envelope_ok)
print("moment sandwich holds for 1..%d:" % n_max, rep.bounds_hold)
print("quadrature vs exact moments, worst rel gap:",
      mp.nstr(rep.quad_rel_gap, 4))
print()
print(f"{'n':>4} {'t_n = c_2n s_2n':>20} {'n t_n':>14}")
for n in range(0, n_max + 1, max(1, n_max // 15)):
    t = rep.t_terms[n]
    print(f"{n:>4} {mp.nstr(t, 10):>20} {mp.nstr(n * t, 10):>14}")
print()
print("series verdict:", rep.series.verdict, "--", rep.series.note)
print("window floor  min n t_n =", mp.nstr(rep.window_min_n_t, 6))
print("growth U_n^(1/n) =", mp.nstr(rep.u_root[0], 8),
      " limit", mp.nstr(rep.u_root[1], 8))
print("growth V_n^(1/n) =", mp.nstr(rep.v_root[0], 8),
      " limit", mp.nstr(rep.v_root[1], 8))
