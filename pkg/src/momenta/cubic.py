"""Closed forms and quadrature for the symmetrized cubic birth-and-death
family (recurrence b_{2n} = sqrt(3n+1)(3n+2), b_{2n-1} = 3n sqrt(3n+1)).

The even moments have the integral representation

    s_{2n} = (27 a^(-n-1/2) / pi) * int_0^inf u^(3n+1/2) e^(-u) / N(u) du,

where N(u) = (e^(-3u/2) + 2 cos(sqrt3 u/2))^2
             + (c^2/(a u)) (e^(-3u/2) - 2 cos(sqrt3 u/2 + pi/3))^2,

a and c being the constants of the order-three trigonometric family.  N is
bounded between explicit constants (k1 on [0,1], u N(u) >= k2 beyond), which
yields factorial-scale sandwich bounds for s_{2n}; the envelope facts are
re-verified numerically on a grid before the quadrature trusts them.

The kernel coefficient matrix has exact entries: finite binomial sums times
powers of a, derived from the two entire functions with coefficient
sequences alpha_{2n} = -(-a)^n/(3n)! and beta_{2n+1} = c(-a)^n/(3n+2)!.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Tuple

from mpmath import mp, mpf

from .engine import b_rows, build_A, moments_jacobi
from .errors import DomainError
from .families import make_family
from .numerics import (CubicConstants, PrecisionContext, cubic_constants,
                       gamma_hp, quad_ts)
from .verify import SeriesReport, classify_series

_ZERO = mpf(0)

# exponent lattice of the B-row tails: even rows decay like l^(-5/6), odd
# rows like l^(-2/3), with corrections on a 1/3-grid (see build_A tail_fit)
KERNEL_TAIL_FIT = {
    "p0": (lambda k, l: mpf(5) / 3 if k % 2 == 0 else mpf(4) / 3),
    "step": Fraction(1, 3),
    "coeffs": 20,
}
KERNEL_ROW_ORDER = 9000


def _envelope(cc: CubicConstants, u: mpf) -> mpf:
    e = mp.exp(-3 * u / 2)
    c1 = 2 * mp.cos(mp.sqrt(3) / 2 * u)
    c2 = 2 * mp.cos(mp.sqrt(3) / 2 * u + mp.pi / 3)
    first = (e + c1) ** 2
    second = (e - c2) ** 2
    return first + cc.c2_over_a / u * second


def envelope_constants(ctx: PrecisionContext) -> Tuple[mpf, mpf]:
    """k1 = (e^(-3/2) + 2 cos(sqrt3/2))^2 and k2 = 2e^(-3) - 8e^(-3/2) + 2."""
    with ctx.workprec(32):
        k1 = (mp.exp(mpf(-3) / 2) + 2 * mp.cos(mp.sqrt(3) / 2)) ** 2
        k2 = 2 * mp.exp(-3) - 8 * mp.exp(mpf(-3) / 2) + 2
    with ctx.workprec():
        return +k1, +k2


def verify_envelope(ctx: PrecisionContext, grid: int = 2048,
                    u_hi: float = 64.0) -> bool:
    """Grid check of the envelope facts the moment bounds rest on:
    N(u) <= 9, N >= k1 on (0, 1], and u N(u) >= k2 on [1, u_hi]."""
    cc = cubic_constants(ctx)
    k1, k2 = envelope_constants(ctx)
    with ctx.workprec(16):
        hi = mpf(u_hi)
        for i in range(1, grid + 1):
            u = hi * i / grid
            n_u = _envelope(cc, u)
            if n_u > 9 * (1 + mpf(10) ** -20):
                return False
            if u <= 1 and n_u < k1:
                return False
            if u >= 1 and u * n_u < k2:
                return False
    return True


def cubic_moment(n: int, ctx: PrecisionContext) -> mpf:
    """Even moment s_{2n} by double-exponential quadrature of the damped
    integral, split at u = 1 (the two regimes of the envelope) and truncated
    at a point where the analytic remainder bound is below tolerance."""
    if n < 0:
        raise DomainError("moment index must be nonnegative")
    cc = cubic_constants(ctx)
    k1, k2 = envelope_constants(ctx)
    with ctx.workprec(32):
        eps = mpf(ctx.eps_tail)
        power = 3 * n + mpf(1) / 2
        lower_scale = 3 * mp.power(cc.a, -n - mpf(1) / 2) / mp.pi \
            * gamma_hp(Fraction(6 * n + 3, 2), ctx)
        # truncation point: u^(3n+3/2) e^-u / k2 integrates to below eps*scale
        u_max = mpf(max(2 * (3 * n + 3), 48))
        while True:
            lead = mp.power(u_max, power + 1) * mp.exp(-u_max) / k2
            lead /= (1 - (power + 1) / u_max)
            if lead <= eps * lower_scale:
                break
            u_max *= mpf(5) / 4
        guard_exp = (2 * ctx.bits + 160) * mp.log(2)

        def f(u: mpf) -> mpf:
            if power * mp.log(u) - u < -guard_exp:
                return _ZERO
            return mp.power(u, power) * mp.exp(-u) / _envelope(cc, u)

        # the envelope oscillates with period ~7.25; one-period panels keep
        # the refinement depth of each tanh-sinh call small, and the analytic
        # lower bound for the whole integral serves as the convergence scale
        # so negligible panels return immediately
        whole_scale = lower_scale * mp.pi / 27 * mp.power(cc.a, n + mpf(1) / 2)
        total, _ = quad_ts(f, 0, 1, ctx, scale_floor=whole_scale)
        lo = mpf(1)
        width = mpf(8)
        peak = power + 1
        while lo < u_max:
            hi = min(lo + width, u_max)
            piece, _ = quad_ts(f, lo, hi, ctx, scale_floor=whole_scale)
            total += piece
            lo = hi
            if lo > peak and abs(piece) < eps * abs(total) / 4:
                break
        pref = 27 * mp.power(cc.a, -n - mpf(1) / 2) / mp.pi
        out = pref * total
    with ctx.workprec():
        return +out


def cubic_moment_bounds(n: int, ctx: PrecisionContext) -> Tuple[mpf, mpf]:
    """Sandwich (3 a^(-n-1/2)/pi) G(3n+3/2) < s_{2n}
    < (27 a^(-n-1/2)/pi) (1/k1 + G(3n+5/2)/k2)."""
    if n < 1:
        raise DomainError("bounds hold for n >= 1")
    cc = cubic_constants(ctx)
    k1, k2 = envelope_constants(ctx)
    with ctx.workprec(32):
        pref = mp.power(cc.a, -n - mpf(1) / 2) / mp.pi
        lower = 3 * pref * gamma_hp(Fraction(6 * n + 3, 2), ctx)
        upper = 27 * pref * (1 / k1
                             + gamma_hp(Fraction(6 * n + 5, 2), ctx) / k2)
    with ctx.workprec():
        return +lower, +upper


# ---------------------------------------------------------------------------
# closed-form kernel entries
# ---------------------------------------------------------------------------

def cubic_alpha_coeffs(top: int, ctx: PrecisionContext) -> List[mpf]:
    """Power-series coefficients with alpha_{2n} = -(-a)^n/(3n)!."""
    cc = cubic_constants(ctx)
    with ctx.workprec(32):
        out = []
        for i in range(top + 1):
            if i % 2 == 1:
                out.append(_ZERO)
            else:
                n = i // 2
                val = -mp.power(-cc.a, n) / mpf(math.factorial(3 * n))
                out.append(val)
    with ctx.workprec():
        return [+x for x in out]


def cubic_beta_coeffs(top: int, ctx: PrecisionContext) -> List[mpf]:
    """Power-series coefficients with beta_{2n+1} = c(-a)^n/(3n+2)!."""
    cc = cubic_constants(ctx)
    with ctx.workprec(32):
        out = []
        for i in range(top + 1):
            if i % 2 == 0:
                out.append(_ZERO)
            else:
                n = (i - 1) // 2
                val = cc.c * mp.power(-cc.a, n) / mpf(math.factorial(3 * n + 2))
                out.append(val)
    with ctx.workprec():
        return [+x for x in out]


def cubic_kernel_entry(r: int, s: int, ctx: PrecisionContext) -> mpf:
    """Exact kernel entry a_{r,s}: zero for odd r+s, otherwise a finite
    binomial sum times c a^((r+s)/2) (sign (-1)^((r+s)/2 mod 2) built in)."""
    if r < 0 or s < 0:
        raise DomainError("indices must be nonnegative")
    if (r + s) % 2 == 1:
        return _ZERO
    cc = cubic_constants(ctx)
    with ctx.workprec(32):
        if r % 2 == 0:
            k, l = max(r, s) // 2, min(r, s) // 2
            tot = 0
            for j in range(l + 1):
                tot += math.comb(3 * k + 3 * l + 3, 3 * l - 3 * j) \
                    * (3 * k - 3 * l + 6 * j + 3)
            val = cc.c * mp.power(-cc.a, k + l) * tot \
                / mpf(math.factorial(3 * k + 3 * l + 3))
        else:
            k, l = (max(r, s) + 1) // 2, (min(r, s) + 1) // 2
            tot = 0
            for i in range(l):
                tot += math.comb(3 * k + 3 * l - 1, 3 * l - 3 * i - 1)
                if 3 * l - 3 * i - 3 >= 0:
                    tot -= math.comb(3 * k + 3 * l - 1, 3 * l - 3 * i - 3)
            val = -cc.c * mp.power(-cc.a, k + l - 1) * tot \
                / mpf(math.factorial(3 * k + 3 * l - 1))
    with ctx.workprec():
        return +val


def cubic_b_product(m: int, ctx: PrecisionContext) -> mpf:
    """b_0 b_1 ... b_{m-1} in closed form: (3n+2)! when m - 1 = 2n, and
    sqrt(3n+1) (3n)! when m - 1 = 2n - 1 (checked against direct products)."""
    if m == 0:
        return mpf(1)
    with ctx.workprec(32):
        top = m - 1
        if top % 2 == 0:
            n = top // 2
            val = gamma_hp(3 * n + 3, ctx)
        else:
            n = (top + 1) // 2
            val = mp.sqrt(mpf(3 * n + 1)) * gamma_hp(3 * n + 1, ctx)
    with ctx.workprec():
        return +val


# ---------------------------------------------------------------------------
# assembled report
# ---------------------------------------------------------------------------

@dataclass
class CubicReport:
    n_max: int
    s_exact: List[mpf]                     # s_{2n} by the rational oracle
    s_quad: List[Optional[mpf]]            # quadrature values (subset)
    quad_rel_gap: mpf                      # worst rel gap where both exist
    bounds: List[Tuple[mpf, mpf]]          # (lower, upper) for n = 1..n_max
    bounds_hold: bool
    c_diag: List[mpf]                      # c_k = sqrt(a_{k,k}), closed form
    t_terms: List[mpf]                     # t_n = c_{2n} s_{2n}
    series: SeriesReport
    window_min_n_t: mpf                    # min n t_n over the window
    window_max_t_over_n2: mpf              # max t_n / n^2 over the window
    product_gap: mpf                       # b-product identity, worst rel gap
    u_root: Tuple[mpf, mpf]                # U_n^(1/n) at n_max and target
    u_root_mid: mpf                        # same at n_max // 3
    v_root: Tuple[mpf, mpf]                # V_n^(1/n) at n_max and target
    v_root_mid: mpf
    envelope_ok: bool


def cubic_report(n_max: int, ctx: PrecisionContext,
                 quad_upto: Optional[int] = None,
                 window: Tuple[int, int] = (10, 60)) -> CubicReport:
    """Assemble the moment, kernel, series, and growth data of the family.

    The series of t_n = c_{2n} s_{2n} must come out divergent; the growth
    roots are compared against their limits (2/theta)^3 and theta^(3/2).
    """
    if n_max < 20:
        raise DomainError("report needs n_max >= 20")
    quad_upto = 8 if quad_upto is None else quad_upto
    fam = make_family("cubic_sym")
    cc = cubic_constants(ctx)
    env_ok = verify_envelope(ctx)
    mom = moments_jacobi(fam, n_max, ctx, exact=True)
    s_exact = [mom.moments[2 * n] for n in range(n_max + 1)]

    s_quad: List[Optional[mpf]] = [None] * (n_max + 1)
    worst_gap = _ZERO
    with ctx.workprec(16):
        for n in range(quad_upto + 1):
            v = cubic_moment(n, ctx)
            s_quad[n] = v
            worst_gap = max(worst_gap, abs(v - s_exact[n]) / s_exact[n])

        bounds = []
        hold = True
        for n in range(1, n_max + 1):
            lo, hi = cubic_moment_bounds(n, ctx)
            bounds.append((lo, hi))
            if not (lo < s_exact[n] < hi):
                hold = False

        c_diag = [mp.sqrt(cubic_kernel_entry(k, k, ctx))
                  for k in range(2 * n_max + 1)]
        t_terms = [c_diag[2 * n] * s_exact[n] for n in range(n_max + 1)]
        series = classify_series(t_terms, ctx)
        lo_w, hi_w = window
        hi_w = min(hi_w, n_max)
        wmin = min(n * t_terms[n] for n in range(lo_w, hi_w + 1))
        wmax = max(t_terms[n] / n ** 2 for n in range(lo_w, hi_w + 1))

        prod_gap = _ZERO
        for n in range(1, min(n_max, 24)):
            direct = mpf(1)
            for m in range(2 * n + 1):
                direct *= fam.coeff_b(m, ctx)
            closed = cubic_b_product(2 * n + 1, ctx)
            prod_gap = max(prod_gap, abs(direct - closed) / closed)

        # growth roots: U from the exact oracle, V from the closed diagonal
        from .engine import u_table
        ut = u_table(fam, n_max, ctx, exact=True)
        u_tgt = (2 / cc.theta) ** 3
        v_tgt = mp.power(cc.theta, mpf(3) / 2)

        def u_root_at(n: int) -> mpf:
            return mp.power(ut.U[n], mpf(1) / n)

        def v_root_at(n: int) -> mpf:
            vn = cubic_b_product(n, ctx) * c_diag[n]
            return mp.power(vn, mpf(1) / n)

        u_root = (u_root_at(n_max), u_tgt)
        v_root = (v_root_at(n_max), v_tgt)
        u_mid = u_root_at(max(1, n_max // 3))
        v_mid = v_root_at(max(1, n_max // 3))
    with ctx.workprec():
        return CubicReport(
            n_max=n_max, s_exact=s_exact, s_quad=s_quad,
            quad_rel_gap=+worst_gap, bounds=bounds, bounds_hold=hold,
            c_diag=c_diag, t_terms=t_terms, series=series,
            window_min_n_t=+wmin, window_max_t_over_n2=+wmax,
            product_gap=+prod_gap,
            u_root=(+u_root[0], +u_root[1]), u_root_mid=+u_mid,
            v_root=(+v_root[0], +v_root[1]), v_root_mid=+v_mid,
            envelope_ok=env_ok)


def cubic_kernel_vs_engine(top: int, ctx: PrecisionContext,
                           order: Optional[int] = None) -> mpf:
    """Worst relative gap between the closed-form kernel entries and the
    tail-extrapolated engine route, over r, s <= top."""
    fam = make_family("cubic_sym")
    N = KERNEL_ROW_ORDER if order is None else order
    rows = b_rows(fam, top, N, ctx)
    A = build_A(rows, top, ctx, tail_fit=KERNEL_TAIL_FIT)
    with ctx.workprec(16):
        worst = _ZERO
        for r in range(top + 1):
            for s in range(r + 1):
                closed = cubic_kernel_entry(r, s, ctx)
                if closed == 0:
                    continue
                worst = max(worst, abs(A.entry(r, s) - closed) / abs(closed))
    with ctx.workprec():
        return +worst
