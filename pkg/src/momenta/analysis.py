"""Sequence classifiers and the integral threshold functions.

The three threshold functions evaluated here control the growth of the
normalized moment and kernel diagnostics of a symmetric family whose
recurrence coefficients satisfy b_{n-1}/b_n <= exp(-f(n)) with
liminf n f(n) = alpha:

    u(alpha) = max_{2^(-1/alpha) <= x <= 1} (x+1)
               * int_x^1 log(y^alpha / (1-y^alpha)) dy/(1+y)^2
    v(alpha) = int_1^inf log([1-x^(-alpha)]^(-1)) dx          (alpha > 1)
    k(alpha) = 4^(-alpha) exp(2 u(alpha) + v(alpha))          (alpha > 1)

k(alpha) < 1 certifies absolute summability of the kernel-times-Hankel
products.  All integrands are written with expm1/log1p so the 1 - y^alpha
cancellation never happens in floating point.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

from mpmath import mp, mpf

from .errors import BracketError, DomainError, FitUnstable
from .families import FamilySpec
from .numerics import PrecisionContext, quad_ts, to_mpf

_ZERO = mpf(0)


# ---------------------------------------------------------------------------
# threshold functions
# ---------------------------------------------------------------------------

def _u_integrand(alpha: mpf) -> Callable[[mpf], mpf]:
    def g(y: mpf) -> mpf:
        ln_y = mp.log(y)
        val = alpha * ln_y - mp.log(-mp.expm1(alpha * ln_y))
        return val / (1 + y) ** 2
    return g


def _coarse_ctx(ctx: PrecisionContext) -> PrecisionContext:
    return PrecisionContext(bits=96, quad_levels=ctx.quad_levels,
                            eps_tail=mpf(10) ** -10)


def u_alpha(alpha, ctx: PrecisionContext) -> mpf:
    """u(alpha) by quadrature plus golden-section maximization.

    A 64-point coarse grid at reduced precision locates the maximizer; the
    three best grid cells are refined by golden section to relative 1e-12 in
    x (the maximum is smooth, so the x-error is negligible in the value), and
    the winner is re-evaluated at the full context tolerance.
    """
    with ctx.workprec(16):
        al = to_mpf(alpha, ctx, 16)
        if not al > 0:
            raise DomainError("u(alpha) needs alpha > 0")
        x_lo = mp.exp(-mp.log(2) / al)
        x_hi = mpf(1)
        cheap = _coarse_ctx(ctx)
        g_cheap = _u_integrand(al)

        def m_cheap(x: mpf) -> mpf:
            if x >= x_hi:
                return _ZERO
            val, _ = quad_ts(g_cheap, x, x_hi, cheap)
            return (x + 1) * val

        grid_n = 64
        step = (x_hi - x_lo) / grid_n
        xs = [x_lo + i * step for i in range(grid_n)]
        vals = [m_cheap(x) for x in xs]
        order = sorted(range(grid_n), key=lambda i: vals[i], reverse=True)
        seeds = sorted(order[:3])

        phi = (mp.sqrt(5) - 1) / 2
        best_x, best_v = None, None
        for i in seeds:
            lo = xs[i - 1] if i > 0 else x_lo
            hi = xs[i + 1] if i + 1 < grid_n else x_hi
            a_, b_ = lo, hi
            c_ = b_ - phi * (b_ - a_)
            d_ = a_ + phi * (b_ - a_)
            fc, fd = m_cheap(c_), m_cheap(d_)
            while (b_ - a_) > mpf(10) ** -12 * max(abs(b_), 1):
                if fc > fd:
                    b_, d_, fd = d_, c_, fc
                    c_ = b_ - phi * (b_ - a_)
                    fc = m_cheap(c_)
                else:
                    a_, c_, fc = c_, d_, fd
                    d_ = a_ + phi * (b_ - a_)
                    fd = m_cheap(d_)
            x_star = (a_ + b_) / 2
            v_star = m_cheap(x_star)
            if best_v is None or v_star > best_v:
                best_x, best_v = x_star, v_star
        val, _ = quad_ts(_u_integrand(al), best_x, x_hi, ctx)
        out = (best_x + 1) * val
    with ctx.workprec():
        return +out


def v_alpha(alpha, ctx: PrecisionContext) -> mpf:
    """v(alpha) = int_1^inf log(1/(1 - x^-alpha)) dx via x -> 1/t."""
    with ctx.workprec(16):
        al = to_mpf(alpha, ctx, 16)
        if not al > 1:
            raise DomainError("v(alpha) needs alpha > 1")

        def g(t: mpf) -> mpf:
            return -mp.log(-mp.expm1(al * mp.log(t))) / (t * t)

        val, _ = quad_ts(g, 0, 1, ctx)
    with ctx.workprec():
        return +val


def k_alpha(alpha, ctx: PrecisionContext) -> mpf:
    """k(alpha) = 4^(-alpha) exp(2 u(alpha) + v(alpha)), alpha > 1."""
    with ctx.workprec(16):
        al = to_mpf(alpha, ctx, 16)
        if not al > 1:
            raise DomainError("k(alpha) needs alpha > 1")
        u = u_alpha(al, ctx)
        v = v_alpha(al, ctx)
        out = mp.power(4, -al) * mp.exp(2 * u + v)
    with ctx.workprec():
        return +out


@dataclass(frozen=True)
class AlphaValue:
    alpha: mpf
    u: mpf
    v: Optional[mpf]
    k: Optional[mpf]


def alpha_value(alpha, ctx: PrecisionContext) -> AlphaValue:
    """u, v, k at one abscissa (v and k only exist for alpha > 1)."""
    with ctx.workprec(16):
        al = to_mpf(alpha, ctx, 16)
    u = u_alpha(al, ctx)
    if al > 1:
        v = v_alpha(al, ctx)
        with ctx.workprec(16):
            k = mp.power(4, -al) * mp.exp(2 * u + v)
        with ctx.workprec():
            return AlphaValue(alpha=+al, u=u, v=v, k=+k)
    return AlphaValue(alpha=al, u=u, v=None, k=None)


def alpha_threshold(lo, hi, tol, ctx: PrecisionContext) -> mpf:
    """Bisection root of k(alpha) = 1 on [lo, hi] to bracket width tol."""
    with ctx.workprec(16):
        a = to_mpf(lo, ctx, 16)
        b = to_mpf(hi, ctx, 16)
        width = to_mpf(tol, ctx, 16)
        ka = k_alpha(a, ctx)
        kb = k_alpha(b, ctx)
        if not (ka > 1 > kb):
            raise BracketError(
                f"no bracket: k({mp.nstr(a, 8)}) = {mp.nstr(ka, 8)}, "
                f"k({mp.nstr(b, 8)}) = {mp.nstr(kb, 8)}")
        while (b - a) > width:
            mid = (a + b) / 2
            if k_alpha(mid, ctx) > 1:
                a = mid
            else:
                b = mid
        out = (a + b) / 2
    with ctx.workprec():
        return +out


def tau_c(c, ctx: PrecisionContext) -> mpf:
    """Type integral tau_c = int_0^1 dt / (1-t^(2c))^(1/c) for c > 1."""
    with ctx.workprec(16):
        cc = to_mpf(c, ctx, 16)
        if not cc > 1:
            raise DomainError("tau_c needs c > 1")

        def g(t: mpf) -> mpf:
            return mp.exp(-mp.log(-mp.expm1(2 * cc * mp.log(t))) / cc)

        val, _ = quad_ts(g, 0, 1, ctx)
    with ctx.workprec():
        return +val


# ---------------------------------------------------------------------------
# shape report
# ---------------------------------------------------------------------------

@dataclass
class ShapeReport:
    """Observed shape of a coefficient sequence over 0..N."""

    n_max: int
    q_increasing: Optional[Tuple[mpf, int]]       # (q, onset) or None
    log_shape: str                                # convex | concave | neither
    log_onset: Optional[int]
    carleman_partial: mpf
    carleman_ratio: mpf                           # trailing increment ratio
    p0_partial: Optional[mpf] = None              # sum P_{2n}(0)^2
    p0_ratio: Optional[mpf] = None
    q0_partial: Optional[mpf] = None              # sum Q_{2n+1}(0)^2
    q0_ratio: Optional[mpf] = None


def shape_report(fam: FamilySpec, N: int, ctx: PrecisionContext,
                 probe_indeterminacy: bool = False) -> ShapeReport:
    """Classify b_0..b_N: tightest eventually-ratio bound, log shape by the
    sign of b_n^2 - b_{n-1} b_{n+1}, Carleman partial sums, and (symmetric
    families) the partial sums of the zero-value products that probe
    indeterminacy.  ``probe_indeterminacy=True`` makes the probe mandatory,
    which is a domain error for non-symmetric families."""
    if N < 8:
        raise DomainError("need N >= 8 for a shape report")
    if probe_indeterminacy and not fam.symmetric:
        raise DomainError("the indeterminacy probe needs a symmetric family")
    with ctx.workprec(16):
        b = [fam.coeff_b(n, ctx) for n in range(N + 1)]
        ratios = [b[n - 1] / b[n] for n in range(1, N + 1)]
        onset = None
        for i in range(len(ratios) - 1, -1, -1):
            if ratios[i] >= 1:
                onset = i + 1
                break
        start = 0 if onset is None else onset
        q_inc = None
        if start < len(ratios):
            q_val = max(ratios[start:])
            if q_val < 1:
                q_inc = (q_val, start)

        signs = []
        for n in range(1, N):
            d = b[n] * b[n] - b[n - 1] * b[n + 1]
            signs.append(0 if d == 0 else (1 if d > 0 else -1))
        shape = "neither"
        log_onset = None
        tail = signs[len(signs) // 2:]
        if all(s <= 0 for s in tail):
            shape = "convex"
        elif all(s >= 0 for s in tail):
            shape = "concave"
        if shape != "neither":
            want = -1 if shape == "convex" else 1
            log_onset = 1
            for i in range(len(signs) - 1, -1, -1):
                if signs[i] == -want:
                    log_onset = i + 2
                    break

        carleman = _ZERO
        for x in b:
            carleman += 1 / x
        carl_ratio = (1 / b[N]) / (1 / b[N - 1])

        p0 = q0 = p0_r = q0_r = None
        if fam.symmetric:
            p_term = mpf(1)            # P_0(0)^2
            p_sum = mpf(1)
            q_term = 1 / b[0] ** 2     # Q_1(0)^2
            q_sum = q_term
            for n in range(1, N // 2 + 1):
                # P_{2n}(0)^2 = (b0 b2 ... b_{2n-2} / (b1 b3 ... b_{2n-1}))^2
                p_term = p_term * (b[2 * n - 2] / b[2 * n - 1]) ** 2
                p_sum += p_term
                # Q_{2n+1}(0)^2 = (b1 ... b_{2n-1} / (b0 b2 ... b_{2n}))^2
                q_term = q_term * (b[2 * n - 1] / b[2 * n]) ** 2
                q_sum += q_term
            p0, q0 = p_sum, q_sum
            p0_r = p_term / p_sum
            q0_r = q_term / q_sum
    with ctx.workprec():
        return ShapeReport(
            n_max=N,
            q_increasing=None if q_inc is None else (+q_inc[0], q_inc[1]),
            log_shape=shape, log_onset=log_onset,
            carleman_partial=+carleman, carleman_ratio=+carl_ratio,
            p0_partial=None if p0 is None else +p0,
            p0_ratio=None if p0_r is None else +p0_r,
            q0_partial=None if q0 is None else +q0,
            q0_ratio=None if q0_r is None else +q0_r)


# ---------------------------------------------------------------------------
# order and type from the kernel diagonal
# ---------------------------------------------------------------------------

def order_type(c_values: Sequence, ctx: PrecisionContext,
               residual_bound: float = 0.05) -> Tuple[mpf, mpf, mpf]:
    """Order and type estimates from the decay of c_k.

    The decay law log(1/c_k) ~ (1/rho) k log k + const * k motivates a least
    squares fit of log(1/c_k) against the regressors [k log k, k, 1] on the
    trailing half; rho is the reciprocal of the leading coefficient, and the
    type follows by inverting the growth relation
    limsup k^(1/rho) c_k^(1/k) = (e rho tau)^(1/rho) on the trailing maximum.
    Returns (rho, tau, fit_residual); raises FitUnstable when the normalized
    residual exceeds ``residual_bound``.
    """
    K = len(c_values) - 1
    if K < 40:
        raise DomainError("order_type needs at least 40 certified values")
    with ctx.workprec(16):
        ks = list(range(max(K // 2, 2), K + 1))
        ys = []
        for k in ks:
            ck = to_mpf(c_values[k], ctx, 16)
            if not ck > 0:
                raise DomainError("c_k must be positive")
            ys.append(-mp.log(ck))
        rows = [[mpf(k) * mp.log(k), mpf(k), mpf(1)] for k in ks]
        ata = [[_ZERO] * 3 for _ in range(3)]
        atb = [_ZERO] * 3
        for r, y in zip(rows, ys):
            for i in range(3):
                atb[i] += r[i] * y
                for j in range(3):
                    ata[i][j] += r[i] * r[j]
        from .engine import _solve_dense
        beta = _solve_dense(ata, atb)
        if not beta[0] > 0:
            raise FitUnstable("leading fit coefficient not positive; "
                              "decay is not of power-factorial type")
        rho = 1 / beta[0]
        resid2 = _ZERO
        for r, y in zip(rows, ys):
            e = y - (r[0] * beta[0] + r[1] * beta[1] + r[2] * beta[2])
            resid2 += e * e
        spread = max(ys) - min(ys) + 1
        residual = mp.sqrt(resid2 / len(ys)) / spread
        if residual > residual_bound:
            raise FitUnstable(f"fit residual {mp.nstr(residual, 4)} exceeds "
                              f"{residual_bound}")
        peak = _ZERO
        for k in ks:
            ck = to_mpf(c_values[k], ctx, 16)
            cand = mp.power(k, 1 / rho) * mp.power(ck, mpf(1) / k)
            peak = max(peak, cand)
        tau = mp.power(peak, rho) / (mp.e * rho)
    with ctx.workprec():
        return +rho, +tau, +residual
