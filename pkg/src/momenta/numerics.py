"""Arbitrary-precision scalar kernel.

Provides the precision context threaded through the whole library, q-shifted
factorials, rising factorials, a Spouge-series gamma, tanh-sinh / exp-sinh
quadrature able to absorb endpoint singularities, and the constants of the
order-three trigonometric family used by :mod:`momenta.cubic`.

Scalars are ``mpmath.mpf`` values (binary floats with a bignum exponent, so
quantities like Gamma(300) or 2**(n**2) stay representable).  Every routine is
a pure function of its arguments plus the context; reductions run in fixed
ascending index order, which makes results bit-reproducible across runs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Tuple, Union

from mpmath import mp, mpf

from .errors import DomainError, NoConvergence

Real = Union[int, float, str, Fraction, mpf]

_ZERO = mpf(0)
_ONE = mpf(1)


@dataclass(frozen=True)
class PrecisionContext:
    """Working precision plus the truncation policy derived from it.

    bits        mantissa size used for results (>= 64)
    eps_tail    relative tolerance for truncating infinite sums/products,
                default 2**-(bits/2)
    max_terms   hard cap on any series/product/table length
    quad_levels maximum tanh-sinh refinement depth
    """

    bits: int = 512
    eps_tail: Optional[mpf] = None
    max_terms: int = 100_000
    quad_levels: int = 12

    def __post_init__(self):
        if self.bits < 64:
            raise DomainError("bits must be >= 64")
        if self.max_terms < 1000:
            raise DomainError("max_terms must be >= 1000")
        if self.eps_tail is None:
            with mp.workprec(self.bits):
                object.__setattr__(self, "eps_tail", mpf(2) ** (-(self.bits // 2)))
        else:
            with mp.workprec(64):
                raw = self.eps_tail
                if isinstance(raw, Fraction):
                    eps = mpf(raw.numerator) / mpf(raw.denominator)
                else:
                    eps = mpf(raw)
            if not (0 < eps < 1):
                raise DomainError("eps_tail must lie in (0, 1)")
            object.__setattr__(self, "eps_tail", eps)
        if self.quad_levels < 3:
            raise DomainError("quad_levels must be >= 3")

    def workprec(self, extra: int = 0):
        """Context manager setting the mpmath working precision."""
        return mp.workprec(self.bits + extra)

    def with_bits(self, bits: int) -> "PrecisionContext":
        return PrecisionContext(bits=bits, max_terms=self.max_terms,
                                quad_levels=self.quad_levels)


DEFAULT_CTX = PrecisionContext()


def to_mpf(x: Real, ctx: PrecisionContext, extra: int = 0) -> mpf:
    """Convert ``x`` to an mpf at the context precision.

    Fractions are converted by one correctly rounded division, strings by
    mpmath's decimal reader, so exact inputs stay exact whenever representable.
    """
    with ctx.workprec(extra):
        if isinstance(x, Fraction):
            return mpf(x.numerator) / mpf(x.denominator)
        return mpf(x)


# ---------------------------------------------------------------------------
# shifted factorials
# ---------------------------------------------------------------------------

def qpoch(z: Real, q: Real, n: int, ctx: PrecisionContext) -> mpf:
    """Finite q-shifted factorial prod_{j=0}^{n-1} (1 - z q^j); n = 0 gives 1."""
    if n < 0:
        raise DomainError("qpoch order must be nonnegative")
    with ctx.workprec(32):
        zq = to_mpf(z, ctx, 32)
        qq = to_mpf(q, ctx, 32)
        acc = _ONE
        for _ in range(n):
            acc *= (1 - zq)
            zq *= qq
    with ctx.workprec():
        return +acc


def qpoch_inf(z: Real, q: Real, ctx: PrecisionContext) -> mpf:
    """Infinite q-shifted factorial (z; q)_inf for |q| < 1.

    The product is cut once |z q^j| <= eps_tail * (1 - |q|), which keeps the
    relative truncation error below eps_tail.
    """
    with ctx.workprec(32):
        zq = to_mpf(z, ctx, 32)
        qq = to_mpf(q, ctx, 32)
        if abs(qq) >= 1:
            raise DomainError("qpoch_inf requires |q| < 1")
        cut = ctx.eps_tail * (1 - abs(qq))
        acc = _ONE
        for _ in range(ctx.max_terms):
            if abs(zq) <= cut:
                break
            acc *= (1 - zq)
            zq *= qq
        else:
            raise NoConvergence("(z;q)_inf did not reach its tail cut",
                                value=acc, error=abs(zq))
    with ctx.workprec():
        return +acc


def pochhammer(x: Real, n: int, ctx: PrecisionContext) -> mpf:
    """Rising factorial x (x+1) ... (x+n-1); n = 0 gives 1."""
    if n < 0:
        raise DomainError("pochhammer order must be nonnegative")
    with ctx.workprec(32):
        xx = to_mpf(x, ctx, 32)
        acc = _ONE
        for j in range(n):
            acc *= (xx + j)
    with ctx.workprec():
        return +acc


# ---------------------------------------------------------------------------
# gamma via Spouge's series
# ---------------------------------------------------------------------------

_SPOUGE_CACHE: dict = {}


def _spouge_coeffs(a: int, prec: int):
    key = (a, prec)
    cached = _SPOUGE_CACHE.get(key)
    if cached is not None:
        return cached
    with mp.workprec(prec):
        coeffs = [mp.sqrt(2 * mp.pi)]
        fact = _ONE
        for k in range(1, a):
            ak = mpf(a - k)
            ck = ak ** (mpf(k) - mpf(1) / 2) * mp.exp(ak) / fact
            if (k - 1) % 2 == 1:
                ck = -ck
            coeffs.append(ck)
            fact *= k
    _SPOUGE_CACHE[key] = coeffs
    return coeffs


def _spouge_gamma(t: mpf, prec: int) -> mpf:
    """Gamma(t) for t in [1, 2) by Spouge's series at working precision prec."""
    a = int(math.ceil((prec - 40) * math.log(2) / math.log(2 * math.pi))) + 3
    coeffs = _spouge_coeffs(a, prec)
    with mp.workprec(prec):
        z = t - 1
        s = coeffs[0]
        for k in range(1, a):
            s += coeffs[k] / (z + k)
        return (z + a) ** (z + mpf(1) / 2) * mp.exp(-(z + a)) * s


def gamma_hp(x: Real, ctx: PrecisionContext) -> mpf:
    """Gamma(x) for x > 0 with relative error <= 2**(-bits + 8).

    Integer and half-integer arguments reduce exactly through the recursion to
    Gamma(1) = 1 and Gamma(1/2) = sqrt(pi).  Other arguments are shifted into
    [1, 2) and evaluated with Spouge's series at bits + 96 internal precision
    (the documented guard budget g = 8 covers the final rounding and the mild
    cancellation inside the Spouge sum).
    """
    exact_num = None
    if isinstance(x, int):
        exact_num = Fraction(x)
    elif isinstance(x, Fraction):
        exact_num = x
    if exact_num is not None and exact_num <= 0:
        raise DomainError("gamma_hp requires x > 0")

    guard = 96
    with ctx.workprec(guard):
        xx = to_mpf(x, ctx, guard)
        if xx <= 0:
            raise DomainError("gamma_hp requires x > 0")
        two_x = 2 * xx
        if xx == mp.floor(xx):
            n = int(xx)
            val = mpf(math.factorial(n - 1))
        elif two_x == mp.floor(two_x):
            # x = n + 1/2: Gamma = (2n)! sqrt(pi) / (4^n n!)
            n = int(two_x) // 2
            val = mpf(math.factorial(2 * n)) * mp.sqrt(mp.pi) \
                / (mpf(4) ** n * mpf(math.factorial(n)))
        else:
            shift = _ONE
            t = xx
            while t < 1:
                shift /= t
                t += 1
            while t >= 2:
                t -= 1
                shift *= t
            val = shift * _spouge_gamma(t, ctx.bits + guard)
    with ctx.workprec():
        return +val


# ---------------------------------------------------------------------------
# tanh-sinh quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadResult:
    value: mpf
    error: mpf
    levels: int
    evaluations: int


_TS_NODE_CACHE: dict = {}
_ES_NODE_CACHE: dict = {}


def _ts_t_max(prec: int) -> float:
    # past this point every node rounds onto an endpoint at precision prec
    return math.asinh((prec + 16) * math.log(2) / math.pi)


def _ts_level(prec: int, level: int):
    """Cached tanh-sinh geometry at working precision ``prec``.

    Returns the list of nodes with t = j*h > 0 for the level (level 0 also
    contains t = 0 first): tuples (dist_unit, w_unit), where the node pair is
    x = b - half*dist_unit / x = a + half*dist_unit with weight half*w_unit.
    The endpoint distance is produced without cancellation so nodes stay
    distinguishable from the endpoints until far below tolerance.
    """
    key = (prec, level)
    hit = _TS_NODE_CACHE.get(key)
    if hit is not None:
        return hit
    t_max = _ts_t_max(prec)
    with mp.workprec(prec):
        h = mpf(2) ** (-level)
        njs = int(t_max / h)
        if level == 0:
            js = range(0, njs + 1)
        else:
            js = range(1, njs + 1, 2)
        nodes = []
        for j in js:
            t = j * h
            u = mp.pi / 2 * mp.sinh(t)
            p = mp.exp(2 * u)
            dist_unit = 2 / (p + 1)
            w_unit = mp.pi / 2 * mp.cosh(t) * 4 * p / (p + 1) ** 2
            nodes.append((j, dist_unit, w_unit))
    _TS_NODE_CACHE[key] = nodes
    return nodes


def _es_level(prec: int, level: int):
    """Cached exp-sinh geometry: tuples (j, e_u, w_unit) for x = a + e_u."""
    key = (prec, level)
    hit = _ES_NODE_CACHE.get(key)
    if hit is not None:
        return hit
    t_max = _ts_t_max(prec)
    with mp.workprec(prec):
        h = mpf(2) ** (-level)
        njs = int(t_max / h)
        if level == 0:
            js = range(-njs, njs + 1)
        else:
            js = [j for j in range(-njs, njs + 1) if j % 2 != 0]
        nodes = []
        for j in js:
            t = j * h
            u = mp.pi / 2 * mp.sinh(t)
            e = mp.exp(u)
            w_unit = mp.pi / 2 * mp.cosh(t) * e
            nodes.append((j, e, w_unit))
    _ES_NODE_CACHE[key] = nodes
    return nodes


def quad_ts(f: Callable[[mpf], mpf], a: Real, b: Real,
            ctx: PrecisionContext, eps: Optional[mpf] = None,
            levels: Optional[int] = None,
            scale_floor: Optional[mpf] = None) -> Tuple[mpf, mpf]:
    """Integrate f over (a, b) by tanh-sinh refinement; b may be +inf.

    Refinement stops when two successive levels agree to ``eps`` (default
    ctx.eps_tail) relative to max(|value|, scale_floor); the returned error
    estimate is the last inter-level difference.  ``scale_floor`` lets a
    caller integrating one panel of a larger integral declare the scale that
    matters, so negligible panels converge immediately.  Endpoint
    singularities of integrable logarithmic or algebraic type are handled by
    the double-exponential clustering; nodes that round onto an endpoint, or
    where f is not finite, are skipped, which is sound because their weights
    are below the tolerance by construction.

    Raises NoConvergence (with the value and estimate attached) when
    ``levels`` (default ctx.quad_levels) is exhausted.
    """
    # Internal precision is doubled: nodes that round onto an endpoint carry
    # a neglected mass of order dist**(1-p) for an algebraic singularity of
    # strength p, and 2*bits keeps that far below eps_tail for p <= 3/4.
    guard = ctx.bits + 64
    eps = ctx.eps_tail if eps is None else mpf(eps)
    max_level = ctx.quad_levels if levels is None else levels

    prec = ctx.bits + guard
    with mp.workprec(prec):
        a_mp = to_mpf(a, ctx, guard)
        b_mp = mp.inf if b is None else to_mpf(b, ctx, guard)
        infinite = (b_mp == mp.inf)
        if not infinite:
            if b_mp == a_mp:
                return _ZERO, _ZERO
            if b_mp < a_mp:
                raise DomainError("quad_ts needs a <= b")
            half = (b_mp - a_mp) / 2

        t_max = _ts_t_max(prec)
        w_floor = mpf(2) ** (-(prec + 32))

        def eval_at(x: mpf, interior: bool) -> Optional[mpf]:
            try:
                y = f(x)
            except ZeroDivisionError:
                y = None
            if y is not None and not isinstance(y, mpf):
                try:
                    y = mpf(y)
                except (TypeError, ValueError):
                    y = None
            if y is None or not mp.isfinite(y):
                if interior:
                    raise DomainError(
                        "integrand not finite away from the endpoints")
                return None
            return y

        def level_sum(level: int) -> mpf:
            total = _ZERO
            if infinite:
                for j, e_u, w_unit in _es_level(prec, level):
                    if w_unit < w_floor:
                        continue
                    x = a_mp + e_u
                    if x == a_mp:
                        continue
                    y = eval_at(x, abs(j) < t_max * 2 ** level / 2)
                    if y is not None:
                        total += w_unit * y
                return total
            for j, dist_unit, w_unit in _ts_level(prec, level):
                w = half * w_unit
                interior = j < t_max * 2 ** level / 2
                if j == 0:
                    y = eval_at(a_mp + half, True)
                    if y is not None:
                        total += w * y
                    continue
                if w >= w_floor:
                    dist = half * dist_unit
                    x_lo = a_mp + dist
                    if x_lo != a_mp:
                        y = eval_at(x_lo, interior)
                        if y is not None:
                            total += w * y
                    x_hi = b_mp - dist
                    if x_hi != b_mp:
                        y = eval_at(x_hi, interior)
                        if y is not None:
                            total += w * y
            return total

        s_prev = level_sum(0)
        err = abs(s_prev) + 1
        for level in range(1, max_level + 1):
            h = mpf(2) ** (-level)
            s_new = s_prev / 2 + h * level_sum(level)
            err = abs(s_new - s_prev)
            s_prev = s_new
            floor = mpf(2) ** (-ctx.bits) if scale_floor is None \
                else mpf(scale_floor)
            scale = max(abs(s_new), floor)
            if level >= 3 and err <= eps * scale:
                with ctx.workprec():
                    return +s_prev, +err
        with ctx.workprec():
            raise NoConvergence("tanh-sinh refinement exhausted",
                                value=+s_prev, error=+err)


# ---------------------------------------------------------------------------
# constants of the order-three trigonometric family
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CubicConstants:
    """theta = Gamma(1/3)^3 / (2 pi sqrt 3), a = theta^3, and the companion
    constant c = sqrt(3) Gamma(1/3)^6 / (2 pi)^3 with its ratio c^2/a."""

    theta: mpf
    a: mpf
    c: mpf
    c2_over_a: mpf


def cubic_constants(ctx: PrecisionContext) -> CubicConstants:
    with ctx.workprec(32):
        g13 = gamma_hp(Fraction(1, 3), ctx.with_bits(ctx.bits + 32))
        theta = g13 ** 3 / (2 * mp.pi * mp.sqrt(3))
        a = theta ** 3
        c = mp.sqrt(3) * g13 ** 6 / (2 * mp.pi) ** 3
        r = c ** 2 / a
    with ctx.workprec():
        return CubicConstants(theta=+theta, a=+a, c=+c, c2_over_a=+r)
