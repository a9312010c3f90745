"""Moment-problem families given by their recurrence coefficients.

A family packages the generators of the three-term recurrence coefficients
(a_n, b_n), a symmetry flag, and whatever closed forms are known for it
(moments, polynomial coefficients).  Exact rational views of b_n**2 are kept
whenever they exist, because they unlock the exact-rational moment oracle in
:mod:`momenta.engine`.

Builtins
--------
qhermite2(q)            b_n = q^(-n-1/2) sqrt(1-q^(n+1)); discrete q-Hermite II
alsalam_chihara(p,beta) b_n = p^(-n-1/2)/2 [(1-p^(n+1))(beta+p^n)]^(1/2)
cubic_sym               b_2n = sqrt(3n+1)(3n+2), b_{2n-1} = 3n sqrt(3n+1)
cubic_stieltjes         a_n = lam_n + mu_n, b_n = sqrt(lam_n mu_{n+1}) with
                        lam_n = (3n+1)(3n+2)^2, mu_n = (3n)^2 (3n+1)
powerlaw(c, scaled)     b_n = (n+1)^c, or c^c (n+1)^c when scaled
gegenbauer(lam)         bounded coefficients of the Gegenbauer weight
lognormal(q)            Stieltjes family with moments s_n = q^(-n^2/2) and a
                        fully explicit coefficient matrix
table(path)             user-supplied coefficient arrays from a JSON file
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, Optional

from mpmath import mp, mpf

from .errors import DomainError, MissingData
from .numerics import PrecisionContext, qpoch, to_mpf


@dataclass(frozen=True)
class FamilySpec:
    """Immutable family record; all generators are pure functions."""

    id: str
    params: Dict[str, object]
    symmetric: bool
    coeff_b: Callable[[int, PrecisionContext], mpf]
    coeff_a: Callable[[int, PrecisionContext], mpf]
    rational_b2: bool = False
    b2_exact: Optional[Callable[[int], Fraction]] = None
    a_exact: Optional[Callable[[int], Fraction]] = None
    known_moment: Optional[Callable[[int, PrecisionContext], mpf]] = None
    known_moment_exact: Optional[Callable[[int], Fraction]] = None
    known_poly_coeff: Optional[Callable[[int, int, PrecisionContext], mpf]] = None

    def b(self, n: int, ctx: PrecisionContext) -> mpf:
        return self.coeff_b(n, ctx)

    def a(self, n: int, ctx: PrecisionContext) -> mpf:
        return self.coeff_a(n, ctx)


def _zero_a(n: int, ctx: PrecisionContext) -> mpf:
    return mpf(0)


def _frac(value) -> Fraction:
    if isinstance(value, bool):
        raise DomainError("expected a number, got a boolean")
    return Fraction(value)


def _sqrt_of_exact(q2: Fraction, ctx: PrecisionContext) -> mpf:
    with ctx.workprec(16):
        val = mp.sqrt(to_mpf(q2, ctx, 16))
    with ctx.workprec():
        return +val


# ---------------------------------------------------------------------------
# builtin constructors
# ---------------------------------------------------------------------------

def _qhermite2(q: Fraction) -> FamilySpec:
    if not (0 < q < 1):
        raise DomainError("qhermite2 needs q in (0,1)")

    def b2(n: int) -> Fraction:
        return q ** (-2 * n - 1) * (1 - q ** (n + 1))

    def b(n: int, ctx: PrecisionContext) -> mpf:
        return _sqrt_of_exact(b2(n), ctx)

    def s_exact(n: int) -> Fraction:
        if n % 2 == 1:
            return Fraction(0)
        m = n // 2
        acc = Fraction(1)
        for j in range(m):
            acc *= 1 - q ** (2 * j + 1)
        return acc * q ** (-m * m)

    def s(n: int, ctx: PrecisionContext) -> mpf:
        return to_mpf(s_exact(n), ctx)

    return FamilySpec(id="qhermite2", params={"q": q}, symmetric=True,
                      coeff_b=b, coeff_a=_zero_a, rational_b2=True,
                      b2_exact=b2, known_moment=s, known_moment_exact=s_exact)


def _alsalam_chihara(p: Fraction, beta: Fraction) -> FamilySpec:
    if not (0 < p < 1):
        raise DomainError("alsalam_chihara needs p in (0,1)")
    if beta < 0:
        raise DomainError("alsalam_chihara needs beta >= 0")

    def b2(n: int) -> Fraction:
        return Fraction(1, 4) * p ** (-2 * n - 1) \
            * (1 - p ** (n + 1)) * (beta + p ** n)

    def b(n: int, ctx: PrecisionContext) -> mpf:
        return _sqrt_of_exact(b2(n), ctx)

    return FamilySpec(id="alsalam_chihara", params={"p": p, "beta": beta},
                      symmetric=True, coeff_b=b, coeff_a=_zero_a,
                      rational_b2=True, b2_exact=b2)


def _cubic_lambda(n: int) -> int:
    return (3 * n + 1) * (3 * n + 2) ** 2


def _cubic_mu(n: int) -> int:
    return (3 * n) ** 2 * (3 * n + 1)


def _cubic_sym() -> FamilySpec:
    def b2(m: int) -> Fraction:
        if m % 2 == 0:
            n = m // 2
            return Fraction(_cubic_lambda(n))
        n = (m + 1) // 2
        return Fraction(_cubic_mu(n))

    def b(m: int, ctx: PrecisionContext) -> mpf:
        return _sqrt_of_exact(b2(m), ctx)

    return FamilySpec(id="cubic_sym", params={}, symmetric=True,
                      coeff_b=b, coeff_a=_zero_a, rational_b2=True,
                      b2_exact=b2)


def _cubic_stieltjes() -> FamilySpec:
    def a_ex(n: int) -> Fraction:
        return Fraction(_cubic_lambda(n) + _cubic_mu(n))

    def b2(n: int) -> Fraction:
        return Fraction(_cubic_lambda(n) * _cubic_mu(n + 1))

    def b(n: int, ctx: PrecisionContext) -> mpf:
        return _sqrt_of_exact(b2(n), ctx)

    def a(n: int, ctx: PrecisionContext) -> mpf:
        return to_mpf(a_ex(n), ctx)

    return FamilySpec(id="cubic_stieltjes", params={}, symmetric=False,
                      coeff_b=b, coeff_a=a, rational_b2=True,
                      b2_exact=b2, a_exact=a_ex)


def _powerlaw(c: Fraction, scaled: bool) -> FamilySpec:
    if c <= 0:
        raise DomainError("powerlaw needs c > 0")
    two_c = 2 * c
    rational = two_c.denominator == 1

    def b2(n: int) -> Fraction:
        base = Fraction(n + 1) ** int(two_c)
        if scaled:
            base *= c ** int(two_c)
        return base

    def b(n: int, ctx: PrecisionContext) -> mpf:
        if rational:
            return _sqrt_of_exact(b2(n), ctx)
        with ctx.workprec(16):
            cc = to_mpf(c, ctx, 16)
            val = mp.power(mpf(n + 1), cc)
            if scaled:
                val *= mp.power(cc, cc)
        with ctx.workprec():
            return +val

    return FamilySpec(id="powerlaw", params={"c": c, "scaled": scaled},
                      symmetric=True, coeff_b=b, coeff_a=_zero_a,
                      rational_b2=rational,
                      b2_exact=b2 if rational else None)


def _gegenbauer(lam: Fraction) -> FamilySpec:
    if lam <= Fraction(-1, 2):
        raise DomainError("gegenbauer needs lambda > -1/2")

    def b2(n: int) -> Fraction:
        if lam == 0:
            # the generic formula is 0/0 at lambda = 0
            return Fraction(1, 2) if n == 0 else Fraction(1, 4)
        return Fraction(n + 1) * (n + 2 * lam) \
            / (4 * (n + lam) * (n + lam + 1))

    def b(n: int, ctx: PrecisionContext) -> mpf:
        return _sqrt_of_exact(b2(n), ctx)

    def s_exact(n: int) -> Fraction:
        if n % 2 == 1:
            return Fraction(0)
        m = n // 2
        num = Fraction(1)
        den = Fraction(1)
        for j in range(m):
            num *= Fraction(1, 2) + j
            den *= lam + 1 + j
        return num / den

    def s(n: int, ctx: PrecisionContext) -> mpf:
        return to_mpf(s_exact(n), ctx)

    return FamilySpec(id="gegenbauer", params={"lambda": lam}, symmetric=True,
                      coeff_b=b, coeff_a=_zero_a, rational_b2=True,
                      b2_exact=b2, known_moment=s, known_moment_exact=s_exact)


def _lognormal(q: Fraction) -> FamilySpec:
    """Stieltjes family with s_n = q^(-n^2/2).

    The orthonormal polynomials are explicit, which pins down the recurrence:
        b_n = q^(-2n-1) sqrt(1-q^(n+1)),
        a_n = q^(-2n-1/2) (1 + q - q^(n+1)).
    """
    if not (0 < q < 1):
        raise DomainError("lognormal needs q in (0,1)")

    def b2(n: int) -> Fraction:
        return q ** (-4 * n - 2) * (1 - q ** (n + 1))

    def b(n: int, ctx: PrecisionContext) -> mpf:
        return _sqrt_of_exact(b2(n), ctx)

    def a(n: int, ctx: PrecisionContext) -> mpf:
        with ctx.workprec(16):
            qq = to_mpf(q, ctx, 16)
            val = mp.power(qq, mpf(-2 * n) - mpf(1) / 2) * (1 + q - q ** (n + 1))
        with ctx.workprec():
            return +val

    def s(n: int, ctx: PrecisionContext) -> mpf:
        with ctx.workprec(16):
            qq = to_mpf(q, ctx, 16)
            val = mp.power(qq, -mpf(n * n) / 2)
        with ctx.workprec():
            return +val

    def s_exact(n: int) -> Fraction:
        if (n * n) % 2 == 0:
            return q ** (-(n * n) // 2)
        raise DomainError("lognormal moments with odd n^2 are irrational")

    def poly_coeff(k: int, n: int, ctx: PrecisionContext) -> mpf:
        # coefficient of x^k in the degree-n orthonormal polynomial
        if k > n or k < 0:
            return mpf(0)
        with ctx.workprec(32):
            qq = to_mpf(q, ctx, 32)
            qbin = (qpoch(q, q, n, ctx.with_bits(ctx.bits + 32))
                    / (qpoch(q, q, k, ctx.with_bits(ctx.bits + 32))
                       * qpoch(q, q, n - k, ctx.with_bits(ctx.bits + 32))))
            sign = -1 if (n + k) % 2 == 1 else 1
            val = sign * mp.power(qq, mpf(n) / 2 + k * k - mpf(k) / 2) * qbin \
                / mp.sqrt(qpoch(q, q, n, ctx.with_bits(ctx.bits + 32)))
        with ctx.workprec():
            return +val

    return FamilySpec(id="lognormal", params={"q": q}, symmetric=False,
                      coeff_b=b, coeff_a=a, rational_b2=True, b2_exact=b2,
                      known_moment=s, known_moment_exact=s_exact,
                      known_poly_coeff=poly_coeff)


def _table(path: str) -> FamilySpec:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if "b" not in data:
        raise DomainError("table family file needs a 'b' array")
    b_vals = [Fraction(str(x)) for x in data["b"]]
    a_vals = [Fraction(str(x)) for x in data.get("a", [])]
    symmetric = all(x == 0 for x in a_vals)
    if any(x <= 0 for x in b_vals):
        raise DomainError("table family needs b_n > 0")

    def b(n: int, ctx: PrecisionContext) -> mpf:
        if n >= len(b_vals):
            raise MissingData(f"table family has only {len(b_vals)} b-entries")
        return to_mpf(b_vals[n], ctx)

    def a(n: int, ctx: PrecisionContext) -> mpf:
        if not a_vals:
            return mpf(0)
        if n >= len(a_vals):
            raise MissingData(f"table family has only {len(a_vals)} a-entries")
        return to_mpf(a_vals[n], ctx)

    def b2(n: int) -> Fraction:
        if n >= len(b_vals):
            raise MissingData(f"table family has only {len(b_vals)} b-entries")
        return b_vals[n] ** 2

    def a_ex(n: int) -> Fraction:
        if not a_vals:
            return Fraction(0)
        if n >= len(a_vals):
            raise MissingData(f"table family has only {len(a_vals)} a-entries")
        return a_vals[n]

    return FamilySpec(id="table", params={"path": path}, symmetric=symmetric,
                      coeff_b=b, coeff_a=a if a_vals else _zero_a,
                      rational_b2=True, b2_exact=b2,
                      a_exact=a_ex if a_vals else None)


_BUILTINS = {
    "qhermite2": lambda p: _qhermite2(_frac(p.get("q", Fraction(1, 2)))),
    "alsalam_chihara": lambda p: _alsalam_chihara(
        _frac(p.get("p", Fraction(1, 4))), _frac(p.get("beta", 1))),
    "cubic_sym": lambda p: _cubic_sym(),
    "cubic_stieltjes": lambda p: _cubic_stieltjes(),
    "powerlaw": lambda p: _powerlaw(_frac(p.get("c", 2)),
                                    bool(p.get("scaled", True))),
    "gegenbauer": lambda p: _gegenbauer(_frac(p.get("lambda", Fraction(1, 2)))),
    "lognormal": lambda p: _lognormal(_frac(p.get("q", Fraction(1, 2)))),
    "table": lambda p: _table(str(p["path"])),
}


def parse_descriptor(text: str) -> Dict[str, object]:
    """Parse the CLI grammar ``name:key=val,key=val`` into a descriptor dict.

    Values are read as exact rationals ("0.25", "1/4") or booleans.
    """
    name, _, rest = text.partition(":")
    name = name.strip()
    params: Dict[str, object] = {"name": name}
    if name == "table":
        if not rest:
            raise DomainError("table descriptor needs a path: table:<path>")
        params["path"] = rest.strip()
        return params
    if rest:
        for item in rest.split(","):
            key, _, val = item.partition("=")
            key = key.strip()
            val = val.strip()
            if not key or not val:
                raise DomainError(f"malformed descriptor item {item!r}")
            if val.lower() in ("true", "false"):
                params[key] = (val.lower() == "true")
            else:
                try:
                    params[key] = Fraction(val)
                except ValueError as exc:
                    raise DomainError(f"cannot parse value {val!r}") from exc
    return params


def make_family(spec, ctx: Optional[PrecisionContext] = None) -> FamilySpec:
    """Build a FamilySpec from a descriptor string or dict."""
    if isinstance(spec, FamilySpec):
        return spec
    if isinstance(spec, str):
        spec = parse_descriptor(spec)
    if not isinstance(spec, dict) or "name" not in spec:
        raise DomainError("family descriptor must name a builtin")
    name = spec["name"]
    if name not in _BUILTINS:
        raise DomainError(f"unknown family {name!r};"
                          f" known: {sorted(_BUILTINS)}")
    params = {k: v for k, v in spec.items() if k != "name"}
    return _BUILTINS[name](params)


# ---------------------------------------------------------------------------
# derived families
# ---------------------------------------------------------------------------

def stieltjes_parts(fam: FamilySpec) -> FamilySpec:
    """Coefficients of the Stieltjes problem attached to a symmetric family.

    a_0 = b_0^2, a_n = b_{2n}^2 + b_{2n-1}^2, b_n = b_{2n} b_{2n+1}, stated in
    terms of the symmetric family's coefficients on the right-hand sides.
    """
    if not fam.symmetric:
        raise DomainError("stieltjes_parts needs a symmetric family")

    def a(n: int, ctx: PrecisionContext) -> mpf:
        with ctx.workprec(16):
            if n == 0:
                val = fam.coeff_b(0, ctx) ** 2
            else:
                val = fam.coeff_b(2 * n, ctx) ** 2 \
                    + fam.coeff_b(2 * n - 1, ctx) ** 2
        with ctx.workprec():
            return +val

    def b(n: int, ctx: PrecisionContext) -> mpf:
        with ctx.workprec(16):
            val = fam.coeff_b(2 * n, ctx) * fam.coeff_b(2 * n + 1, ctx)
        with ctx.workprec():
            return +val

    b2 = None
    a_ex = None
    if fam.b2_exact is not None:
        def b2(n: int) -> Fraction:  # noqa: F811
            return fam.b2_exact(2 * n) * fam.b2_exact(2 * n + 1)

        def a_ex(n: int) -> Fraction:  # noqa: F811
            if n == 0:
                return fam.b2_exact(0)
            return fam.b2_exact(2 * n) + fam.b2_exact(2 * n - 1)

    return FamilySpec(id=fam.id + "_stieltjes", params=dict(fam.params),
                      symmetric=False, coeff_b=b, coeff_a=a,
                      rational_b2=fam.rational_b2, b2_exact=b2, a_exact=a_ex)


def shift_family(fam: FamilySpec, n0: int) -> FamilySpec:
    """Family with coefficients b_{n+n0}, a_{n+n0}; closed forms are dropped."""
    if n0 < 0:
        raise DomainError("shift must be nonnegative")
    if n0 == 0:
        return fam

    def b(n: int, ctx: PrecisionContext) -> mpf:
        return fam.coeff_b(n + n0, ctx)

    def a(n: int, ctx: PrecisionContext) -> mpf:
        return fam.coeff_a(n + n0, ctx)

    b2 = None
    if fam.b2_exact is not None:
        def b2(n: int) -> Fraction:  # noqa: F811
            return fam.b2_exact(n + n0)

    a_ex = None
    if fam.a_exact is not None:
        def a_ex(n: int) -> Fraction:  # noqa: F811
            return fam.a_exact(n + n0)

    return FamilySpec(id=f"{fam.id}_shift{n0}", params=dict(fam.params),
                      symmetric=fam.symmetric, coeff_b=b, coeff_a=a,
                      rational_b2=fam.rational_b2, b2_exact=b2, a_exact=a_ex)
