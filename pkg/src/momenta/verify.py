"""Numeric verification of the summability properties and the non-uniqueness
constructions.

Series classification is deliberately conservative: a verdict is only issued
when the trailing data supports it under the documented rules, and everything
else is reported as inconclusive.  The rules, with ``margin`` defaulting to
0.05:

  convergent   root exponent < 1 - margin (equivalently, certified geometric
               decay of the trailing terms)
  divergent    root exponent > 1 + margin, or root exponent within the margin
               band and fitted polynomial power p >= -1 (harmonic comparison),
               or a trailing window of 20 terms bounded below by a positive
               floor
  inconclusive everything else; in the band, p < -1.2 is always inconclusive
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from mpmath import mp, mpf

from .engine import (KernelMatrix, _solve_dense, _window_tail, b_rows,
                     TAIL_WINDOW)
from .errors import DomainError
from .families import FamilySpec
from .numerics import PrecisionContext, qpoch, to_mpf

_ZERO = mpf(0)


# ---------------------------------------------------------------------------
# series classification
# ---------------------------------------------------------------------------

@dataclass
class SeriesReport:
    terms: List[mpf]
    partial_sums: List[mpf]
    abs_partial_sums: List[mpf]
    root_exponent: Optional[mpf]       # geometric base fitted on trailing half
    root_stat: Optional[mpf]           # max |t_n|^(1/n) there (raw root test)
    power_fit: Optional[Tuple[mpf, mpf, mpf]]      # (C, rho, p)
    verdict: str                                   # convergent|divergent|inconclusive
    margin: float = 0.05
    note: str = ""


def classify_series(terms: Sequence, ctx: PrecisionContext,
                    margin: float = 0.05) -> SeriesReport:
    """Classify sum t_n from its computed terms (see module docstring)."""
    with ctx.workprec(16):
        ts = [to_mpf(t, ctx, 16) for t in terms]
        partial, absolute = [], []
        acc = _ZERO
        aac = _ZERO
        for t in ts:
            acc += t
            aac += abs(t)
            partial.append(acc)
            absolute.append(aac)
        N = len(ts) - 1
        lo = max(1, N // 2)
        window = [(n, abs(ts[n])) for n in range(lo, N + 1) if ts[n] != 0]
        root = None
        root_stat = None
        fit = None
        verdict = "inconclusive"
        note = ""
        if len(window) >= 8:
            root_stat = max(mp.power(t, mpf(1) / n) for n, t in window)
            # geometric fit: log|t_n| ~ a + n log(root)
            xs = [mpf(n) for n, _ in window]
            ys = [mp.log(t) for _, t in window]
            n_ = mpf(len(xs))
            sx = sum(xs); sy = sum(ys)
            sxx = sum(x * x for x in xs); sxy = sum(x * y for x, y in zip(xs, ys))
            slope = (n_ * sxy - sx * sy) / (n_ * sxx - sx * sx)
            root = mp.exp(slope)
            # three-parameter fit log t = log C + n log rho + p log n
            rows = [[mpf(1), x, mp.log(x)] for x in xs]
            ata = [[_ZERO] * 3 for _ in range(3)]
            atb = [_ZERO] * 3
            for r, y in zip(rows, ys):
                for i in range(3):
                    atb[i] += r[i] * y
                    for j in range(3):
                        ata[i][j] += r[i] * r[j]
            try:
                beta = _solve_dense(ata, atb)
                fit = (mp.exp(beta[0]), mp.exp(beta[1]), beta[2])
            except Exception:
                fit = None
            hi_band = 1 + margin
            lo_band = 1 - margin
            explicit_inconclusive = False
            if root > hi_band:
                verdict = "divergent"
                note = "root exponent above band"
            elif root < lo_band:
                verdict = "convergent"
                note = "root exponent below band"
            elif fit is not None:
                p = fit[2]
                if p >= -1:
                    verdict = "divergent"
                    note = "geometric part ~ 1 and fitted power >= -1"
                elif p < mpf(-12) / 10:
                    explicit_inconclusive = True
                    note = "geometric part ~ 1 and fitted power < -1.2"
                else:
                    note = "fitted power in (-1.2, -1)"
            # backstop for fits the power model cannot settle: terms that
            # stay above half the preceding window's median are not vanishing
            if (verdict == "inconclusive" and not explicit_inconclusive
                    and len(window) >= 40):
                tail20 = [t for _, t in window[-20:]]
                prev20 = sorted(t for _, t in window[-40:-20])
                floor = prev20[len(prev20) // 2] / 2
                if min(tail20) > floor:
                    verdict = "divergent"
                    note = "trailing window bounded below by a positive floor"
    with ctx.workprec():
        return SeriesReport(
            terms=[+t for t in ts], partial_sums=[+x for x in partial],
            abs_partial_sums=[+x for x in absolute],
            root_exponent=None if root is None else +root,
            root_stat=None if root_stat is None else +root_stat,
            power_fit=None if fit is None else tuple(+x for x in fit),
            verdict=verdict, margin=margin, note=note)


def cs_series(c_values: Sequence, moments: Sequence, N: int,
              ctx: PrecisionContext, margin: float = 0.05) -> SeriesReport:
    """Terms t_n = c_{2n} s_{2n}, n = 0..N."""
    if len(c_values) < 2 * N + 1 or len(moments) < 4 * N + 1:
        raise DomainError("need c through 2N and moments through 4N")
    with ctx.workprec(16):
        terms = [to_mpf(c_values[2 * n], ctx, 16)
                 * to_mpf(moments[2 * n], ctx, 16) for n in range(N + 1)]
    return classify_series(terms, ctx, margin)


def cs_star_series(c_values: Sequence, moments: Sequence, m: int, N: int,
                   ctx: PrecisionContext, margin: float = 0.05,
                   symmetric: bool = True) -> SeriesReport:
    """Terms of sum_l c_l |s_{l+m}|.

    For symmetric families the odd moments vanish and the series reduces to
    t_n = c_{2n-j} s_{2n} with j = m, n >= ceil(j/2); general families use
    the full l-indexed sum.
    """
    if symmetric:
        j = m
        start = (j + 1) // 2
        if len(c_values) < 2 * N - j + 1 or len(moments) < 4 * N + 1:
            raise DomainError("need c through 2N-j and moments through 4N")
        with ctx.workprec(16):
            terms = [to_mpf(c_values[2 * n - j], ctx, 16)
                     * to_mpf(moments[2 * n], ctx, 16)
                     for n in range(start, N + 1)]
        return classify_series(terms, ctx, margin)
    if len(c_values) < N + 1 or len(moments) < N + m + 1:
        raise DomainError("need c through N and moments through N+m")
    with ctx.workprec(16):
        terms = [to_mpf(c_values[l], ctx, 16)
                 * abs(to_mpf(moments[l + m], ctx, 16)) for l in range(N + 1)]
    return classify_series(terms, ctx, margin)


@dataclass
class DichotomyRow:
    c: object
    target: mpf                    # 4^(3/2-c)
    report: SeriesReport
    verdict: str                   # report verdict, or "withheld" at c = 3/2


def powerlaw_dichotomy(c_list: Sequence, N: int, ctx: PrecisionContext,
                       margin: float = 0.05,
                       order_factor: int = 16) -> List[DichotomyRow]:
    """Root-exponent study of sum c_{2n}(c) s_{2n}(c) for b_n = c^c (n+1)^c.

    The boundary c = 3/2 is reported without a verdict: the measured data is
    attached but no convergence claim is made for it.

    The B rows of these families have power-law tails that no reachable
    order certifies tightly, so c_k is taken from a single pass at
    order_factor * 2N columns without the doubling loop.  The k-dependent
    truncation bias shrinks with the order; the recorded order makes runs
    comparable.  Verdicts are robust (the measured statistics move away from
    1 as the order grows), while the raw root statistics for c != 3/2 settle
    strictly inside the one-sided bounds 4^(3/2-c) rather than on them.
    """
    from fractions import Fraction
    from .engine import c_seq, moments_jacobi
    from .families import make_family
    rows = []
    for c in c_list:
        cf = Fraction(c)
        if cf <= 1:
            raise DomainError("dichotomy needs c > 1")
        fam = make_family({"name": "powerlaw", "c": cf, "scaled": True})
        cs = c_seq(fam, 2 * N, ctx, n_start=order_factor * 2 * N,
                   allow_uncertified=True)
        mom = moments_jacobi(fam, 2 * N, ctx,
                             exact=fam.rational_b2 and (2 * cf).denominator == 1)
        rep = cs_series(cs.values, mom.moments, N, ctx, margin)
        with ctx.workprec():
            target = mp.power(4, to_mpf(Fraction(3, 2) - cf, ctx))
        verdict = "withheld" if cf == Fraction(3, 2) else rep.verdict
        if cf == Fraction(3, 2):
            rep.note += " (verdict withheld at the boundary exponent)"
        rows.append(DichotomyRow(c=cf, target=target, report=rep,
                                 verdict=verdict))
    return rows


# ---------------------------------------------------------------------------
# kernel-times-Hankel residuals
# ---------------------------------------------------------------------------

@dataclass
class ProductCheck:
    """Residuals of the kernel-matrix-times-Hankel identity."""

    i_max: int
    j_max: int
    residual: List[List[Optional[mpf]]]    # None when flagged inconclusive
    abs_sum: List[List[mpf]]
    tail: List[List[mpf]]                  # bound on the truncated k-tail
    kernel_err: List[List[mpf]]            # sum_k tail(a_{i,k}) |s_{k+j}|
    flags: List[List[str]]                 # ok | structural-zero | inconclusive


def aci_residuals(A: KernelMatrix, moments: Sequence, i_max: int, j_max: int,
                  ctx: PrecisionContext) -> ProductCheck:
    """residual_{i,j} = |sum_k a_{i,k} s_{k+j} - delta_{i,j}| with abs sums.

    Entries whose term sequence does not exhibit certified decay before the
    kernel order are flagged inconclusive instead of being reported as
    residuals.  Structurally zero terms (parity) are skipped.
    """
    K = A.order
    if len(moments) < K + j_max + 1:
        raise DomainError("need moments through K + j_max")
    with ctx.workprec(16):
        res: List[List[Optional[mpf]]] = []
        abss: List[List[mpf]] = []
        tails: List[List[mpf]] = []
        kerrs: List[List[mpf]] = []
        flags: List[List[str]] = []
        for i in range(i_max + 1):
            r_row, a_row, t_row, e_row, f_row = [], [], [], [], []
            for j in range(j_max + 1):
                acc = _ZERO
                aac = _ZERO
                kerr = _ZERO
                seq = []
                for k in range(K + 1):
                    a_ik = A.entry(i, k)
                    if a_ik == 0:
                        continue
                    s_kj = to_mpf(moments[k + j], ctx, 16)
                    term = a_ik * s_kj
                    if term == 0:
                        continue
                    seq.append(abs(term))
                    acc += term
                    aac += abs(term)
                    kerr += A.tail_bound(i, k) * abs(s_kj)
                if not seq:
                    r_row.append(_ZERO)
                    a_row.append(_ZERO)
                    t_row.append(_ZERO)
                    e_row.append(_ZERO)
                    f_row.append("structural-zero")
                    continue
                win = seq[-(TAIL_WINDOW // 2):]
                ok, bound = _window_tail(win, TAIL_WINDOW // 2)
                # the identity compares against the unit matrix, so kernel
                # tails feeding in at the percent level make the residual
                # meaningless
                if not ok or not kerr <= mpf(1) / 100:
                    r_row.append(None)
                    a_row.append(aac)
                    t_row.append(mpf("inf"))
                    e_row.append(kerr)
                    f_row.append("inconclusive")
                    continue
                delta = mpf(1) if i == j else _ZERO
                r_row.append(abs(acc - delta))
                a_row.append(aac)
                t_row.append(bound)
                e_row.append(kerr)
                f_row.append("ok")
            res.append(r_row)
            abss.append(a_row)
            tails.append(t_row)
            kerrs.append(e_row)
            flags.append(f_row)
    with ctx.workprec():
        return ProductCheck(
            i_max=i_max, j_max=j_max,
            residual=[[None if x is None else +x for x in r] for r in res],
            abs_sum=[[+x for x in r] for r in abss],
            tail=[[+x for x in r] for r in tails],
            kernel_err=[[+x for x in r] for r in kerrs],
            flags=flags)


def trace_identity_check(fam: FamilySpec, K: int, N: int,
                         ctx: PrecisionContext) -> Tuple[mpf, mpf, mpf]:
    """Kernel trace against the circle average of the polynomial square sums.

    lhs = sum_{k<=K} c_k^2 (row sums of B through order N); rhs is the
    trapezoid value of (1/2pi) int_0^{2pi} sum_{n<=N} |P_n(e^it)|^2 dt on
    2(N+1) equispaced nodes, which integrates the trigonometric polynomial
    exactly.  Returns (lhs, rhs, gap); at K = N the gap is pure rounding plus
    the shared row tails.
    """
    if K > N:
        raise DomainError("K must not exceed N")
    rows = b_rows(fam, N, N, ctx)
    with ctx.workprec(32):
        lhs = _ZERO
        for k in range(K + 1):
            for n in range(k, N + 1):
                lhs += rows.rows[k][n] ** 2
        M = 2 * (N + 1)
        two_pi = 2 * mp.pi
        rhs = _ZERO
        for jj in range(M):
            t = two_pi * jj / M
            cos_t = [mp.cos(k * t) for k in range(N + 1)]
            sin_t = [mp.sin(k * t) for k in range(N + 1)]
            node = _ZERO
            for n in range(N + 1):
                re = _ZERO
                im = _ZERO
                for k in range(n + 1):
                    bkn = rows.rows[k][n]
                    if bkn != 0:
                        re += bkn * cos_t[k]
                        im += bkn * sin_t[k]
                node += re * re + im * im
            rhs += node
        rhs /= M
        gap = abs(lhs - rhs)
    with ctx.workprec():
        return +lhs, +rhs, +gap


# ---------------------------------------------------------------------------
# non-uniqueness constructions
# ---------------------------------------------------------------------------

@dataclass
class NullVector:
    """Sequence v with H v = 0 absolutely convergent, for the moment sequence
    s_n = q^(-n^2/2); the first k entries take prescribed values."""

    q: object
    init: List[mpf]
    poly: List[mpf]                # c_0..c_{k-1} of the generating polynomial

    def value(self, n: int, ctx: PrecisionContext) -> mpf:
        """v_n = q^(n^2/2) * sum_{j<=min(n,k-1)} c_j (-1)^(n-j)
        q^binom(n-j,2) / (q;q)_{n-j}."""
        with ctx.workprec(32):
            qq = to_mpf(self.q, ctx, 32)
            acc = _ZERO
            for j in range(min(n, len(self.poly) - 1) + 1):
                d = n - j
                term = self.poly[j] * mp.power(qq, mpf(d * (d - 1)) / 2) \
                    / qpoch(self.q, self.q, d, ctx.with_bits(ctx.bits + 32))
                if d % 2 == 1:
                    term = -term
                acc += term
            out = mp.power(qq, mpf(n * n) / 2) * acc
        with ctx.workprec():
            return +out

    def values(self, n_max: int, ctx: PrecisionContext) -> List[mpf]:
        return [self.value(n, ctx) for n in range(n_max + 1)]


def null_vector(q, init: Sequence, ctx: PrecisionContext) -> NullVector:
    """Solve the unit lower-triangular system v_i = init_i, i < k, for the
    polynomial coefficients of the annihilating sequence."""
    from fractions import Fraction
    qf = Fraction(q) if not isinstance(q, mpf) else q
    if not (0 < qf < 1):
        raise DomainError("null_vector needs q in (0,1)")
    k = len(init)
    if k < 1:
        raise DomainError("need at least one prescribed value")
    with ctx.workprec(32):
        qq = to_mpf(qf, ctx, 32)
        init_mp = [to_mpf(x, ctx, 32) for x in init]
        poly: List[mpf] = []
        for i in range(k):
            acc = init_mp[i] * mp.power(qq, -mpf(i * i) / 2)
            for j in range(i):
                d = i - j
                term = poly[j] * mp.power(qq, mpf(d * (d - 1)) / 2) \
                    / qpoch(qf, qf, d, ctx.with_bits(ctx.bits + 32))
                if d % 2 == 1:
                    term = -term
                acc -= term
            poly.append(acc)
    with ctx.workprec():
        return NullVector(q=qf, init=[+x for x in init_mp],
                          poly=[+x for x in poly])


@dataclass
class NullResidualRow:
    m: int
    residual: mpf
    abs_sum: mpf
    tail: mpf
    n_used: int


def null_residuals(q, nv: NullVector, m_max: int,
                   ctx: PrecisionContext) -> List[NullResidualRow]:
    """Rows of |sum_n s_{m+n} v_n| for m = 0..m_max with certified tails.

    The terms s_{m+n} v_n eventually decay faster than geometrically; the
    truncation index is chosen so the window-certified tail bound drops below
    eps_tail times the absolute sum.
    """
    from fractions import Fraction
    qf = Fraction(q)
    rows = []
    with ctx.workprec(32):
        qq = to_mpf(qf, ctx, 32)
        eps = mpf(ctx.eps_tail)
        k = len(nv.poly)
        for m in range(m_max + 1):
            acc = _ZERO
            aac = _ZERO
            window: List[mpf] = []
            n = 0
            bound = mpf("inf")
            while n <= ctx.max_terms:
                s_mn = mp.power(qq, -mpf((m + n) ** 2) / 2)
                term = s_mn * nv.value(n, ctx.with_bits(ctx.bits + 32))
                acc += term
                aac += abs(term)
                window.append(abs(term))
                if len(window) > TAIL_WINDOW // 2:
                    window.pop(0)
                if n > m + k + TAIL_WINDOW // 2:
                    ok, bound = _window_tail(window, TAIL_WINDOW // 2)
                    if ok and bound <= eps * aac:
                        break
                n += 1
            rows.append(NullResidualRow(m=m, residual=abs(acc), abs_sum=aac,
                                        tail=bound, n_used=n))
    with ctx.workprec():
        return [NullResidualRow(m=r.m, residual=+r.residual,
                                abs_sum=+r.abs_sum, tail=+r.tail,
                                n_used=r.n_used) for r in rows]


@dataclass
class Annihilator:
    """Leading K x K block of a symmetric matrix M with H M ~ 0."""

    q: object
    order: int
    block: List[List[mpf]]
    columns: List[NullVector]
    residuals: List[List[NullResidualRow]]

    def symmetry_gap(self) -> mpf:
        worst = _ZERO
        for i in range(self.order):
            for j in range(i):
                worst = max(worst, abs(self.block[i][j] - self.block[j][i]))
        return worst


def symmetric_annihilator(q, K: int, ctx: PrecisionContext,
                          m_max: int = 8) -> Annihilator:
    """Build K columns of the symmetric annihilator: column j is the null
    vector whose first j entries are copied from the rows already fixed,
    which enforces symmetry of the leading block by construction."""
    if K < 1:
        raise DomainError("K must be >= 1")
    columns: List[NullVector] = []
    cols_vals: List[List[mpf]] = []
    for j in range(K):
        if j == 0:
            init = [mpf(1)]
        else:
            init = [cols_vals[i][j] for i in range(j)]
        nv = null_vector(q, init, ctx)
        columns.append(nv)
        cols_vals.append(nv.values(max(K, m_max) + 1, ctx))
    block = [[cols_vals[j][i] for j in range(K)] for i in range(K)]
    residuals = [null_residuals(q, nv, m_max, ctx) for nv in columns]
    return Annihilator(q=q, order=K, block=block, columns=columns,
                       residuals=residuals)


# ---------------------------------------------------------------------------
# boundedness probe
# ---------------------------------------------------------------------------

def boundedness_probe(seq: Sequence, label: str = "") -> Tuple[List[mpf], bool]:
    """Running maxima of a sequence plus a stabilization flag: stabilized when
    the running max grows by less than 1% over the trailing half."""
    if len(seq) < 40:
        raise DomainError("probe needs at least 40 values")
    vals = [mpf(x) if not isinstance(x, mpf) else x for x in seq]
    run = []
    cur = vals[0]
    for x in vals:
        cur = max(cur, x)
        run.append(cur)
    mid = run[len(run) // 2]
    stabilized = bool(run[-1] <= mid * mpf("1.01"))
    return run, stabilized
