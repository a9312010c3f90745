"""Core constructions on a moment-problem family.

Builds the change-of-basis matrices between monomials and orthonormal
polynomials (B holds polynomial coefficients, C its inverse), the Hankel block
of moments, the kernel coefficient matrix A = B B^t with per-entry tail
bounds, the diagnostic tables u_{n,k} / v_{k,l} with their row norms U_n / V_k,
the diagonal roots c_k, and the finite-section inverse used as an independent
elimination oracle.

Conventions.  Matrices are stored column-major: ``cols[n][k]`` is the entry in
row k of column n, defined for k <= n.  For a symmetric family the entries
with n - k odd vanish identically and are stored as exact zeros.  Row tails of
B are certified by the trailing-window rule: the last ``TAIL_WINDOW`` nonzero
squared entries must be positive and decreasing with ratio r < 1, and the tail
is then bounded by last * r / (1 - r).  That rule is geometric; families whose
rows decay like a power of the index get an honest *estimate* flagged
``certified=False`` unless the bound still clears the requested tolerance.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, Tuple

from mpmath import mp, mpf

from .errors import (DomainError, NoConvergence, SingularMatrix,
                     SymmetryViolation)
from .families import FamilySpec
from .numerics import PrecisionContext, to_mpf

TAIL_WINDOW = 16

_ZERO = mpf(0)


# ---------------------------------------------------------------------------
# coefficient caches
# ---------------------------------------------------------------------------

class _Coeffs:
    """Memoized a_n, b_n values of a family at fixed precision."""

    def __init__(self, fam: FamilySpec, ctx: PrecisionContext, extra: int = 32):
        self.fam = fam
        self.ctx = ctx
        self.extra = extra
        self._b: List[mpf] = []
        self._a: List[mpf] = []

    def b(self, n: int) -> mpf:
        while len(self._b) <= n:
            val = self.fam.coeff_b(len(self._b), self.ctx)
            if not val > 0:
                raise DomainError(
                    f"b_{len(self._b)} = {val} must be positive")
            self._b.append(val)
        return self._b[n]

    def a(self, n: int) -> mpf:
        while len(self._a) <= n:
            self._a.append(self.fam.coeff_a(len(self._a), self.ctx))
        return self._a[n]


# ---------------------------------------------------------------------------
# triangular matrices
# ---------------------------------------------------------------------------

@dataclass
class TriMatrix:
    """Upper-triangular coefficient matrix of order N (columns 0..N)."""

    order: int
    kind: str                      # "B" or "C"
    cols: List[List[mpf]]
    crosscheck_residual: Optional[mpf] = None

    def entry(self, k: int, n: int) -> mpf:
        if k < 0 or k > n or n > self.order:
            return _ZERO
        return self.cols[n][k]

    def row(self, k: int) -> List[mpf]:
        return [self.cols[n][k] for n in range(k, self.order + 1)]


def _build_b_columns(coeffs: _Coeffs, N: int, K: Optional[int],
                     ctx: PrecisionContext, extra: int = 32) -> List[List[mpf]]:
    """Columns of B up to order N, rows truncated at K when given.

    Column recursion from x P_n = b_n P_{n+1} + a_n P_n + b_{n-1} P_{n-1}:
        b_{k,n+1} = (b_{k-1,n} - a_n b_{k,n} - b_{n-1} b_{k,n-1}) / b_n.
    """
    with ctx.workprec(extra):
        cols = [[mpf(1)]]
        if N == 0:
            return cols
        prev2: List[mpf] = []
        prev = cols[0]
        for n in range(N):
            bn = coeffs.b(n)
            an = coeffs.a(n)
            bn1 = coeffs.b(n - 1) if n >= 1 else mpf(1)
            top = n + 1 if K is None else min(n + 1, K)
            col = []
            for k in range(top + 1):
                val = prev[k - 1] if 1 <= k <= n + 1 and k - 1 < len(prev) else _ZERO
                if an != 0 and k < len(prev):
                    val = val - an * prev[k]
                if n >= 1 and k < len(prev2):
                    val = val - bn1 * prev2[k]
                col.append(val / bn)
            cols.append(col)
            prev2, prev = prev, col
        return cols


def build_B(fam: FamilySpec, N: int, ctx: PrecisionContext) -> TriMatrix:
    """Polynomial coefficient matrix: column n holds the coefficients of the
    degree-n orthonormal polynomial.

    When the family carries closed-form coefficients those are used and the
    recursion is kept as a cross-check (max absolute deviation recorded).
    """
    if N < 0:
        raise DomainError("order must be nonnegative")
    coeffs = _Coeffs(fam, ctx)
    cols = _build_b_columns(coeffs, N, None, ctx)
    residual = None
    if fam.known_poly_coeff is not None:
        with ctx.workprec(32):
            closed = [[fam.known_poly_coeff(k, n, ctx) for k in range(n + 1)]
                      for n in range(N + 1)]
            residual = _ZERO
            for n in range(N + 1):
                for k in range(n + 1):
                    residual = max(residual, abs(closed[n][k] - cols[n][k]))
        cols = closed
    with ctx.workprec():
        cols = [[+x for x in col] for col in cols]
        return TriMatrix(order=N, kind="B", cols=cols,
                         crosscheck_residual=residual)


def build_C(fam: FamilySpec, N: int, ctx: PrecisionContext) -> TriMatrix:
    """Monomial expansion matrix: column n expands x^n over the orthonormal
    polynomials, via c_{j,n+1} = b_{j-1} c_{j-1,n} + a_j c_{j,n} + b_j c_{j+1,n}.
    """
    if N < 0:
        raise DomainError("order must be nonnegative")
    coeffs = _Coeffs(fam, ctx)
    with ctx.workprec(32):
        cols = [[mpf(1)]]
        prev = cols[0]
        for n in range(N):
            col = []
            for j in range(n + 2):
                val = _ZERO
                if 1 <= j and j - 1 < len(prev):
                    val = val + coeffs.b(j - 1) * prev[j - 1]
                if j < len(prev):
                    aj = coeffs.a(j)
                    if aj != 0:
                        val = val + aj * prev[j]
                if j + 1 < len(prev):
                    val = val + coeffs.b(j) * prev[j + 1]
                col.append(val)
            cols.append(col)
            prev = col
    with ctx.workprec():
        cols = [[+x for x in col] for col in cols]
        return TriMatrix(order=N, kind="C", cols=cols)


def residual_BC(B: TriMatrix, C: TriMatrix, ctx: PrecisionContext) -> mpf:
    """max over the (N+1) x (N+1) block of |(B C - I)_{i,j}| scaled by the
    absolute-sum size of the entry, max(1, sum_k |b_{i,k} c_{k,j}|).

    The finite triangular sums cancel from magnitudes as large as
    sqrt(s_{2N}), so the raw difference only measures that scale times the
    input rounding; dividing by the per-entry scale turns the number into
    "rounding units", comparable across families of wildly different moment
    growth.
    """
    if B.order != C.order:
        raise DomainError("orders differ")
    N = B.order
    with ctx.workprec(32):
        worst = _ZERO
        for i in range(N + 1):
            for j in range(i, N + 1):
                acc = _ZERO
                mag = _ZERO
                for k in range(i, j + 1):
                    t = B.entry(i, k) * C.entry(k, j)
                    acc += t
                    mag += abs(t)
                if i == j:
                    acc -= 1
                worst = max(worst, abs(acc) / max(mag, mpf(1)))
    with ctx.workprec():
        return +worst


# ---------------------------------------------------------------------------
# moments
# ---------------------------------------------------------------------------

@dataclass
class HankelBlock:
    """Moments s_0..s_{2N}; the Hankel view is h(m, n) = s_{m+n}."""

    moments: List[mpf]
    exact: Optional[List[Fraction]] = None

    @property
    def order(self) -> int:
        return (len(self.moments) - 1) // 2

    def h(self, m: int, n: int) -> mpf:
        return self.moments[m + n]


def hankel_from_C(C: TriMatrix, ctx: PrecisionContext) -> HankelBlock:
    """Moments through s_{2N} from the factorization of the Hankel matrix
    into C^t C; each s_j is a finite sum of products of C entries."""
    N = C.order
    with ctx.workprec(32):
        moments = []
        for j in range(2 * N + 1):
            m = j // 2
            n = j - m
            acc = _ZERO
            for k in range(min(m, n) + 1):
                acc += C.entry(k, m) * C.entry(k, n)
            moments.append(acc)
    with ctx.workprec():
        return HankelBlock(moments=[+x for x in moments])


def moments_jacobi(fam: FamilySpec, n_max: int, ctx: PrecisionContext,
                   exact: bool = False) -> HankelBlock:
    """Moments s_0..s_{2 n_max} by vector iteration with the Jacobi matrix.

    exact mode (symmetric families with rational b_n^2 only) runs the rescaled
    recursion y'_k = b_k^2 y_{k+1} + y_{k-1} in exact rational arithmetic and
    reads off s_{2n} as sum_k (b_0^2 ... b_{k-1}^2) y_k^2.
    """
    if exact:
        if not (fam.symmetric and fam.rational_b2 and fam.b2_exact):
            raise DomainError("exact moments need a symmetric family "
                              "with rational b_n^2")
        b2 = [fam.b2_exact(i) for i in range(n_max + 1)]
        prefix = [Fraction(1)]
        for i in range(n_max):
            prefix.append(prefix[-1] * b2[i])
        y = [Fraction(1)]
        exact_moments: List[Fraction] = [Fraction(1), Fraction(0)]
        for n in range(1, n_max + 1):
            new = []
            for k in range(len(y) + 1):
                val = Fraction(0)
                if k + 1 < len(y):
                    val += b2[k] * y[k + 1]
                if 0 <= k - 1 < len(y):
                    val += y[k - 1]
                new.append(val)
            y = new
            s2n = sum(prefix[k] * y[k] * y[k] for k in range(len(y)))
            exact_moments.append(s2n)
            exact_moments.append(Fraction(0))
        exact_moments = exact_moments[: 2 * n_max + 1]
        with ctx.workprec():
            vals = [to_mpf(s, ctx) for s in exact_moments]
        return HankelBlock(moments=vals, exact=exact_moments)

    coeffs = _Coeffs(fam, ctx)
    with ctx.workprec(64):
        w = [mpf(1)]
        moments = [mpf(1)]
        if fam.symmetric:
            moments.append(_ZERO)
        else:
            moments.append(coeffs.a(0))
        for n in range(1, n_max + 1):
            new = []
            for k in range(len(w) + 1):
                val = _ZERO
                if k + 1 < len(w):
                    val += coeffs.b(k) * w[k + 1]
                if 0 <= k - 1 < len(w):
                    val += coeffs.b(k - 1) * w[k - 1]
                if k < len(w):
                    ak = coeffs.a(k)
                    if ak != 0:
                        val += ak * w[k]
                new.append(val)
            w = new
            s2n = _ZERO
            for x in w:
                s2n += x * x
            moments.append(s2n)
            if fam.symmetric:
                moments.append(_ZERO)
            else:
                s_odd = _ZERO
                for k in range(len(w)):
                    s_odd += coeffs.a(k) * w[k] * w[k]
                    if k + 1 < len(w):
                        s_odd += 2 * coeffs.b(k) * w[k] * w[k + 1]
                moments.append(s_odd)
        moments = moments[: 2 * n_max + 1]
    with ctx.workprec():
        return HankelBlock(moments=[+x for x in moments])


# ---------------------------------------------------------------------------
# u and v tables
# ---------------------------------------------------------------------------

@dataclass
class UVTables:
    """Diagnostic tables; fields are filled by u_table / v_table."""

    u: Optional[List[List[mpf]]] = None
    U: Optional[Sequence] = None
    U_exact: Optional[List[Fraction]] = None
    v: Optional[List[List[mpf]]] = None
    V: Optional[List[mpf]] = None
    v_tail: Optional[List[mpf]] = None
    v_certified: Optional[List[bool]] = None
    v_columns: int = 0


def u_table(fam: FamilySpec, N: int, ctx: PrecisionContext,
            exact: bool = False) -> UVTables:
    """Table u_{n,k} for 0 <= k <= n/2 <= N/2 plus U_n = sum_k u_{n,k}^2.

    The recursion u_{n+1,k} = (b_{n-2k}/b_n) u_{n,k} + (b_{n+1-2k}/b_n) u_{n,k-1}
    (with b_m = 0 for m < 0) runs in floating point; exact mode instead tracks
    w_{n,k} = u_{n,k} * b_{n-2k} ... b_{n-1}, which satisfies the rational
    recursion w_{n+1,k} = w_{n,k} + b_{n+1-2k}^2 w_{n,k-1}.
    """
    if not fam.symmetric:
        raise DomainError("u_table needs a symmetric family")
    if exact:
        if not (fam.rational_b2 and fam.b2_exact):
            raise DomainError("exact u_table needs rational b_n^2")
        b2 = [fam.b2_exact(i) for i in range(N + 1)]
        prefix = [Fraction(1)]
        for i in range(N):
            prefix.append(prefix[-1] * b2[i])
        w_row = [Fraction(1)]
        U_exact = [Fraction(1)]
        for n in range(N):
            nxt = []
            for k in range((n + 1) // 2 + 1):
                val = w_row[k] if k < len(w_row) else Fraction(0)
                if k >= 1 and n + 1 - 2 * k >= 0 and k - 1 < len(w_row):
                    val += b2[n + 1 - 2 * k] * w_row[k - 1]
                nxt.append(val)
            w_row = nxt
            n1 = n + 1
            Un = Fraction(0)
            for k in range(len(w_row)):
                Un += w_row[k] ** 2 * prefix[n1 - 2 * k] / prefix[n1]
            U_exact.append(Un)
        with ctx.workprec():
            U = [to_mpf(x, ctx) for x in U_exact]
        return UVTables(U=U, U_exact=U_exact)

    coeffs = _Coeffs(fam, ctx)
    with ctx.workprec(32):
        rows = [[mpf(1)]]
        U = [mpf(1)]
        row = rows[0]
        for n in range(N):
            bn = coeffs.b(n)
            nxt = []
            for k in range((n + 1) // 2 + 1):
                val = _ZERO
                if k < len(row) and n - 2 * k >= 0:
                    val += coeffs.b(n - 2 * k) / bn * row[k]
                if k >= 1 and k - 1 < len(row) and n + 1 - 2 * k >= 0:
                    val += coeffs.b(n + 1 - 2 * k) / bn * row[k - 1]
                nxt.append(val)
            rows.append(nxt)
            row = nxt
            acc = _ZERO
            for x in row:
                acc += x * x
            U.append(acc)
    with ctx.workprec():
        return UVTables(u=[[+x for x in r] for r in rows], U=[+x for x in U])


def _carleman_gate(coeffs: _Coeffs, ctx: PrecisionContext) -> None:
    """Cheap plausibility check that sum 1/b_n converges numerically.

    Fits the decay power of 1/b_n on a dyadic window; a fitted power above -1
    means the partial sums show no numerical convergence and the family looks
    determinate, in which case the v-recursion cannot be truncated.
    """
    with ctx.workprec(32):
        n1, n2 = 64, 128
        inc1 = 1 / coeffs.b(n1)
        inc2 = 1 / coeffs.b(n2)
        if inc2 == 0:
            return
        p_hat = mp.log(inc2 / inc1) / mp.log(mpf(n2) / n1)
        if p_hat > mpf(-105) / 100:
            raise NoConvergence(
                "1/b_n decays like n^%s; the recurrence looks determinate "
                "and the v-table tail cannot be certified" % mp.nstr(p_hat, 4))


def v_table(fam: FamilySpec, K: int, ctx: PrecisionContext,
            keep_table: bool = False, l_cap: Optional[int] = None,
            best_effort: bool = False) -> UVTables:
    """Table v_{k,l} for k <= K with V_k = (sum_l v_{k,l}^2)^(1/2).

    Columns are generated from
        v_{k+1,l} = (b_k/b_{k+2l}) v_{k,l} + (b_{k+2l-1}/b_{k+2l}) v_{k+1,l-1}
    seeded by v_{k,0} = 1 and the closed form for v_{0,l}.  Column generation
    stops when every row's trailing window certifies a relative tail below
    ctx.eps_tail, and raises NoConvergence when ctx.max_terms (or l_cap)
    columns do not reach that point.  best_effort=True instead returns the
    partial table at the cap; rows whose tail is certified are flagged, and
    V_k under-reports by at most the uncertified tail (the terms are
    positive), which growth-exponent studies can absorb.
    """
    if not fam.symmetric:
        raise DomainError("v_table needs a symmetric family")
    coeffs = _Coeffs(fam, ctx)
    _carleman_gate(coeffs, ctx)
    limit = l_cap if l_cap is not None else ctx.max_terms
    with ctx.workprec(32):
        eps = mpf(ctx.eps_tail)
        col = [mpf(1)] * (K + 1)
        V2 = [mpf(1)] * (K + 1)
        table = [list(col)] if keep_table else None
        windows: List[List[mpf]] = [[] for _ in range(K + 1)]
        certified = [False] * (K + 1)
        tail = [mpf(0)] * (K + 1)
        l = 0
        while l < limit:
            l += 1
            new = [_ZERO] * (K + 1)
            new[0] = col[0] * coeffs.b(2 * l - 2) / coeffs.b(2 * l - 1)
            for k in range(K):
                denom = coeffs.b(k + 2 * l)
                new[k + 1] = (coeffs.b(k) * new[k]
                              + coeffs.b(k + 2 * l - 1) * col[k + 1]) / denom
            col = new
            if keep_table:
                table.append(list(col))
            done = True
            for k in range(K + 1):
                sq = col[k] * col[k]
                V2[k] += sq
                win = windows[k]
                win.append(sq)
                if len(win) > TAIL_WINDOW:
                    win.pop(0)
                ok, bound = _window_tail(win, TAIL_WINDOW)
                certified[k] = ok and bound <= eps * V2[k]
                tail[k] = bound
                if not certified[k]:
                    done = False
            if done and l >= TAIL_WINDOW:
                break
        else:
            if not best_effort:
                raise NoConvergence(
                    f"v-table tails not certified within {limit} columns",
                    value=None, error=None)
        V = [mp.sqrt(x) for x in V2]
    with ctx.workprec():
        return UVTables(v=table, V=[+x for x in V],
                        v_tail=[+x for x in tail],
                        v_certified=certified, v_columns=l)


def _window_tail(win: List[mpf], size: int) -> Tuple[bool, mpf]:
    """Geometric tail bound from a trailing window of positive terms.

    Requires a full window, all positive and nonincreasing, with worst ratio
    r < 1; the remainder is then bounded by last * r / (1 - r).
    """
    if len(win) < size:
        return False, mpf("inf")
    r = _ZERO
    for i in range(1, len(win)):
        if not (win[i] > 0) or win[i] > win[i - 1]:
            return False, mpf("inf")
        r = max(r, win[i] / win[i - 1])
    if r >= 1:
        return False, mpf("inf")
    return True, win[-1] * r / (1 - r)


# ---------------------------------------------------------------------------
# B rows, c_k, and the kernel matrix
# ---------------------------------------------------------------------------

@dataclass
class BRows:
    """First R+1 rows of B computed out to column N by streaming columns."""

    rows: List[List[mpf]]          # rows[k][n] holds b_{k,n} for n <= N
    order: int                     # N
    top: int                       # R


def b_rows(fam: FamilySpec, R: int, N: int, ctx: PrecisionContext) -> BRows:
    """Stream columns of B keeping only rows 0..R (cost O(R N))."""
    coeffs = _Coeffs(fam, ctx)
    with ctx.workprec(32):
        cols = _build_b_columns(coeffs, N, R, ctx)
        rows = [[cols[n][k] if k < len(cols[n]) else _ZERO
                 for n in range(N + 1)] for k in range(R + 1)]
    return BRows(rows=rows, order=N, top=R)


@dataclass
class CSeq:
    """Diagonal roots c_k with their tail metadata."""

    values: List[mpf]
    tail: List[mpf]                # bound on the neglected part of c_k^2
    certified: List[bool]
    order_used: int
    crosscheck_gap: Optional[mpf] = None      # vs the v-table route


def _row_tail(row: Sequence[mpf], k: int) -> Tuple[bool, mpf, mpf]:
    """Partial sum of squares of a B row plus its trailing-window bound."""
    sq = [x * x for x in row if x != 0]
    total = _ZERO
    for t in sq:
        total += t
    ok, bound = _window_tail(sq[-TAIL_WINDOW:], TAIL_WINDOW)
    return ok, bound, total


def c_seq(fam: FamilySpec, K: int, ctx: PrecisionContext,
          source: str = "auto", n_start: Optional[int] = None,
          allow_uncertified: bool = False) -> CSeq:
    """c_k = (sum_n b_{k,n}^2)^(1/2) for k <= K from the rows of B.

    The row sums are truncated once the trailing window certifies a geometric
    tail; the B order starts at max(4K, K + 64) and doubles (up to max_terms)
    while any row stays uncertified.  ``allow_uncertified=True`` skips the
    doubling and returns the single-pass values with their per-row flags
    (families with power-law row tails cannot certify tight tolerances at
    any reachable order; slope-based consumers tolerate the smooth bias).
    For symmetric families the v-table route c_k = V_k / (b_0 ... b_{k-1})
    is evaluated as a capped cross-check, and the worst disagreement over
    the rows both routes certify is recorded.
    """
    if source not in ("auto", "b"):
        raise DomainError("source must be 'auto' or 'b'")
    N = n_start if n_start is not None else max(4 * K, K + 64)
    with ctx.workprec(32):
        eps = mpf(ctx.eps_tail)
        while True:
            rows = b_rows(fam, K, N, ctx)
            values, tails, certs = [], [], []
            all_ok = True
            for k in range(K + 1):
                ok, bound, total = _row_tail(rows.rows[k], k)
                good = ok and bound <= eps * total
                all_ok = all_ok and good
                values.append(mp.sqrt(total))
                tails.append(bound)
                certs.append(good)
            if all_ok or allow_uncertified or 2 * N > ctx.max_terms:
                break
            N *= 2
        gap = None
        if source == "auto" and fam.symmetric and all_ok:
            try:
                vt = v_table(fam, K, ctx, l_cap=min(ctx.max_terms, 4 * N))
                coeffs = _Coeffs(fam, ctx)
                prod = mpf(1)
                gap = _ZERO
                for k in range(K + 1):
                    alt = vt.V[k] / prod
                    gap = max(gap, abs(alt - values[k])
                              / max(values[k], mpf(2) ** (-ctx.bits)))
                    prod *= coeffs.b(k)
            except NoConvergence:
                gap = None
    with ctx.workprec():
        return CSeq(values=[+x for x in values], tail=[+x for x in tails],
                    certified=certs, order_used=N,
                    crosscheck_gap=None if gap is None else +gap)


@dataclass
class KernelMatrix:
    """Symmetric kernel coefficient matrix a_{k,l} with tail metadata."""

    order: int
    entries: List[List[mpf]]       # lower-triangular: entries[k][l], l <= k
    tail: List[List[mpf]]
    certified: List[List[bool]]
    method: str = "bound"

    def entry(self, k: int, l: int) -> mpf:
        if l > k:
            k, l = l, k
        return self.entries[k][l]

    def tail_bound(self, k: int, l: int) -> mpf:
        if l > k:
            k, l = l, k
        return self.tail[k][l]

    def diag(self) -> List[mpf]:
        return [self.entries[k][k] for k in range(self.order + 1)]


def _zeta_tail(s: mpf, m0: int) -> mpf:
    """sum_{m > m0} m^(-s) by Euler-Maclaurin (s > 1)."""
    K = 16
    acc = _ZERO
    for m in range(m0 + 1, m0 + K):
        acc += mp.power(mpf(m), -s)
    x = mpf(m0 + K)
    acc += mp.power(x, 1 - s) / (s - 1)
    acc += mp.power(x, -s) / 2
    # Bernoulli corrections B_2/2! s x^{-s-1}, ...
    acc += s * mp.power(x, -s - 1) / 12
    acc -= s * (s + 1) * (s + 2) * mp.power(x, -s - 3) / 720
    acc += s * (s + 1) * (s + 2) * (s + 3) * (s + 4) * mp.power(x, -s - 5) / 30240
    return acc


def _fit_power_tail(terms: List[mpf], m_of: Callable[[int], int],
                    p0: mpf, step: mpf, n_coeff: int,
                    ctx: PrecisionContext, samples: int = 256) -> mpf:
    """Tail of sum t_m assuming t_m ~ m^(-p0) sum_j g_j m^(-j*step).

    Coefficients are fit by least squares on (a subsample of) the trailing
    half of ``terms`` (index i maps to m = m_of(i)); the remainder past the
    last computed m is then summed with Euler-Maclaurin zeta tails.
    """
    n = len(terms)
    lo = n // 2
    stride = max(1, (n - lo) // samples)
    idx = list(range(lo, n, stride))
    if idx[-1] != n - 1:
        idx.append(n - 1)
    last_m = m_of(n - 1)
    with ctx.workprec(64):
        ata = [[_ZERO] * n_coeff for _ in range(n_coeff)]
        atb = [_ZERO] * n_coeff
        for i in idx:
            m = mpf(m_of(i))
            x = mp.power(m, -step)
            base = mp.power(m, -p0)
            basis = []
            for _ in range(n_coeff):
                basis.append(base)
                base *= x
            y = terms[i]
            for a_i in range(n_coeff):
                atb[a_i] += basis[a_i] * y
                row_a = ata[a_i]
                va = basis[a_i]
                for b_i in range(a_i, n_coeff):
                    row_a[b_i] += va * basis[b_i]
        for a_i in range(n_coeff):
            for b_i in range(a_i):
                ata[a_i][b_i] = ata[b_i][a_i]
        coef = _solve_dense(ata, atb)
        tail = _ZERO
        for j in range(n_coeff):
            tail += coef[j] * _zeta_tail(p0 + j * step, last_m)
        return tail


def _solve_dense(A: List[List[mpf]], b: List[mpf]) -> List[mpf]:
    """Gaussian elimination with partial pivoting on small dense systems."""
    n = len(b)
    M = [row[:] + [b[i]] for i, row in enumerate(A)]
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(M[r][col]))
        if M[piv][col] == 0:
            raise SingularMatrix("vanishing pivot in dense solve")
        M[col], M[piv] = M[piv], M[col]
        inv = 1 / M[col][col]
        for r in range(col + 1, n):
            f = M[r][col] * inv
            if f != 0:
                for cc in range(col, n + 1):
                    M[r][cc] -= f * M[col][cc]
    x = [_ZERO] * n
    for r in range(n - 1, -1, -1):
        acc = M[r][n]
        for cc in range(r + 1, n):
            acc -= M[r][cc] * x[cc]
        x[r] = acc / M[r][r]
    return x


def build_A(B: BRows, K: int, ctx: PrecisionContext,
            tail_fit: Optional[dict] = None,
            strict: bool = True) -> KernelMatrix:
    """Kernel matrix a_{k,l} = sum_n b_{k,n} b_{l,n} from precomputed rows.

    Default tails come from the Cauchy-Schwarz product of the row tail
    bounds.  ``tail_fit={"p0": .., "step": .., "coeffs": ..}`` instead adds an
    extrapolated remainder for power-law rows (the term sequence is fit to
    m^(-p0) * sum_j g_j m^(-j*step) on its trailing half and the remainder is
    summed in closed form); the fitted tail is recorded in ``tail`` and the
    method field is set to "extrapolated".
    """
    if K > B.top:
        raise DomainError("rows were not built up to K")
    with ctx.workprec(32):
        row_bounds = []
        certified_rows = []
        lattices = []
        for k in range(K + 1):
            ok, bound, total = _row_tail(B.rows[k], k)
            if not ok and tail_fit is None and strict:
                raise NoConvergence(
                    f"row {k} of B has no certified geometric tail",
                    value=None, error=bound)
            row_bounds.append(bound)
            certified_rows.append(ok)
            lattices.append(_row_lattice(B.rows[k], k))
        entries = [[_ZERO] * (k + 1) for k in range(K + 1)]
        tails = [[_ZERO] * (k + 1) for k in range(K + 1)]
        certs = [[True] * (k + 1) for k in range(K + 1)]
        for k in range(K + 1):
            row_k = B.rows[k]
            for l in range(k + 1):
                support = _pair_support(lattices[k], lattices[l], B.order)
                if support is None:
                    continue
                ns, clean = support
                row_l = B.rows[l]
                acc = _ZERO
                prods = []
                if clean:
                    for n in ns:
                        t = row_k[n] * row_l[n]
                        prods.append(t)
                        acc += t
                else:
                    for n in ns:
                        t = row_k[n] * row_l[n]
                        if t != 0:
                            prods.append(t)
                            acc += t
                if tail_fit is not None and prods:
                    extra = _pair_tail_fit(B, k, l, prods, tail_fit, ctx)
                    entries[k][l] = acc + extra
                    tails[k][l] = abs(extra)
                    certs[k][l] = False
                else:
                    entries[k][l] = acc
                    tails[k][l] = mp.sqrt(row_bounds[k] * row_bounds[l])
                    certs[k][l] = certified_rows[k] and certified_rows[l]
        method = "extrapolated" if tail_fit is not None else "bound"
    with ctx.workprec():
        return KernelMatrix(order=K,
                            entries=[[+x for x in r] for r in entries],
                            tail=[[+x for x in r] for r in tails],
                            certified=certs, method=method)


def _row_lattice(row: Sequence[mpf], k: int):
    """(start, step) of the row's nonzero support when it is an arithmetic
    progression (step 1 or 2), else None (one linear scan per row)."""
    idx = [n for n in range(k, len(row)) if row[n] != 0]
    if not idx:
        return (None, None)
    if len(idx) == 1:
        return (idx[0], 2)
    step = idx[1] - idx[0]
    if step in (1, 2) and all(idx[i + 1] - idx[i] == step
                              for i in range(len(idx) - 1)):
        return (idx[0], step)
    return None


def _pair_support(lat_k, lat_l, order: int):
    """(indices, clean) for the common nonzero support of two rows; None
    when provably disjoint.  clean=True means every index carries a nonzero
    product; the fallback for irregular rows returns all indices and the
    caller must filter zeros."""
    if lat_k == (None, None) or lat_l == (None, None):
        return None
    if lat_k is None or lat_l is None:
        return range(0, order + 1), False
    s_k, st_k = lat_k
    s_l, st_l = lat_l
    start = max(s_k, s_l)
    if st_k == st_l == 2:
        if (s_k - s_l) % 2 != 0:
            return None
        if (start - s_k) % 2 != 0:
            start += 1
        return range(start, order + 1, 2), True
    if st_k == st_l == 1:
        return range(start, order + 1), True
    return range(start, order + 1), False


def _pair_tail_fit(B: BRows, k: int, l: int, prods: List[mpf],
                   fit: dict, ctx: PrecisionContext) -> mpf:
    """Extrapolated remainder of sum_n b_{k,n} b_{l,n} past the built order.

    The nonzero products along a row pair keep one sign, so the fit runs on
    their absolute values (indexed 1, 2, ... along the nonzero lattice; any
    affine reindexing is absorbed by the correction ladder) and the sign is
    restored at the end.
    """
    sign = 1 if prods[-1] > 0 else -1
    absolute = [abs(x) for x in prods]
    p0 = fit.get("p0")
    if callable(p0):
        p0 = p0(k, l)
    tail = _fit_power_tail(absolute, lambda i: i + 1, to_mpf(p0, ctx, 64),
                           to_mpf(fit["step"], ctx, 64),
                           int(fit["coeffs"]), ctx)
    return sign * tail


def kernel_for_family(fam: FamilySpec, K: int, ctx: PrecisionContext,
                      tail_fit: Optional[dict] = None,
                      n_order: Optional[int] = None,
                      strict: bool = True) -> KernelMatrix:
    """Convenience wrapper: build enough of B, then assemble the kernel.

    The B order starts at max(4K, K+64) and doubles while some row tail stays
    uncertified (capped by max_terms); strict=False takes a single pass at
    the starting order and keeps the best effort with certified=False
    metadata instead of raising.
    """
    N = n_order if n_order is not None else max(4 * K, K + 64)
    with ctx.workprec(32):
        eps = mpf(ctx.eps_tail)
        while True:
            rows = b_rows(fam, K, N, ctx)
            ok = True
            if tail_fit is None and strict:
                for k in range(K + 1):
                    good, bound, total = _row_tail(rows.rows[k], k)
                    if not (good and bound <= eps * total):
                        ok = False
                        break
            if ok or 2 * N > ctx.max_terms:
                break
            N *= 2
    return build_A(rows, K, ctx, tail_fit=tail_fit, strict=strict)


def kernel_from_pair(alpha: Sequence, beta: Sequence, K: int,
                     ctx: PrecisionContext) -> KernelMatrix:
    """Kernel coefficients of (f(z) g(w) - f(w) g(z)) / (z - w) from the
    power-series coefficients of f and g:

        gamma_{k,l} = sum_{j=0}^{l} (alpha_{j+k+1} beta_{l-j}
                                     - beta_{j+k+1} alpha_{l-j}).

    Symmetry gamma_{k,l} = gamma_{l,k} holds by construction and is enforced
    as a postcondition; a violation signals inconsistent input sequences.
    """
    need = 2 * K + 2
    if len(alpha) < need or len(beta) < need:
        raise DomainError(f"need coefficients up to index {need - 1}")
    with ctx.workprec(32):
        al = [to_mpf(x, ctx, 32) for x in alpha]
        be = [to_mpf(x, ctx, 32) for x in beta]
        full = [[_ZERO] * (K + 1) for _ in range(K + 1)]
        scale = mpf(2) ** (-ctx.bits)
        for k in range(K + 1):
            for l in range(K + 1):
                acc = _ZERO
                mag = _ZERO
                for j in range(l + 1):
                    t1 = al[j + k + 1] * be[l - j]
                    t2 = be[j + k + 1] * al[l - j]
                    acc += t1 - t2
                    mag += abs(t1) + abs(t2)
                full[k][l] = acc
                scale = max(scale, mag)
        tol = scale * mpf(2) ** (-ctx.bits + 40)
        _check_kernel_symmetry(full, tol)
        entries = [[full[k][l] for l in range(k + 1)] for k in range(K + 1)]
        zero_rows = [[_ZERO] * (k + 1) for k in range(K + 1)]
    with ctx.workprec():
        return KernelMatrix(order=K,
                            entries=[[+x for x in r] for r in entries],
                            tail=zero_rows,
                            certified=[[True] * (k + 1) for k in range(K + 1)],
                            method="pair")


def hankel_minors_positive(H: HankelBlock, upto: int = 8) -> bool:
    """Spot check of positive definiteness: leading principal minors of the
    Hankel view must be positive (exact arithmetic when available)."""
    upto = min(upto, H.order + 1)
    if H.exact is not None:
        for size in range(1, upto + 1):
            M = [[H.exact[i + j] for j in range(size)] for i in range(size)]
            det = _det_exact(M)
            if det <= 0:
                return False
        return True
    with mp.workprec(mp.prec + 64):
        for size in range(1, upto + 1):
            M = [[mpf(H.moments[i + j]) for j in range(size)]
                 for i in range(size)]
            if _det_mpf(M) <= 0:
                return False
    return True


def _det_exact(M):
    n = len(M)
    M = [row[:] for row in M]
    det = Fraction(1)
    for col in range(n):
        piv = None
        for r in range(col, n):
            if M[r][col] != 0:
                piv = r
                break
        if piv is None:
            return Fraction(0)
        if piv != col:
            M[col], M[piv] = M[piv], M[col]
            det = -det
        det *= M[col][col]
        inv = M[col][col]
        for r in range(col + 1, n):
            f = M[r][col] / inv
            if f != 0:
                M[r] = [x - f * y for x, y in zip(M[r], M[col])]
    return det


def _det_mpf(M):
    n = len(M)
    M = [row[:] for row in M]
    det = mpf(1)
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(M[r][col]))
        if M[piv][col] == 0:
            return _ZERO
        if piv != col:
            M[col], M[piv] = M[piv], M[col]
            det = -det
        det *= M[col][col]
        inv = M[col][col]
        for r in range(col + 1, n):
            f = M[r][col] / inv
            if f != 0:
                M[r] = [x - f * y for x, y in zip(M[r], M[col])]
    return det


def _check_kernel_symmetry(full: List[List[mpf]], tol: mpf) -> None:
    """Postcondition of the pair construction: the coefficient matrix must be
    symmetric up to rounding; a violation signals inconsistent inputs."""
    for k in range(len(full)):
        for l in range(k):
            if not abs(full[k][l] - full[l][k]) <= tol:
                raise SymmetryViolation(
                    f"gamma[{k},{l}] != gamma[{l},{k}] beyond rounding")


# ---------------------------------------------------------------------------
# finite-section oracle
# ---------------------------------------------------------------------------

def finite_section_inverse(H: HankelBlock, N: int, ctx: PrecisionContext,
                           exact: Optional[bool] = None):
    """Inverse of the (N+1) x (N+1) Hankel section by pivoted elimination.

    Runs in exact rational arithmetic whenever exact moments are available
    (or ``exact=True`` is forced); otherwise the elimination happens at a
    precision elevated by the magnitude of the largest moment, so the result
    carries at least ctx.bits valid bits despite the Hankel conditioning.
    Returns a list-of-lists matrix of mpf values.
    """
    if 2 * N > 2 * H.order:
        raise DomainError("Hankel block too short for this order")
    use_exact = (H.exact is not None) if exact is None else exact
    if use_exact:
        if H.exact is None:
            raise DomainError("no exact moments available")
        A = [[H.exact[i + j] for j in range(N + 1)] for i in range(N + 1)]
        inv = _gauss_jordan_exact(A)
        with ctx.workprec():
            return [[to_mpf(x, ctx) for x in row] for row in inv]
    with ctx.workprec(32):
        biggest = max(abs(x) for x in H.moments[: 2 * N + 1])
        lift = int(mp.log(max(biggest, mpf(2)), 2)) + 64
    with ctx.workprec(lift):
        A = [[mpf(H.moments[i + j]) for j in range(N + 1)]
             for i in range(N + 1)]
        inv = _gauss_jordan_mpf(A)
    with ctx.workprec():
        return [[+x for x in row] for row in inv]


def _gauss_jordan_exact(A: List[List[Fraction]]) -> List[List[Fraction]]:
    n = len(A)
    M = [row[:] + [Fraction(int(i == j)) for j in range(n)]
         for i, row in enumerate(A)]
    for col in range(n):
        piv = None
        best = Fraction(0)
        for r in range(col, n):
            if abs(M[r][col]) > best:
                best = abs(M[r][col])
                piv = r
        if piv is None:
            raise SingularMatrix("vanishing pivot in exact elimination")
        M[col], M[piv] = M[piv], M[col]
        pval = M[col][col]
        M[col] = [x / pval for x in M[col]]
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col]
                M[r] = [x - f * y for x, y in zip(M[r], M[col])]
    return [row[n:] for row in M]


def _gauss_jordan_mpf(A: List[List[mpf]]) -> List[List[mpf]]:
    n = len(A)
    M = [row[:] + [mpf(int(i == j)) for j in range(n)]
         for i, row in enumerate(A)]
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(M[r][col]))
        if M[piv][col] == 0:
            raise SingularMatrix("vanishing pivot in elimination")
        M[col], M[piv] = M[piv], M[col]
        pval = M[col][col]
        M[col] = [x / pval for x in M[col]]
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col]
                M[r] = [x - f * y for x, y in zip(M[r], M[col])]
    return [row[n:] for row in M]
