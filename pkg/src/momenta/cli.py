"""Batch command-line interface.

Subcommands
-----------
compute      build the coefficient matrices and all diagnostics of a family
verify       summability checks: aci | cs | cs-star
alpha        threshold functions: eval | threshold | asymptotics
cubic        assembled report for the symmetrized cubic family
nullspace    annihilating sequences of the log-normal Hankel matrix
oracle       finite-section elimination oracle against the kernel matrix

Exit codes: 0 success, 2 domain/validation error, 3 convergence failure.
The MOMENTA_BITS environment variable overrides the default precision; an
explicit --bits flag wins over the environment.
"""
from __future__ import annotations

import argparse
import os
import sys
from fractions import Fraction
from typing import List, Optional

from mpmath import mp, mpf

from . import engine, verify as verify_mod
from .analysis import alpha_value, alpha_threshold, shape_report, u_alpha, v_alpha
from .cubic import cubic_report
from .errors import DomainError, MissingData, BracketError, NoConvergence
from .families import make_family
from .reports import Report, RunConfig


def _base_parser(sub, name, help_text):
    p = sub.add_parser(name, help=help_text)
    p.add_argument("--bits", type=int, default=None,
                   help="working precision in bits (default 512 or "
                        "MOMENTA_BITS)")
    p.add_argument("--eps-tail", type=str, default=None,
                   help="relative tail tolerance, e.g. 1e-30")
    p.add_argument("--out", type=str, default=None,
                   help="output path (default: stdout)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    return p


def _resolve_bits(args) -> int:
    if args.bits is not None:
        return args.bits
    env = os.environ.get("MOMENTA_BITS")
    if env:
        return int(env)
    return 512


def _config(args, **extra) -> RunConfig:
    return RunConfig(
        family=getattr(args, "family", None),
        N=getattr(args, "N", None), K=getattr(args, "K", None),
        bits=_resolve_bits(args), eps_tail=args.eps_tail,
        exact=bool(getattr(args, "exact", False)),
        out=args.out, format=args.format, extra=extra)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="momenta",
        description="arbitrary-precision diagnostics for indeterminate "
                    "moment problems")
    sub = ap.add_subparsers(dest="command", required=True)

    p = _base_parser(sub, "compute", "matrices, moments, and diagnostics")
    p.add_argument("--family", required=True)
    p.add_argument("--N", type=int, default=64)
    p.add_argument("--K", type=int, default=32)
    p.add_argument("--exact", action="store_true",
                   help="use the exact rational oracle where available")

    p = _base_parser(sub, "verify", "summability checks")
    p.add_argument("kind", choices=("aci", "cs", "cs-star"))
    p.add_argument("--family", required=True)
    p.add_argument("--N", type=int, default=60)
    p.add_argument("--j", type=str, default="0",
                   help="comma list of offsets for cs-star")
    p.add_argument("--imax", type=int, default=6)
    p.add_argument("--jmax", type=int, default=6)
    p.add_argument("--K", type=int, default=None,
                   help="kernel order for aci (default from jmax)")

    p = _base_parser(sub, "alpha", "threshold functions")
    p.add_argument("mode", choices=("eval", "threshold", "asymptotics"))
    p.add_argument("--grid", type=str, default="1.2:5.0:0.2",
                   help="lo:hi:step for eval")
    p.add_argument("--lo", type=str, default="1.5")
    p.add_argument("--hi", type=str, default="2.0")
    p.add_argument("--tol", type=str, default="1e-6")
    p.add_argument("--alphas", type=str, default="20,200,2000")

    p = _base_parser(sub, "cubic", "symmetrized cubic family report")
    p.add_argument("mode", choices=("report",))
    p.add_argument("--n", type=int, default=60)
    p.add_argument("--quad-upto", type=int, default=8)

    p = _base_parser(sub, "nullspace", "log-normal annihilators")
    p.add_argument("--q", type=str, default="0.5")
    p.add_argument("--init", type=str, default="1",
                   help="comma list of prescribed leading values")
    p.add_argument("--m-max", type=int, default=8)
    p.add_argument("--K", type=int, default=None,
                   help="build the symmetric annihilator block of this order")

    p = _base_parser(sub, "oracle", "finite-section inverse oracle")
    p.add_argument("mode", choices=("invert",))
    p.add_argument("--family", required=True)
    p.add_argument("--N", type=int, default=12)
    p.add_argument("--exact", action="store_true")
    return ap


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_compute(args) -> int:
    cfg = _config(args)
    ctx = cfg.context()
    fam = make_family(args.family)
    rep = Report(config=cfg)
    N, K = args.N, args.K

    B = engine.build_B(fam, N, ctx)
    C = engine.build_C(fam, N, ctx)
    rep.add_verdict("bc_residual", engine.residual_BC(B, C, ctx))
    if B.crosscheck_residual is not None:
        rep.add_verdict("b_closed_form_gap", B.crosscheck_residual)

    use_exact = args.exact and fam.symmetric and fam.rational_b2
    mom = engine.moments_jacobi(fam, N, ctx, exact=use_exact)
    rep.add_table("moments", mom.moments)
    rep.add_verdict("moments_exact", use_exact)

    if fam.symmetric:
        ut = engine.u_table(fam, N, ctx, exact=use_exact)
        rep.add_table("U", ut.U)
        try:
            vt = engine.v_table(fam, K, ctx, l_cap=4096, best_effort=True)
            rep.add_table("V", vt.V, errs=vt.v_tail)
            rep.add_verdict("v_columns", vt.v_columns)
            rep.add_verdict("v_certified", all(vt.v_certified))
        except NoConvergence as exc:
            rep.add_verdict("v_table", f"not certified: {exc}")
    cs = engine.c_seq(fam, K, ctx, n_start=max(4 * K, K + 64, 8 * N),
                      allow_uncertified=True)
    rep.add_table("c", cs.values, errs=cs.tail)
    rep.add_verdict("c_order_used", cs.order_used)
    rep.add_verdict("c_certified", all(cs.certified))
    if cs.crosscheck_gap is not None:
        rep.add_verdict("c_route_gap", cs.crosscheck_gap)

    A = engine.kernel_for_family(fam, min(K, 16), ctx, strict=False)
    rep.add_table("A_diag", A.diag(),
                  errs=[A.tail_bound(k, k) for k in range(A.order + 1)])

    sr = shape_report(fam, N, ctx)
    rep.add_verdict("log_shape", sr.log_shape)
    if sr.q_increasing is not None:
        rep.add_verdict("q_increasing_q", sr.q_increasing[0])
        rep.add_verdict("q_increasing_onset", sr.q_increasing[1])
    rep.add_verdict("carleman_partial", sr.carleman_partial)
    rep.add_verdict("carleman_ratio", sr.carleman_ratio)
    rep.write()
    return 0


def _c_values(fam, K, ctx):
    """c_0..c_K plus a certification flag, choosing the family's best route.

    The symmetrized cubic family has exact closed-form kernel entries, so its
    diagonal is used directly; other families run the row-sum engine in a
    single pass at a deep order (power-law tails cannot certify tight
    tolerances at any reachable order, and the report carries the flag).
    """
    if fam.id == "cubic_sym":
        from .cubic import cubic_kernel_entry
        with ctx.workprec():
            vals = [mp.sqrt(cubic_kernel_entry(k, k, ctx))
                    for k in range(K + 1)]
        return vals, True
    cs = engine.c_seq(fam, K, ctx, n_start=16 * K, allow_uncertified=True)
    return cs.values, all(cs.certified)


def _c_and_moments(fam, N, ctx):
    values, certified = _c_values(fam, 2 * N, ctx)
    mom = engine.moments_jacobi(
        fam, 2 * N, ctx, exact=fam.symmetric and fam.rational_b2)
    return values, certified, mom


def cmd_verify(args) -> int:
    cfg = _config(args, kind=args.kind)
    ctx = cfg.context()
    fam = make_family(args.family)
    rep = Report(config=cfg)
    if args.kind == "cs":
        cvals, certified, mom = _c_and_moments(fam, args.N, ctx)
        sr = verify_mod.cs_series(cvals, mom.moments, args.N, ctx)
        rep.add_table("terms", sr.terms)
        rep.add_verdict("verdict", sr.verdict)
        rep.add_verdict("root_exponent", sr.root_exponent)
        rep.add_verdict("root_stat", sr.root_stat)
        rep.add_verdict("c_certified", certified)
        rep.add_verdict("note", sr.note)
    elif args.kind == "cs-star":
        cvals, certified, mom = _c_and_moments(fam, args.N, ctx)
        offsets = [int(x) for x in args.j.split(",") if x.strip() != ""]
        rep.add_verdict("c_certified", certified)
        for j in offsets:
            sr = verify_mod.cs_star_series(cvals, mom.moments, j, args.N,
                                           ctx, symmetric=fam.symmetric)
            rep.add_table(f"terms_j{j}", sr.terms)
            rep.add_verdict(f"verdict_j{j}", sr.verdict)
            rep.add_verdict(f"root_exponent_j{j}", sr.root_exponent)
    else:
        K = args.K if args.K is not None else max(4 * args.jmax, 32)
        A = engine.kernel_for_family(fam, K, ctx, strict=False)
        mom = engine.moments_jacobi(fam, (K + args.jmax + 1) // 2 + 1, ctx)
        check = verify_mod.aci_residuals(A, mom.moments, args.imax,
                                         args.jmax, ctx)
        flat, flags = [], []
        for i in range(args.imax + 1):
            for j in range(args.jmax + 1):
                r = check.residual[i][j]
                flat.append(mpf(0) if r is None else r)
                flags.append(check.flags[i][j])
        rep.add_table("residuals", flat)
        rep.add_verdict("flags", ",".join(flags))
        worst = max((x for x in flat), default=mpf(0))
        rep.add_verdict("max_residual", worst)
        rep.add_verdict("all_certified",
                        all(f in ("ok", "structural-zero") for f in flags))
    rep.write()
    return 0


def cmd_alpha(args) -> int:
    cfg = _config(args, mode=args.mode)
    ctx = cfg.context()
    rep = Report(config=cfg)
    if args.mode == "threshold":
        root = alpha_threshold(Fraction(args.lo), Fraction(args.hi),
                               mpf(args.tol), ctx)
        rep.add_verdict("root", root)
        rep.add_verdict("lo", args.lo)
        rep.add_verdict("hi", args.hi)
    elif args.mode == "eval":
        lo_s, hi_s, step_s = args.grid.split(":")
        lo, hi, step = Fraction(lo_s), Fraction(hi_s), Fraction(step_s)
        if step <= 0 or hi < lo:
            raise DomainError("grid must be lo:hi:step with step > 0")
        rows_u, rows_v, rows_k, idx = [], [], [], []
        a = lo
        i = 0
        while a <= hi:
            av = alpha_value(a, ctx)
            idx.append(i)
            rows_u.append(av.u)
            rows_v.append(av.v)
            rows_k.append(av.k)
            a += step
            i += 1
        rep.add_table("u", rows_u)
        rep.add_table("v", ["" if v is None else v for v in rows_v])
        rep.add_table("k", ["" if k is None else k for k in rows_k])
        rep.add_verdict("grid", args.grid)
    else:
        alphas = [Fraction(x) for x in args.alphas.split(",")]
        au, av_ = [], []
        for a in alphas:
            u = u_alpha(a, ctx)
            v = v_alpha(a, ctx)
            with ctx.workprec():
                au.append(mpf(a.numerator) / a.denominator * u)
                av_.append(mpf(a.numerator) / a.denominator * v)
        rep.add_table("alpha_u", au)
        rep.add_table("alpha_v", av_)
        with ctx.workprec():
            rep.add_verdict("pi2_over_24", mp.pi ** 2 / 24)
            rep.add_verdict("pi2_over_6", mp.pi ** 2 / 6)
    rep.write()
    return 0


def cmd_cubic(args) -> int:
    cfg = _config(args, n=args.n)
    ctx = cfg.context()
    rr = cubic_report(args.n, ctx, quad_upto=args.quad_upto)
    rep = Report(config=cfg)
    rep.add_table("s_exact", rr.s_exact)
    rep.add_table("c_diag", rr.c_diag)
    rep.add_table("t_terms", rr.t_terms)
    rep.add_verdict("verdict", rr.series.verdict)
    rep.add_verdict("quad_rel_gap", rr.quad_rel_gap)
    rep.add_verdict("bounds_hold", rr.bounds_hold)
    rep.add_verdict("window_min_n_t", rr.window_min_n_t)
    rep.add_verdict("window_max_t_over_n2", rr.window_max_t_over_n2)
    rep.add_verdict("product_gap", rr.product_gap)
    rep.add_verdict("u_root", rr.u_root[0])
    rep.add_verdict("u_root_target", rr.u_root[1])
    rep.add_verdict("v_root", rr.v_root[0])
    rep.add_verdict("v_root_target", rr.v_root[1])
    rep.add_verdict("envelope_ok", rr.envelope_ok)
    rep.write()
    return 0


def cmd_nullspace(args) -> int:
    cfg = _config(args, q=args.q, init=args.init, m_max=args.m_max)
    ctx = cfg.context()
    rep = Report(config=cfg)
    q = Fraction(args.q)
    if args.K is not None:
        ann = verify_mod.symmetric_annihilator(q, args.K, ctx,
                                               m_max=args.m_max)
        worst = mpf(0)
        for rows in ann.residuals:
            for r in rows:
                worst = max(worst, r.residual)
        rep.add_verdict("symmetry_gap", ann.symmetry_gap())
        rep.add_verdict("max_residual", worst)
        for j, rows in enumerate(ann.residuals):
            rep.add_table(f"residuals_col{j}", [r.residual for r in rows],
                          errs=[r.tail for r in rows])
    else:
        init = [Fraction(x) for x in args.init.split(",")]
        nv = verify_mod.null_vector(q, init, ctx)
        rows = verify_mod.null_residuals(q, nv, args.m_max, ctx)
        rep.add_table("residuals", [r.residual for r in rows],
                      errs=[r.tail for r in rows])
        rep.add_table("abs_sums", [r.abs_sum for r in rows])
        rep.add_verdict("max_residual", max(r.residual for r in rows))
    rep.write()
    return 0


def cmd_oracle(args) -> int:
    cfg = _config(args)
    ctx = cfg.context()
    fam = make_family(args.family)
    rep = Report(config=cfg)
    N = args.N
    use_exact = args.exact or (fam.symmetric and fam.rational_b2)
    mom = engine.moments_jacobi(fam, N, ctx,
                                exact=use_exact and fam.symmetric
                                and fam.rational_b2)
    inv = engine.finite_section_inverse(mom, N, ctx)
    rows = engine.b_rows(fam, N, N, ctx)
    with ctx.workprec(32):
        worst = mpf(0)
        for i in range(N + 1):
            for j in range(N + 1):
                bb = mpf(0)
                for n in range(max(i, j), N + 1):
                    bb += rows.rows[i][n] * rows.rows[j][n]
                worst = max(worst, abs(bb - inv[i][j]))
        tol = mpf(2) ** (-(ctx.bits // 2)) * (N + 1) ** 2
    rep.add_verdict("max_entry_gap", worst)
    rep.add_verdict("tolerance", tol)
    rep.add_verdict("within_tolerance", bool(worst <= tol))
    rep.write()
    return 0


_DISPATCH = {
    "compute": cmd_compute,
    "verify": cmd_verify,
    "alpha": cmd_alpha,
    "cubic": cmd_cubic,
    "nullspace": cmd_nullspace,
    "oracle": cmd_oracle,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _DISPATCH[args.command](args)
    except (DomainError, MissingData, BracketError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NoConvergence as exc:
        print(f"no convergence: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
