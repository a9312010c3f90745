"""Closed forms, quadrature, and the assembled report of the cubic family."""
import pytest
from mpmath import mpf

from momenta import (DomainError, PrecisionContext, cubic_b_product,
                     cubic_constants, cubic_kernel_entry, cubic_moment,
                     cubic_moment_bounds, cubic_report, envelope_constants,
                     kernel_from_pair, make_family, moments_jacobi,
                     verify_envelope)
from momenta.cubic import (cubic_alpha_coeffs, cubic_beta_coeffs,
                           cubic_kernel_vs_engine)

QCTX = PrecisionContext(bits=96, eps_tail=mpf(10) ** -12)


class TestEnvelope:
    def test_constants(self, ctx192):
        k1, k2 = envelope_constants(ctx192)
        assert mpf("2.30690") < k1 < mpf("2.30691")
        assert mpf("0.31453") < k2 < mpf("0.31454")

    def test_grid_verification(self, ctx128):
        assert verify_envelope(ctx128, grid=512)


class TestMoments:
    def test_normalization(self):
        assert abs(cubic_moment(0, QCTX) - 1) < mpf(10) ** -10

    def test_against_exact_oracle(self):
        fam = make_family("cubic_sym")
        mom = moments_jacobi(fam, 6, QCTX, exact=True)
        for n in (1, 3, 6):
            v = cubic_moment(n, QCTX)
            assert abs(v - mom.moments[2 * n]) / mom.moments[2 * n] \
                < mpf(10) ** -9

    def test_sandwich(self, ctx192):
        fam = make_family("cubic_sym")
        mom = moments_jacobi(fam, 40, ctx192, exact=True)
        for n in range(1, 41):
            lo, hi = cubic_moment_bounds(n, ctx192)
            assert lo < mom.moments[2 * n] < hi

    def test_quadrature_inside_bounds(self):
        v = cubic_moment(20, QCTX)
        lo, hi = cubic_moment_bounds(20, QCTX)
        assert lo < v < hi

    def test_domain(self, ctx192):
        with pytest.raises(DomainError):
            cubic_moment(-1, ctx192)
        with pytest.raises(DomainError):
            cubic_moment_bounds(0, ctx192)


class TestKernelClosedForms:
    def test_corner_values(self, ctx192):
        cc = cubic_constants(ctx192)
        with ctx192.workprec():
            a00 = cubic_kernel_entry(0, 0, ctx192)
            assert abs(a00 - cc.c / 2) < mpf(2) ** -150
            assert cubic_kernel_entry(0, 1, ctx192) == 0
            assert cubic_kernel_entry(3, 4, ctx192) == 0
            # first odd diagonal entry: 3 c a / 40
            a11 = cubic_kernel_entry(1, 1, ctx192)
            assert abs(a11 - 3 * cc.c * cc.a / 40) \
                < mpf(2) ** -150 * a11

    def test_matches_pair_construction(self, ctx256):
        top = 12
        alpha = cubic_alpha_coeffs(2 * top + 2, ctx256)
        beta = cubic_beta_coeffs(2 * top + 2, ctx256)
        K = kernel_from_pair(alpha, beta, top, ctx256)
        with ctx256.workprec():
            for r in range(top + 1):
                for s in range(top + 1):
                    closed = cubic_kernel_entry(r, s, ctx256)
                    got = K.entry(r, s)
                    if closed == 0:
                        assert abs(got) < mpf(2) ** -180
                    else:
                        assert abs(got - closed) / abs(closed) \
                            < mpf(10) ** -20

    def test_pair_antisymmetric_inputs(self, ctx192):
        alpha = cubic_alpha_coeffs(10, ctx192)
        K = kernel_from_pair(alpha, alpha, 4, ctx192)
        assert all(K.entry(i, j) == 0 for i in range(5) for j in range(5))

    def test_engine_route_quick(self):
        # scaled-down version of the acceptance cross-check
        ctx = PrecisionContext(bits=256)
        worst = cubic_kernel_vs_engine(4, ctx, order=4000)
        assert worst < mpf(10) ** -15

    def test_diagonal_root_trend(self, ctx192):
        # k^(3/2) c_k^(1/k) approaches (2 e theta / 3)^(3/2) from below
        from mpmath import mp
        cc = cubic_constants(ctx192)
        with ctx192.workprec():
            target = mp.power(2 * mp.e * cc.theta / 3, mpf(3) / 2)
            vals = []
            for k in (40, 80, 120):
                ck = mp.sqrt(cubic_kernel_entry(k, k, ctx192))
                vals.append(mp.power(k, mpf(3) / 2) * mp.power(ck, mpf(1) / k))
            assert vals[0] < vals[1] < vals[2] < target
            assert abs(vals[2] - target) / target < mpf("0.12")

    def test_b_product_identity(self, ctx192):
        fam = make_family("cubic_sym")
        with ctx192.workprec(16):
            direct = mpf(1)
            for m in range(12):
                want = cubic_b_product(m, ctx192)
                assert abs(direct - want) <= mpf(2) ** -150 * want
                direct *= fam.coeff_b(m, ctx192)


class TestReport:
    def test_assembled_report(self):
        ctx = PrecisionContext(bits=128, eps_tail=mpf(10) ** -10)
        rep = cubic_report(25, ctx, quad_upto=2, window=(10, 25))
        assert rep.envelope_ok
        assert rep.bounds_hold
        assert rep.series.verdict == "divergent"
        assert rep.quad_rel_gap < mpf(10) ** -8
        assert rep.product_gap < mpf(2) ** -90
        with ctx.workprec():
            assert rep.window_min_n_t > mpf(10) ** -3
            assert rep.window_max_t_over_n2 < mpf(10) ** 3
        # growth roots head toward their limits from below
        assert rep.u_root[0] < rep.u_root[1]
        assert rep.u_root_mid < rep.u_root[0]
        assert rep.v_root_mid < rep.v_root[0] < rep.v_root[1]

    def test_needs_minimum_order(self, ctx128):
        with pytest.raises(DomainError):
            cubic_report(10, ctx128)
