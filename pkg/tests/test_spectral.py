"""Spectral-core contract tests: transforms, projector, multipliers, norms."""

import numpy as np
import pytest

from nsk41.spectral import (
    EmptyBandError,
    GridSpec,
    Multiplier,
    SpectralField,
    apply_multiplier,
    band_project,
    bilinear_B,
    convection,
    dealias,
    divergence_max,
    forward_transform,
    hermitian_symmetrize,
    inner_l2,
    inverse_transform,
    leray_project,
    norm,
    norm_e,
    norm_gevrey,
    norm_hs,
    norm_l2,
    norm_lp,
    support_radius,
)


@pytest.fixture(scope="module")
def grid():
    return GridSpec(box_half_side=np.pi, resolution=16)


def random_field(grid, seed, divergence_free=False, band_limited=True):
    rng = np.random.default_rng(seed)
    n = grid.resolution
    raw = rng.standard_normal((3, n, n, n)) + 1j * rng.standard_normal((3, n, n, n))
    fld = hermitian_symmetrize(SpectralField(grid, raw))
    if band_limited:
        fld = dealias(fld)
    if divergence_free:
        fld = leray_project(fld)
    fld.coeffs[:, 0, 0, 0] = 0.0
    return fld


class TestGridSpec:
    def test_invariants(self, grid):
        assert grid.dk == pytest.approx(1.0)
        assert grid.kmax < (grid.resolution / 2) * grid.dk
        assert grid.volume == pytest.approx((2 * np.pi) ** 3)

    def test_rejects_odd_or_small_resolution(self):
        with pytest.raises(ValueError):
            GridSpec(np.pi, 15)
        with pytest.raises(ValueError):
            GridSpec(np.pi, 6)

    def test_coords_cover_centered_box(self, grid):
        x = grid.coords()
        assert x.min() == pytest.approx(-np.pi)
        assert x.max() < np.pi


class TestTransforms:
    def test_single_sine_mode(self, grid):
        # sin(dk x1) e2 -> exactly two modes at k = +-(1,0,0), amp -+ i/2
        n = grid.resolution
        x = grid.coords()
        s = np.zeros((3, n, n, n))
        s[1] = np.sin(grid.dk * x[0])
        c = forward_transform(s, grid).coeffs
        assert c[1, 1, 0, 0] == pytest.approx(-0.5j, abs=1e-14)
        assert c[1, -1, 0, 0] == pytest.approx(0.5j, abs=1e-14)
        c[1, 1, 0, 0] = 0.0
        c[1, -1, 0, 0] = 0.0
        assert np.max(np.abs(c)) < 1e-14

    def test_constant_field(self, grid):
        n = grid.resolution
        s = np.zeros((3, n, n, n))
        s[0] = 2.5
        c = forward_transform(s, grid).coeffs
        assert c[0, 0, 0, 0] == pytest.approx(2.5)
        c[0, 0, 0, 0] = 0.0
        assert np.max(np.abs(c)) < 1e-14

    def test_roundtrip_white_noise(self, grid):
        rng = np.random.default_rng(3)
        n = grid.resolution
        s = rng.standard_normal((3, n, n, n))
        back = inverse_transform(forward_transform(s, grid))
        assert np.max(np.abs(back - s)) <= 1e-12 * np.max(np.abs(s))

    def test_parseval_random(self, grid):
        rng = np.random.default_rng(4)
        n = grid.resolution
        s = rng.standard_normal((3, n, n, n))
        fld = forward_transform(s, grid)
        quad = np.sum(s**2) * grid.cell_volume
        assert norm_l2(fld) ** 2 == pytest.approx(quad, rel=1e-10)

    def test_shape_mismatch_rejected(self, grid):
        with pytest.raises(ValueError):
            forward_transform(np.zeros((3, 8, 8, 8)), grid)


class TestLeray:
    def test_annihilates_gradients(self, grid):
        n = grid.resolution
        x = grid.coords()
        s = np.zeros((3, n, n, n))
        s[0] = np.cos(grid.dk * x[0])  # gradient of sin(dk x1)
        fld = forward_transform(s, grid)
        assert np.max(np.abs(leray_project(fld).coeffs)) < 1e-14

    def test_fixes_divergence_free(self, grid):
        n = grid.resolution
        x = grid.coords()
        s = np.zeros((3, n, n, n))
        s[0] = np.sin(grid.dk * x[1])
        fld = forward_transform(s, grid)
        out = leray_project(fld)
        assert np.max(np.abs(out.coeffs - fld.coeffs)) < 1e-14

    def test_idempotent_and_divergence_free(self, grid):
        for seed in range(5):
            v = random_field(grid, seed)
            p1 = leray_project(v)
            p2 = leray_project(p1)
            scale = np.max(np.abs(p1.coeffs))
            assert np.max(np.abs(p2.coeffs - p1.coeffs)) <= 1e-12 * scale
            assert divergence_max(p1) <= 1e-12 * scale

    def test_self_adjoint(self, grid):
        for seed in range(5):
            u = random_field(grid, 10 + seed)
            v = random_field(grid, 20 + seed)
            lhs = inner_l2(leray_project(u), v)
            rhs = inner_l2(u, leray_project(v))
            assert abs(lhs - rhs) <= 1e-10 * norm_l2(u) * norm_l2(v)


class TestMultiplier:
    def test_laplacian_on_single_mode(self, grid):
        n = grid.resolution
        x = grid.coords()
        s = np.zeros((3, n, n, n))
        s[1] = np.sin(grid.dk * x[0])
        fld = forward_transform(s, grid)
        out = apply_multiplier(Multiplier.fractional_laplacian(grid, 1.0), fld)
        assert np.allclose(out.coeffs, grid.dk**2 * fld.coeffs)

    def test_gevrey_beta_zero_is_identity(self, grid):
        v = random_field(grid, 7)
        out = apply_multiplier(Multiplier.gevrey(grid, 0.0), v)
        assert np.array_equal(out.coeffs, v.coeffs)

    def test_resolvent_roundtrip(self, grid):
        v = random_field(grid, 8)
        m = Multiplier.damped_resolvent(grid, nu=0.7, alpha=0.3)
        back = apply_multiplier(m.inverse(), apply_multiplier(m, v))
        scale = np.max(np.abs(v.coeffs))
        assert np.max(np.abs(back.coeffs - v.coeffs)) <= 1e-12 * scale

    def test_composition(self, grid):
        v = random_field(grid, 9)
        m1 = Multiplier.fractional_laplacian(grid, 0.5)
        m2 = Multiplier.gevrey(grid, 0.2)
        a = apply_multiplier(m1, apply_multiplier(m2, v))
        b = apply_multiplier(m1 * m2, v)
        scale = np.max(np.abs(a.coeffs)) or 1.0
        assert np.max(np.abs(a.coeffs - b.coeffs)) <= 1e-12 * scale

    def test_negative_order_rejects_nonzero_mean(self, grid):
        v = random_field(grid, 10)
        v.coeffs[0, 0, 0, 0] = 1.0
        with pytest.raises(ValueError):
            apply_multiplier(Multiplier.fractional_laplacian(grid, -0.5), v)


class TestBandProject:
    def test_inside_unchanged_outside_zeroed(self, grid):
        v = random_field(grid, 11, divergence_free=True)
        band = band_project(v, ell0=1.0, rho1=1.5, rho2=3.5)
        inside = (grid.xi_abs >= 1.5) & (grid.xi_abs <= 3.5)
        assert np.array_equal(band.coeffs[:, inside], v.coeffs[:, inside])
        assert np.max(np.abs(band.coeffs[:, ~inside])) == 0.0
        again = band_project(band, ell0=1.0, rho1=1.5, rho2=3.5)
        assert np.array_equal(again.coeffs, band.coeffs)

    def test_fully_outside_gives_zero(self, grid):
        n = grid.resolution
        x = grid.coords()
        s = np.zeros((3, n, n, n))
        s[1] = np.sin(grid.dk * x[0])  # |xi| = 1
        fld = forward_transform(s, grid)
        out = band_project(fld, ell0=1.0, rho1=2.0, rho2=4.0)
        # the only content is FFT round-off at off-support modes
        assert np.max(np.abs(out.coeffs)) < 1e-15

    def test_pythagorean_split(self, grid):
        v = random_field(grid, 12)
        band = band_project(v, ell0=1.0, rho1=2.0, rho2=4.0)
        rest = v - band
        total = norm_l2(v) ** 2
        split = norm_l2(band) ** 2 + norm_l2(rest) ** 2
        assert abs(total - split) <= 1e-12 * total

    def test_empty_band_signalled(self, grid):
        v = random_field(grid, 13)
        with pytest.raises(EmptyBandError):
            band_project(v, ell0=1.0, rho1=0.01, rho2=0.02)


class TestNorms:
    def test_sine_l2_exact(self, grid):
        # ||sin(dk x2) e1||_L2^2 = (2 pi)^3 / 2 on the box of half-side pi
        n = grid.resolution
        x = grid.coords()
        s = np.zeros((3, n, n, n))
        s[0] = np.sin(grid.dk * x[1])
        fld = forward_transform(s, grid)
        assert norm_l2(fld) ** 2 == pytest.approx((2 * np.pi) ** 3 / 2, rel=1e-12)
        # |xi| = 1 on the support, so H1 equals L2 and the Gevrey weight is e^beta
        assert norm_hs(fld, 1.0) == pytest.approx(norm_l2(fld), rel=1e-12)
        beta = 0.8
        assert norm_gevrey(fld, beta, 1.0) == pytest.approx(
            np.exp(beta) * norm_hs(fld, 1.0), rel=1e-12
        )

    def test_parseval_vs_quadrature_for_l2(self, grid):
        for seed in range(3):
            v = random_field(grid, 30 + seed)
            assert norm_lp(v, 2) == pytest.approx(norm_l2(v), rel=1e-10)

    def test_homogeneity_and_triangle(self, grid):
        u = random_field(grid, 40)
        v = random_field(grid, 41)
        for kind, kw in [
            ("l2", {}),
            ("hs", {"s": 1.0}),
            ("lp", {"p": 3}),
            ("e", {"ell0": 0.5, "length": 1.5}),
            ("gevrey", {"beta": 0.3, "s": 0.5}),
        ]:
            nu_ = norm(u, kind, **kw)
            assert norm(-2.5 * u, kind, **kw) == pytest.approx(2.5 * nu_, rel=1e-10)
            assert norm(u + v, kind, **kw) <= nu_ + norm(v, kind, **kw) + 1e-10

    def test_unsupported_p(self, grid):
        v = random_field(grid, 42)
        with pytest.raises(ValueError):
            norm_lp(v, 7)

    def test_negative_order_needs_mean_free(self, grid):
        v = random_field(grid, 43)
        v.coeffs[2, 0, 0, 0] = 0.5
        with pytest.raises(ValueError):
            norm_hs(v, -1.0)

    def test_bernstein_on_band_limited(self, grid):
        ell0, rho1, rho2 = 1.0, 2.0, 4.0
        v = band_project(random_field(grid, 44), ell0, rho1, rho2)
        l2 = norm_l2(v)
        h1 = norm_hs(v, 1.0)
        assert rho1 / ell0 * l2 <= h1 * (1 + 1e-12)
        assert h1 <= rho2 / ell0 * l2 * (1 + 1e-12)


class TestBilinear:
    def test_shear_self_advection_vanishes(self, grid):
        n = grid.resolution
        x = grid.coords()
        s = np.zeros((3, n, n, n))
        s[0] = np.sin(grid.dk * x[1])
        v = forward_transform(s, grid)
        out = bilinear_B(v, v, nu=0.7)
        assert np.max(np.abs(out.coeffs)) < 1e-15

    def test_zero_argument(self, grid):
        v = random_field(grid, 50, divergence_free=True)
        out = bilinear_B(SpectralField.zero(grid), v, nu=1.0)
        assert np.max(np.abs(out.coeffs)) == 0.0

    def test_result_divergence_free_and_mean_free(self, grid):
        u = random_field(grid, 51, divergence_free=True)
        v = random_field(grid, 52, divergence_free=True)
        out = bilinear_B(u, v, nu=0.5)
        assert out.mean_mode_abs() == 0.0
        assert divergence_max(out) <= 1e-12 * (np.max(np.abs(out.coeffs)) or 1.0)

    def test_support_growth_by_convolution(self, grid):
        # two single-shell fields: product support within the Minkowski sum
        u = band_project(random_field(grid, 53, divergence_free=True), 1.0, 0.9, 1.1)
        v = band_project(random_field(grid, 54, divergence_free=True), 1.0, 1.9, 2.1)
        out = bilinear_B(u, v, nu=1.0)
        # |xi_u| = 1 and |xi_v| = 2 exactly on this lattice
        assert support_radius(out) <= 3.0 + 1e-12

    def test_trilinear_cancellation(self, grid):
        for seed in range(3):
            u = dealias(random_field(grid, 60 + seed, divergence_free=True))
            tri = abs(inner_l2(convection(u), u))
            assert tri <= 1e-8 * norm_hs(u, 1.0) * norm_lp(u, 4) ** 2


class TestHermitian:
    def test_real_fields_are_hermitian(self, grid):
        v = random_field(grid, 70)
        assert v.is_hermitian()
        samples = inverse_transform(v)
        rebuilt = forward_transform(samples, grid)
        assert np.max(np.abs(rebuilt.coeffs - v.coeffs)) <= 1e-12 * np.max(
            np.abs(v.coeffs)
        )
