import math

import numpy as np
import pytest

from kslab.fields import (
    ScalarField,
    SpectralField,
    dealias,
    divergence,
    from_spectral,
    gradient,
    heat_propagate,
    hessian_sq,
    integrate,
    laplacian,
    magnitude,
    make_grid,
    to_spectral,
)

from conftest import band_limited


class TestMakeGrid:
    def test_basic_spacing(self):
        grid = make_grid(1, 256, 40.0)
        assert grid.spacing == 0.15625
        assert grid.spacing * grid.n_axis == grid.box_len

    def test_point_count_3d(self):
        grid = make_grid(3, 64, 20.0)
        assert grid.npoints == 262144

    def test_rejects_non_power_of_two(self):
        with pytest.raises(ValueError):
            make_grid(2, 100, 10.0)

    def test_rejects_small_and_bad_dim(self):
        with pytest.raises(ValueError):
            make_grid(2, 4, 10.0)
        with pytest.raises(ValueError):
            make_grid(4, 64, 10.0)
        with pytest.raises(ValueError):
            make_grid(1, 64, -1.0)

    def test_coords_centered(self):
        grid = make_grid(1, 256, 40.0)
        x = grid.axis_coords()
        assert x[0] == -20.0
        assert x[-1] == 20.0 - grid.spacing
        assert 0.0 in x


class TestSpectralTransform:
    def test_constant_is_pure_dc(self, grid1d):
        F = to_spectral(ScalarField(grid1d, np.ones(grid1d.shape)))
        coeffs = F.coeffs.copy()
        assert abs(coeffs[0] - grid1d.n_axis) < 1e-9
        coeffs[0] = 0.0
        assert np.max(np.abs(coeffs)) < 1e-12

    def test_single_cosine_two_modes(self, grid1d):
        x = grid1d.mesh()[0]
        f = ScalarField(grid1d, np.cos(2 * np.pi * x / grid1d.box_len))
        coeffs = to_spectral(f).coeffs
        big = np.abs(coeffs) > 1e-8
        assert big.sum() == 2
        assert big[1] and big[-1]

    def test_round_trip(self, grid2d, rng):
        f = ScalarField(grid2d, rng.standard_normal(grid2d.shape))
        back = from_spectral(to_spectral(f))
        assert np.max(np.abs(back.values - f.values)) <= 1e-12 * f.max_abs()

    def test_real_field_is_hermitian(self, grid2d, rng):
        f = ScalarField(grid2d, rng.standard_normal(grid2d.shape))
        assert to_spectral(f).hermitian_defect() <= 1e-10

    def test_rejects_non_finite(self, grid1d):
        vals = np.zeros(grid1d.shape)
        vals[3] = np.nan
        with pytest.raises(ValueError):
            to_spectral(ScalarField(grid1d, vals))

    def test_values_frozen(self, grid1d):
        f = ScalarField(grid1d, np.zeros(grid1d.shape))
        with pytest.raises(ValueError):
            f.values[0] = 1.0


class TestDerivatives:
    def test_gradient_of_constant(self, grid2d):
        g = gradient(ScalarField(grid2d, np.full(grid2d.shape, 3.5)))
        assert magnitude(g).max_abs() == 0.0

    def test_gradient_of_sine_analytic(self, grid1d):
        L = grid1d.box_len
        x = grid1d.mesh()[0]
        f = ScalarField(grid1d, np.sin(2 * np.pi * x / L))
        expected = (2 * np.pi / L) * np.cos(2 * np.pi * x / L)
        got = gradient(f).components[0].values
        assert np.max(np.abs(got - expected)) <= 1e-12

    def test_laplacian_of_sine_analytic(self, grid1d):
        L = grid1d.box_len
        x = grid1d.mesh()[0]
        f = ScalarField(grid1d, np.sin(2 * np.pi * x / L))
        expected = -((2 * np.pi / L) ** 2) * np.sin(2 * np.pi * x / L)
        assert np.max(np.abs(laplacian(f).values - expected)) <= 1e-12

    def test_laplacian_of_constant(self, grid2d):
        assert laplacian(ScalarField(grid2d, np.ones(grid2d.shape))).max_abs() == 0.0

    def test_div_grad_equals_laplacian(self, grid2d, rng):
        f = dealias(ScalarField(grid2d, rng.standard_normal(grid2d.shape)))
        gap = np.max(np.abs(divergence(gradient(f)).values - laplacian(f).values))
        assert gap <= 1e-10

    def test_product_rule_on_dealiased_fields(self, grid2d, rng):
        f = dealias(ScalarField(grid2d, rng.standard_normal(grid2d.shape)))
        g = dealias(ScalarField(grid2d, rng.standard_normal(grid2d.shape)))
        lhs = dealias(gradient(f * g).components[0])
        rhs = dealias(
            ScalarField(
                grid2d,
                f.values * gradient(g).components[0].values
                + g.values * gradient(f).components[0].values,
            )
        )
        assert np.max(np.abs(lhs.values - rhs.values)) <= 1e-8


class TestHessian:
    def test_constant_field(self, grid2d):
        assert hessian_sq(ScalarField(grid2d, np.ones(grid2d.shape))).max_abs() == 0.0

    def test_laplacian_bound(self, grid2d, rng):
        c = band_limited(grid2d, rng, grid2d.n_axis // 8)
        lap_sq = laplacian(c).values ** 2
        assert np.max(lap_sq - grid2d.d * hessian_sq(c).values) <= 1e-9

    def test_gradient_square_bound(self, grid2d, rng):
        c = band_limited(grid2d, rng, grid2d.n_axis // 8)
        gc = magnitude(gradient(c)).values
        lhs = sum(
            comp.values**2
            for comp in gradient(ScalarField(grid2d, gc * gc)).components
        )
        assert np.max(lhs - 4.0 * hessian_sq(c).values * gc * gc) <= 1e-9


class TestHeatPropagate:
    def test_zero_time_is_identity(self, grid2d, rng):
        f = ScalarField(grid2d, rng.standard_normal(grid2d.shape))
        assert np.array_equal(heat_propagate(f, 0.0).values, f.values)

    def test_constant_with_damping(self, grid1d):
        f = ScalarField(grid1d, np.full(grid1d.shape, 2.0))
        out = heat_propagate(f, 0.7, tau=2.0, damping=1.0)
        assert np.max(np.abs(out.values - 2.0 * math.exp(-0.7 / 2.0))) <= 1e-12

    def test_single_mode_multiplier(self, grid1d):
        L = grid1d.box_len
        x = grid1d.mesh()[0]
        k = 3
        f = ScalarField(grid1d, np.cos(2 * np.pi * k * x / L))
        t, tau = 0.3, 1.5
        factor = math.exp(-(t / tau) * (1.0 + (2 * np.pi * k / L) ** 2))
        out = heat_propagate(f, t, tau=tau, damping=1.0)
        assert np.max(np.abs(out.values - factor * f.values)) <= 1e-12

    def test_semigroup_law(self, grid2d, rng):
        f = ScalarField(grid2d, rng.standard_normal(grid2d.shape))
        a = heat_propagate(heat_propagate(f, 0.07), 0.05)
        b = heat_propagate(f, 0.12)
        assert np.max(np.abs(a.values - b.values)) <= 1e-12

    def test_negative_time_rejected(self, grid1d):
        f = ScalarField(grid1d, np.zeros(grid1d.shape))
        with pytest.raises(ValueError):
            heat_propagate(f, -0.1)


class TestIntegrate:
    def test_constant(self, grid2d):
        val = integrate(ScalarField(grid2d, np.ones(grid2d.shape)))
        assert abs(val - grid2d.box_len**grid2d.d) <= 1e-9

    def test_sine_mode_is_mean_zero(self, grid1d):
        x = grid1d.mesh()[0]
        f = ScalarField(grid1d, np.sin(2 * np.pi * x / grid1d.box_len))
        assert abs(integrate(f)) <= 1e-12

    def test_gaussian_analytic_mass(self):
        # Oracle: integral of a*exp(-|x|^2/(2 w^2)) over R^d is a*(sqrt(2 pi) w)^d;
        # the periodization error is far below 1e-8 for w = L/16.
        grid = make_grid(2, 128, 40.0)
        a, w = 1.7, 2.5
        r2 = grid.radius() ** 2
        f = ScalarField(grid, a * np.exp(-r2 / (2 * w**2)))
        exact = a * (math.sqrt(2 * math.pi) * w) ** grid.d
        assert abs(integrate(f) - exact) <= 1e-8 * exact


class TestDealias:
    def test_removes_high_modes_only(self, grid1d, rng):
        f = ScalarField(grid1d, rng.standard_normal(grid1d.shape))
        low = band_limited(grid1d, rng, grid1d.n_axis // 4)
        assert np.max(np.abs(dealias(low).values - low.values)) <= 1e-12
        fd = dealias(f)
        coeffs = np.fft.fft(fd.values)
        n = grid1d.n_axis
        assert np.max(np.abs(coeffs[n // 3 + 1 : n - n // 3])) <= 1e-9


class TestSpectralFieldType:
    def test_hermitian_defect_detects_asymmetry(self, grid1d):
        coeffs = np.zeros(grid1d.shape, dtype=np.complex128)
        coeffs[1] = 1.0 + 0.5j  # no conjugate partner at -1
        F = SpectralField(grid1d, coeffs)
        assert F.hermitian_defect() > 0.1
