"""Tests for the singular operators, the Φ oracle and the growth certificates."""

import math

import numpy as np
import pytest

from biparam_paraproducts.errors import ValidationFailure
from biparam_paraproducts.grid import make_grid_function
from biparam_paraproducts.singular import (
    GrowthTable,
    PVQuadrature,
    SineIntegralOracle,
    bht_eval,
    bht_spectral,
    chirp_1d,
    chirp_2d,
    chirp_double_bht,
    chirp_phase_residual,
    chirp_v2,
    divergence_certificate,
    double_bht_eval,
    double_bht_spectral,
    fit_log_growth,
    phi_constant,
    phi_integral,
    sine_integral_S,
    v2_eval,
)


class TestPVQuadrature:
    """Tests for the symmetric principal-value rule."""

    def test_validation(self):
        """Test the node, kernel and period checks."""
        with pytest.raises(ValidationFailure):
            PVQuadrature(step=0.0, count=4)
        with pytest.raises(ValidationFailure):
            PVQuadrature(step=0.1, count=4, kernel="cauchy")
        with pytest.raises(ValidationFailure, match="half a period"):
            PVQuadrature(step=0.1, count=4, kernel="periodic", period=1.0)

    def test_odd_integrand_on_line(self):
        """Test PV∫ sin(t)/t over [−T, T] against 2·Si(T)."""
        quad = PVQuadrature.line(10.0, 4000)
        value = quad.integrate(np.sin)
        assert value == pytest.approx(2 * 1.6583475942188740, rel=1e-5)

    def test_even_integrand_vanishes(self):
        """Test that even integrands have zero principal value."""
        quad = PVQuadrature.line(3.0, 50)
        assert quad.integrate(np.cos) == pytest.approx(0.0, abs=1e-14)


class TestBilinearHilbert:
    """Tests for B(f, g) and B_d(f, g) against their multipliers."""

    def test_periodic_quadrature_matches_multiplier(self):
        """Test that the cot-kernel rule reproduces iπ·sgn(η − ξ) on the grid."""
        f = make_grid_function(1, 32, 1.0, "band_limited_random", seed=1)
        g = make_grid_function(1, 32, 1.0, "band_limited_random", seed=2)
        x = f.coordinates()
        direct = bht_eval(f, g, x, PVQuadrature.periodic(1.0, 64))
        spectral = bht_spectral(f, g)
        assert np.allclose(direct, spectral.samples, atol=1e-9)

    def test_single_modes(self):
        """Test B(e^{2πiax}, e^{2πibx}) = iπ·sgn(b − a)·e^{2πi(a+b)x}."""
        quad = PVQuadrature.periodic(1.0, 16)
        x = np.array([0.1, 0.35, 0.8])
        for a, b in ((1, 3), (2, -1), (2, 2)):
            value = bht_eval(
                lambda s: np.exp(2j * np.pi * a * s),
                lambda s: np.exp(2j * np.pi * b * s),
                x,
                quad,
            )
            expected = 1j * np.pi * np.sign(b - a) * np.exp(2j * np.pi * (a + b) * x)
            assert np.allclose(value, expected, atol=1e-12)

    def test_wraparound_guard(self):
        """Test that nodes leaving the domain raise when wrapping is disabled."""
        f = make_grid_function(1, 32, 1.0, "gaussian")
        with pytest.raises(ValidationFailure, match="wraparound"):
            bht_eval(f, f, np.array([0.5]), PVQuadrature.line(0.6, 10), wrap=False)

    def test_double_transform_matches_multiplier(self):
        """Test the tensor rule against −π²·sgn·sgn on a 2D grid."""
        f = make_grid_function(2, 8, 1.0, "band_limited_random", seed=3)
        g = make_grid_function(2, 8, 1.0, "band_limited_random", seed=4)
        indices = [(0, 0), (2, 4), (7, 1)]
        points = np.array([(i / 8, j / 8) for i, j in indices])
        direct = double_bht_eval(f, g, points, PVQuadrature.periodic(1.0, 8))
        spectral = double_bht_spectral(f, g).samples
        assert np.allclose(direct, [spectral[i, j] for i, j in indices], atol=1e-9)

    def test_double_transform_point_shape(self):
        """Test that points must be pairs."""
        f = chirp_2d(1.0)
        with pytest.raises(ValidationFailure):
            double_bht_eval(f, f, np.zeros((2, 3)), PVQuadrature.line(1.0, 4))


class TestTrilinear:
    """Tests for the trilinear operator V₂."""

    def test_constants_cancel(self):
        """Test that V₂(1, 1, 1) vanishes by oddness in each variable."""
        one = np.ones_like
        quad = PVQuadrature.line(5.0, 40)
        values = v2_eval(one, one, one, np.array([0.0, 1.5]), quad)
        assert np.allclose(values, 0.0, atol=1e-12)

    def test_middle_constant_factorizes(self):
        """Test that V₂(f, 1, h) is the product of two one-variable PV integrals."""
        x0 = 0.7
        quad = PVQuadrature.line(4.0, 60)
        value = v2_eval(np.cos, np.ones_like, np.sin, np.array([x0]), quad)[0]
        first = quad.integrate(lambda t: np.cos(x0 - t))
        second = quad.integrate(lambda t: np.sin(x0 - t))
        assert value == pytest.approx(first * second, rel=1e-10, abs=1e-12)


class TestChirps:
    """Tests for the truncated chirp examples."""

    def test_phase_identity(self):
        """Test that the trilinear chirp phase collapses to x² − 2t₁t₂."""
        rng = np.random.default_rng(0)
        x, t1, t2 = rng.uniform(-5, 5, (3, 100))
        assert np.allclose(chirp_phase_residual(x, t1, t2), 0.0, atol=1e-12)

    def test_chirp_supports(self):
        """Test the truncation of both chirps."""
        assert chirp_1d(2.0)(np.array([2.5]))[0] == 0
        assert chirp_1d(2.0, sign=-1)(np.array([1.0]))[0] == pytest.approx(np.exp(-1j))
        assert chirp_2d(2.0)(np.array([1.0]), np.array([3.0]))[0] == 0

    def test_double_chirp_closed_form(self):
        """Test B_d(f_N, f_N)(x, y) = 4i·e^{2ixy}·Φ(2ab)."""
        n, x, y = 4.0, 0.5, -1.0
        a, b = n - abs(x), n - abs(y)
        value = chirp_double_bht(n, x, y, points_per_wave=32)
        expected = 4j * np.exp(2j * x * y) * phi_integral(2 * a * b)
        assert abs(value - expected) <= 1e-2 * abs(expected)

    def test_double_chirp_outside_support(self):
        """Test that B_d vanishes once |x| ≥ N."""
        assert chirp_double_bht(2.0, 2.0, 0.0) == 0

    def test_v2_chirp_is_finite(self):
        """Test that the trilinear chirp value is a finite complex number."""
        value = chirp_v2(3.0, 0.0)
        assert np.isfinite(value.real) and np.isfinite(value.imag)
        assert abs(value) > 0


class TestPhiOracle:
    """Tests for Φ(T) = ∫₀^T Si(u)/u du and S(N)."""

    def test_small_arguments(self):
        """Test Φ(0) = 0 and the series value of Φ(1)."""
        assert phi_integral(0.0) == 0.0
        series = sum(
            (-1) ** k / (math.factorial(2 * k + 1) * (2 * k + 1) ** 2) for k in range(8)
        )
        assert phi_integral(1.0) == pytest.approx(series, abs=1e-10)

    def test_oracle_limits(self):
        """Test Si(∞) = π/2 and that Φ increases."""
        oracle = SineIntegralOracle()
        assert oracle.si(np.array([1e12]))[0] == pytest.approx(np.pi / 2, abs=1e-10)
        values = [oracle.phi(t) for t in (1.0, 10.0, 100.0, 1000.0)]
        assert values == sorted(values)
        assert len(set(values)) == 4

    def test_negative_argument(self):
        """Test that Φ is only evaluated for T ≥ 0."""
        with pytest.raises(ValidationFailure):
            phi_integral(-1.0)

    def test_asymptotic_constant(self):
        """Test c₀ = γπ/2."""
        assert phi_constant() == pytest.approx(np.euler_gamma * np.pi / 2, abs=1e-6)

    def test_continuity_at_crossover(self):
        """Test that the two evaluation paths meet."""
        below = phi_integral(199.999)
        above = phi_integral(200.001)
        assert above - below == pytest.approx(0.002 * (np.pi / 2) / 200, abs=1e-6)

    def test_large_argument_log_growth(self):
        """Test Φ(T) − (π/2)·ln T → c₀."""
        t = 1e6
        assert phi_integral(t) - np.pi / 2 * math.log(t) == pytest.approx(
            phi_constant(), abs=1e-5
        )

    def test_sine_integral_cross_check(self):
        """Test S(N) = Φ(N²) against direct 2D quadrature."""
        value = sine_integral_S(2.0, cross_check=True)
        assert value == pytest.approx(phi_integral(4.0))

    def test_sine_integral_needs_positive_n(self):
        """Test that S(0) is refused."""
        with pytest.raises(ValidationFailure):
            sine_integral_S(0.0)


class TestGrowthCertificate:
    """Tests for log-growth fits and divergence certificates."""

    def test_fit_exact_log(self):
        """Test the fit on values exactly linear in ln N."""
        n_values = [4, 8, 16, 32]
        fit = fit_log_growth(n_values, [3 + 2 * math.log(n) for n in n_values])
        assert fit.slope == pytest.approx(2.0)
        assert fit.intercept == pytest.approx(3.0)

    def test_fit_needs_three_points(self):
        """Test that two points cannot be fitted."""
        with pytest.raises(ValidationFailure):
            fit_log_growth([2, 4], [1.0, 2.0])

    def test_table_without_fit_is_not_flat(self):
        """Test the unfitted default."""
        assert not GrowthTable("control", (2.0, 2.0, 1.0)).is_flat()

    def test_control_is_flat(self):
        """Test that the plain product of chirps shows no growth."""
        table = divergence_certificate("control", [10, 20, 40, 80])
        assert table.is_flat()
        assert [row[0] for row in table.rows] == [10, 20, 40, 80]

    def test_threads_give_the_same_rows(self):
        """Test that the threaded table matches the serial one."""
        serial = divergence_certificate("control", [10, 20, 40])
        threaded = divergence_certificate("control", [10, 20, 40], threads=2)
        assert threaded.rows == serial.rows

    def test_sine_integral_grows_like_pi_log(self):
        """Test slope π for S(N) against ln N."""
        table = divergence_certificate("sine", [10, 100, 1000])
        assert table.fit.slope == pytest.approx(np.pi, abs=1e-3)
        assert not table.is_flat()

    def test_double_chirp_grows(self):
        """Test that the double bilinear Hilbert transform on chirps is not flat."""
        table = divergence_certificate("bd", [4, 8, 16], samples=1)
        assert table.fit.slope > 0
        assert not table.is_flat()

    def test_validation(self):
        """Test operator, N sequence and exponent checks."""
        with pytest.raises(ValidationFailure):
            divergence_certificate("bht", [4, 8, 16])
        with pytest.raises(ValidationFailure):
            divergence_certificate("control", [16, 8, 4])
        with pytest.raises(ValidationFailure):
            divergence_certificate("control", [4, 8])
        with pytest.raises(ValidationFailure, match="Hölder"):
            divergence_certificate("bd", [4, 8, 16], exponents=(2.0, 2.0, 2.0))
        with pytest.raises(ValidationFailure, match="4 exponents"):
            divergence_certificate("v2", [4, 8, 16], exponents=(2.0, 2.0, 1.0))
