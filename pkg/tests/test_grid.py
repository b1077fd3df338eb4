"""Tests for grid functions, norms and the Littlewood-Paley partition."""

import numpy as np
import pytest

from biparam_paraproducts.errors import ValidationFailure
from biparam_paraproducts.grid import (
    GridFunction,
    dilate,
    dyadic_maximal_1d,
    evaluate_at,
    fold_frequencies,
    fourier_transform,
    integer_frequencies,
    lp_partition,
    make_grid_function,
    outer,
    quasi_norm,
    smooth_step,
    translate,
    weak_l1,
)


class TestGridFunction:
    """Tests for the GridFunction container."""

    def test_rejects_non_power_of_two(self):
        """Test that N must be a power of two."""
        with pytest.raises(ValidationFailure):
            GridFunction(dim=1, n_samples=12, samples=np.zeros(12))

    def test_rejects_tiny_grid(self):
        """Test that grids below eight samples are refused."""
        with pytest.raises(ValidationFailure):
            GridFunction(dim=1, n_samples=4, samples=np.zeros(4))

    def test_rejects_shape_mismatch(self):
        """Test that the sample array must match (N,)*dim."""
        with pytest.raises(ValidationFailure):
            GridFunction(dim=2, n_samples=8, samples=np.zeros(8))

    def test_spectrum_is_unitary(self):
        """Test Parseval for the orthonormal DFT."""
        f = make_grid_function(2, 16, 1.0, "band_limited_random", seed=3)
        energy = np.sum(np.abs(f.samples) ** 2)
        assert np.sum(np.abs(f.spectrum()) ** 2) == pytest.approx(energy, rel=1e-12)

    def test_geometry_mismatch_raises(self):
        """Test that arithmetic refuses functions on different grids."""
        f = make_grid_function(1, 16, 1.0, "constant")
        g = make_grid_function(1, 16, 2.0, "constant")
        with pytest.raises(ValidationFailure):
            f + g

    def test_scalar_multiplication(self):
        """Test left and right scalar products."""
        f = make_grid_function(1, 8, 1.0, "constant", c=2.0)
        assert np.allclose((3 * f).samples, 6.0)
        assert np.allclose((f * 0.5).samples, 1.0)

    def test_outer_product(self):
        """Test the tensor product of two 1D functions."""
        f = make_grid_function(1, 8, 1.0, "constant", c=2.0)
        g = make_grid_function(1, 8, 1.0, "constant", c=3.0)
        fg = outer(f, g)
        assert fg.dim == 2
        assert np.allclose(fg.samples, 6.0)

    def test_fourier_round_trip(self):
        """Test that the inverse transform undoes the forward one."""
        f = make_grid_function(1, 32, 1.0, "gaussian")
        spectral = fourier_transform(f, "forward")
        assert spectral.spectral
        back = fourier_transform(spectral, "inverse")
        assert np.allclose(back.samples, f.samples, atol=1e-12)

    def test_spectrum_matches_direct_dft(self):
        """Test the FFT spectrum and Parseval against an O(N²) direct sum."""
        n = 64
        f = make_grid_function(1, n, 1.0, "band_limited_random", seed=11)
        j = np.arange(n)
        kernel = np.exp(-2j * np.pi * np.outer(j, j) / n) / np.sqrt(n)
        direct = kernel @ f.samples
        assert np.max(np.abs(f.spectrum() - direct)) <= 1e-10
        energy = np.sum(np.abs(f.samples) ** 2)
        assert abs(np.sum(np.abs(direct) ** 2) - energy) <= 1e-10 * energy

    def test_frequency_convention(self):
        """Test that the Nyquist index is reported as −N/2, as fftfreq does."""
        k = integer_frequencies(8)
        assert -4 in k
        assert 4 not in k
        assert np.array_equal(k, np.fft.fftfreq(8, d=1.0 / 8).astype(int))

    def test_fold_frequencies(self):
        """Test reduction of summed frequencies into the grid range."""
        folded = fold_frequencies(np.array([4, 5, -5, 12, -4, 3]), 8)
        assert folded.tolist() == [-4, -3, 3, -4, -4, 3]


class TestGenerators:
    """Tests for make_grid_function."""

    def test_unknown_generator(self):
        """Test that unknown generator names are rejected."""
        with pytest.raises(ValidationFailure):
            make_grid_function(1, 16, 1.0, "sawtooth")

    def test_band_limited_random_support(self):
        """Test sup normalisation and the spectral cutoff."""
        f = make_grid_function(1, 64, 1.0, "band_limited_random", seed=1, bandwidth=5)
        assert np.max(np.abs(f.samples)) == pytest.approx(1.0)
        k = np.abs(np.fft.fftfreq(64, d=1.0 / 64))
        assert np.max(np.abs(np.fft.fft(f.samples)[k > 5])) < 1e-9

    def test_band_limited_random_is_deterministic(self):
        """Test that the same seed gives the same samples."""
        f = make_grid_function(2, 16, 1.0, "band_limited_random", seed=7)
        g = make_grid_function(2, 16, 1.0, "band_limited_random", seed=7)
        assert np.array_equal(f.samples, g.samples)

    def test_zero_mean_option(self):
        """Test that zero_mean removes the constant mode."""
        f = make_grid_function(
            1, 32, 1.0, "band_limited_random", seed=2, zero_mean=True
        )
        assert abs(np.mean(f.samples)) < 1e-12

    def test_indicator_measure(self):
        """Test the measure of an indicator of [1/4, 3/4)²."""
        f = make_grid_function(2, 32, 2.0, "indicator_rect")
        area = np.sum(f.samples.real) * f.cell_measure
        assert area == pytest.approx(1.0)

    def test_chirp_needs_matching_dimension(self):
        """Test that the chirp generators check their dimension."""
        with pytest.raises(ValidationFailure):
            make_grid_function(1, 16, 1.0, "chirp_xy")
        with pytest.raises(ValidationFailure):
            make_grid_function(2, 16, 1.0, "chirp_x2")

    def test_chirp_has_unit_modulus_inside(self):
        """Test |e^{ixy}| = 1 on the truncation square."""
        f = make_grid_function(2, 32, 8.0, "chirp_xy", n_cut=2.0)
        magnitude = np.abs(f.samples)
        assert set(np.round(np.unique(magnitude), 12)) <= {0.0, 1.0}
        assert np.count_nonzero(magnitude) > 0


class TestNorms:
    """Tests for quasi-norms."""

    def test_constant_lp_norm(self):
        """Test ‖c‖_p = |c|·L^{1/p}."""
        f = make_grid_function(1, 16, 4.0, "constant", c=3.0)
        assert quasi_norm(f, 2) == pytest.approx(3.0 * 4.0**0.5)
        assert quasi_norm(f, 0.5) == pytest.approx(3.0 * 4.0**2)
        assert quasi_norm(f, float("inf")) == pytest.approx(3.0)

    def test_constant_weak_l1(self):
        """Test that the weak-L¹ quasi-norm of a constant is |c|·L."""
        f = make_grid_function(1, 16, 4.0, "constant", c=3.0)
        assert quasi_norm(f, "weak_L1") == pytest.approx(12.0)

    def test_weak_l1_of_decreasing_profile(self):
        """Test max_i g_(i)·i·cell on a hand-computed example."""
        values = np.array([1.0, 4.0, 2.0, 0.5])
        # sorted: 4, 2, 1, 0.5 -> 4·1, 2·2, 1·3, 0.5·4
        assert weak_l1(values, 0.5) == pytest.approx(2.0)

    def test_rejects_nonpositive_exponent(self):
        """Test that p ≤ 0 is refused."""
        f = make_grid_function(1, 16, 1.0, "constant")
        with pytest.raises(ValidationFailure):
            quasi_norm(f, 0)

    @pytest.mark.parametrize("mode", [0.5, 1.0, 2.0, float("inf"), "weak_L1"])
    def test_homogeneity(self, mode):
        """Test ‖λf‖ = |λ|·‖f‖ for every quasi-norm."""
        f = make_grid_function(2, 16, 2.0, "band_limited_random", seed=5)
        scaled = f * -2.5
        assert quasi_norm(scaled, mode) == pytest.approx(
            2.5 * quasi_norm(f, mode), rel=1e-12
        )

    def test_l2_matches_direct_sum(self):
        """Test the L² norm against an explicit Riemann sum."""
        f = make_grid_function(1, 64, 3.0, "band_limited_random", seed=2)
        direct = np.sqrt(np.sum(np.abs(f.samples) ** 2) * (3.0 / 64))
        assert abs(quasi_norm(f, 2) - direct) <= 1e-12 * direct


class TestTransforms:
    """Tests for translation, dilation, interpolation and maximal functions."""

    def test_translate_full_period(self):
        """Test that a shift by N is the identity."""
        f = make_grid_function(1, 32, 1.0, "gaussian")
        assert np.array_equal(translate(f, 32).samples, f.samples)

    def test_translate_moves_peak(self):
        """Test τ_h f(x) = f(x − h) in cells."""
        f = make_grid_function(1, 32, 1.0, "gaussian")
        peak = int(np.argmax(np.abs(f.samples)))
        assert int(np.argmax(np.abs(translate(f, 3).samples))) == peak + 3

    def test_unit_dilation_is_identity(self):
        """Test D_1 f = f."""
        f = make_grid_function(1, 32, 1.0, "gaussian", width=0.1)
        assert np.allclose(dilate(f, 1.0).samples, f.samples, atol=1e-10)

    def test_dilation_factor_must_be_positive(self):
        """Test that non-positive factors are refused."""
        f = make_grid_function(1, 32, 1.0, "gaussian")
        with pytest.raises(ValidationFailure):
            dilate(f, 0.0)

    def test_evaluate_at_grid_points(self):
        """Test that interpolation reproduces the samples."""
        f = make_grid_function(1, 32, 2.0, "band_limited_random", seed=4)
        values = evaluate_at(f, f.coordinates())
        assert np.allclose(values, f.samples, atol=1e-12)

    def test_evaluate_at_off_grid(self):
        """Test exact interpolation of a single exponential between nodes."""
        n, length = 16, 2.0
        x = np.arange(n) * length / n
        f = GridFunction(
            dim=1,
            n_samples=n,
            samples=np.exp(2j * np.pi * 3 * x / length),
            domain_length=length,
        )
        points = np.array([0.0625, 0.3, 1.77])
        expected = np.exp(2j * np.pi * 3 * points / length)
        assert np.allclose(evaluate_at(f, points), expected, atol=1e-12)

    def test_evaluate_at_rejects_2d(self):
        """Test that evaluate_at only takes 1D functions."""
        f = make_grid_function(2, 16, 1.0, "constant")
        with pytest.raises(ValidationFailure):
            evaluate_at(f, np.zeros(3))

    def test_dyadic_maximal_dominates(self):
        """Test M f ≥ |f| and M c = |c|."""
        f = make_grid_function(1, 64, 1.0, "band_limited_random", seed=9)
        assert np.all(dyadic_maximal_1d(f).samples.real >= np.abs(f.samples) - 1e-15)
        c = make_grid_function(1, 64, 1.0, "constant", c=-2.0)
        assert np.allclose(dyadic_maximal_1d(c).samples.real, 2.0)

    def test_smooth_step_values(self):
        """Test the endpoints and the midpoint of the C^∞ step."""
        values = smooth_step(np.array([-1.0, 0.0, 0.5, 1.0, 2.0]))
        assert np.allclose(values, [1.0, 1.0, 0.5, 0.0, 0.0])


class TestLPPartition:
    """Tests for the Littlewood-Paley partition of unity."""

    @pytest.mark.parametrize("n", [8, 64, 256])
    def test_partition_of_unity(self, n):
        """Test Σ_k ψ̂_k = 1 away from zero and the low-pass at zero."""
        lp = lp_partition(n)
        total = lp.partial_sum(lp.max_scale)
        assert np.max(np.abs(total - 1.0)) <= 1e-14
        assert lp.low_pass(-5)[0] == 1.0
        assert lp.partition_certificate <= 1e-14

    def test_narrow_scale_range(self):
        """Test that a scale range missing the Nyquist band is refused."""
        with pytest.raises(ValidationFailure):
            lp_partition(64, scale_range=range(0, 3))

    def test_profiles_are_nonnegative(self):
        """Test 0 ≤ ψ̂_k ≤ 1."""
        lp = lp_partition(128)
        for k in lp.scales:
            profile = lp.profile(k)
            assert np.all(profile >= -1e-15)
            assert np.all(profile <= 1 + 1e-15)

    def test_unknown_scale_is_zero(self):
        """Test that profiles outside the family vanish."""
        lp = lp_partition(32)
        assert not np.any(lp.profile(40))
        assert not np.any(lp.partial_sum(-2))

    def test_apply_needs_axis_in_2d(self):
        """Test that 2D application asks for an axis."""
        lp = lp_partition(16)
        f = make_grid_function(2, 16, 1.0, "gaussian")
        with pytest.raises(ValidationFailure):
            lp.apply(f, 1)
        assert lp.apply(f, 1, axis=0).shape == (16, 16)


    @pytest.mark.parametrize("k", [6, 7, 8])
    def test_kernel_spatial_decay(self, k):
        """Test that ψ_k is concentrated within a few multiples of 2^{−k}."""
        n = 1024
        kernel = np.abs(lp_partition(n).spatial_profile(k).samples)
        peak = kernel[0]
        assert np.argmax(kernel) == 0
        j = np.arange(n)
        distance = np.minimum(j, n - j) / n
        assert np.max(kernel[distance >= 20 * 2.0**-k]) <= 1e-5 * peak
        assert np.max(kernel[distance >= 24 * 2.0**-k]) <= 1e-6 * peak
