"""Tests for the paraproduct calculus and the Kato-Ponce harness."""

import math

import numpy as np
import pytest

from biparam_paraproducts.errors import ValidationFailure
from biparam_paraproducts.grid import make_grid_function, outer
from biparam_paraproducts.multipliers import apply_multiplier, make_operator
from biparam_paraproducts.paraproducts import (
    KATO_PONCE_HEADER,
    KatoPonceRow,
    apply_paraproduct,
    build_biparameter_spec,
    build_paraproduct_spec,
    commute_derivative,
    homogeneous_derivative,
    induced_symbol,
    kato_ponce_family,
    kato_ponce_report,
    partial_derivative,
    product_decomposition,
    validate_holder,
)


def _random(dim, n, seed):
    return make_grid_function(dim, n, 1.0, "band_limited_random", seed=seed, real=True)


class TestProductDecomposition:
    """Tests for the exact split f·g = Π₀ + Π₁ + Π₂ + Π₃."""

    def test_one_parameter_reconstruction(self):
        """Test that the four paraproducts add up to the product."""
        f = make_grid_function(1, 64, 1.0, "band_limited_random", seed=1, bandwidth=30)
        g = make_grid_function(1, 64, 1.0, "band_limited_random", seed=2, bandwidth=30)
        parts = product_decomposition(f, g)
        total = sum(p.samples for p in parts.values())
        assert np.allclose(total, f.samples * g.samples, atol=1e-12)

    def test_two_parameter_reconstruction(self):
        """Test that the sixteen tensor paraproducts add up to the product."""
        f, g = _random(2, 16, 3), _random(2, 16, 4)
        parts = product_decomposition(f, g)
        assert len(parts) == 16
        total = sum(p.samples for p in parts.values())
        assert np.allclose(total, f.samples * g.samples, atol=1e-12)

    def test_type_index_range(self):
        """Test that only types 0..3 exist."""
        with pytest.raises(ValidationFailure):
            build_paraproduct_spec(4, 32)

    def test_geometry_mismatch(self):
        """Test that a spec only accepts inputs on its own grid."""
        spec = build_paraproduct_spec(1, 32)
        f, g = _random(1, 64, 1), _random(1, 64, 2)
        with pytest.raises(ValidationFailure):
            apply_paraproduct(spec, f, g)

    def test_slot_kinds(self):
        """Test that Π₁ carries a Φ-type first slot and a Ψ-type second slot."""
        spec = build_paraproduct_spec(1, 64)
        scale = spec.scales[-1]
        assert spec.slot_kind("u", scale) == "phi"
        assert spec.slot_kind("v", scale) == "psi"

    def test_high_high_support_from_disjoint_annuli(self):
        """Test that Π₀ only reaches output frequencies its shells allow."""
        n = 128
        k = np.abs(np.fft.fftfreq(n, d=1.0 / n))
        low_band = ((k >= 16) & (k <= 20)).astype(float)
        high_band = ((k >= 40) & (k <= 48)).astype(float)
        f, g = (
            make_grid_function(
                1, n, 1.0, "band_limited_random", seed=seed, bandwidth=n // 2
            ).multiply_spectrum(band)
            for seed, band in ((11, low_band), (12, high_band))
        )
        spec = build_paraproduct_spec(0, n)
        out = np.abs(apply_paraproduct(spec, f, g).spectrum())
        allowed = np.zeros(n, dtype=bool)
        for scale in spec.scales:
            s = spec.slots[scale]
            first = np.flatnonzero(s.u * low_band)
            second = np.flatnonzero(s.v * high_band)
            sums = np.unique((first[:, None] + second[None, :]) % n)
            allowed[sums[s.w[sums] != 0]] = True
        assert allowed.any() and not allowed.all()
        assert out.max() > 0
        assert np.max(out[~allowed]) <= 1e-12 * out.max()

    @pytest.mark.parametrize("types", [(1, 2), (0, 3), (2, 2)])
    def test_tensor_inputs_split(self, types):
        """Test Π_{i,j}(f′⊗f″, g′⊗g″) = Π_i(f′, g′) ⊗ Π_j(f″, g″)."""
        n = 32
        f1, f2, g1, g2 = (_random(1, n, seed) for seed in (21, 22, 23, 24))
        spec = build_biparameter_spec(types, n)
        joint = apply_paraproduct(spec, outer(f1, f2), outer(g1, g2))
        split = outer(
            apply_paraproduct(spec.first, f1, g1),
            apply_paraproduct(spec.second, f2, g2),
        )
        assert np.max(np.abs(joint.samples - split.samples)) <= 1e-11


class TestInducedSymbol:
    """Tests for the symbol of a paraproduct."""

    def test_symbol_reproduces_paraproduct(self):
        """Test T_m(f, g) = Π(f, g) for the induced symbol."""
        spec = build_paraproduct_spec(1, 32)
        f, g = _random(1, 32, 5), _random(1, 32, 6)
        m = induced_symbol(spec)
        direct = apply_paraproduct(spec, f, g)
        for strategy in ("full_sum", "separable_fast"):
            via_symbol = apply_multiplier(make_operator(m, strategy), f, g)
            assert np.allclose(via_symbol.samples, direct.samples, atol=1e-10)

    def test_tensor_symbol(self):
        """Test the bi-parameter symbol on a 2D grid."""
        spec = build_biparameter_spec((1, 2), 8)
        f, g = _random(2, 8, 7), _random(2, 8, 8)
        m = induced_symbol(spec)
        assert (m.arity, m.freq_dim) == (2, 2)
        via_symbol = apply_multiplier(make_operator(m), f, g)
        direct = apply_paraproduct(spec, f, g)
        assert np.allclose(via_symbol.samples, direct.samples, atol=1e-10)


class TestCommuteDerivative:
    """Tests for moving homogeneous derivatives through paraproducts."""

    def test_type_one_moves_to_second_input(self):
        """Test D^α Π₁(f, g) = Π₁′(f, D^α g)."""
        spec = build_paraproduct_spec(1, 64)
        f, g = _random(1, 64, 1), _random(1, 64, 2)
        alpha = 1.5
        lhs = homogeneous_derivative(apply_paraproduct(spec, f, g), alpha)
        moved = commute_derivative(spec, alpha)
        rhs = apply_paraproduct(moved, f, homogeneous_derivative(g, alpha))
        assert np.allclose(lhs.samples, rhs.samples, atol=1e-9)
        assert moved.derivative_shifts == (("v", alpha),)

    def test_type_two_moves_to_first_input(self):
        """Test D^α Π₂(f, g) = Π₂′(D^α f, g)."""
        spec = build_paraproduct_spec(2, 64)
        f, g = _random(1, 64, 3), _random(1, 64, 4)
        lhs = homogeneous_derivative(apply_paraproduct(spec, f, g), 1.0)
        rhs = apply_paraproduct(
            commute_derivative(spec, 1.0), homogeneous_derivative(f, 1.0), g
        )
        assert np.allclose(lhs.samples, rhs.samples, atol=1e-9)

    @pytest.mark.parametrize("alpha", [0.25, 0.5, 1.0, 1.5])
    @pytest.mark.parametrize("type_index", [1, 2])
    def test_order_grid(self, alpha, type_index):
        """Test the one-parameter identity to 1e-9 relative error on 256 points."""
        spec = build_paraproduct_spec(type_index, 256)
        f, g = _random(1, 256, 31), _random(1, 256, 32)
        lhs = homogeneous_derivative(apply_paraproduct(spec, f, g), alpha)
        moved = commute_derivative(spec, alpha)
        if type_index == 1:
            rhs = apply_paraproduct(moved, f, homogeneous_derivative(g, alpha))
        else:
            rhs = apply_paraproduct(moved, homogeneous_derivative(f, alpha), g)
        error = np.max(np.abs(lhs.samples - rhs.samples))
        assert error <= 1e-9 * np.max(np.abs(lhs.samples))

    @pytest.mark.parametrize(
        "alpha, beta", [(0.25, 1.5), (0.5, 1.0), (1.0, 0.5), (1.5, 0.25)]
    )
    def test_biparameter_order_grid(self, alpha, beta):
        """Test the bi-parameter identity to 1e-9 relative error on 128²."""
        spec = build_biparameter_spec((1, 2), 128)
        f, g = _random(2, 128, 33), _random(2, 128, 34)
        lhs = homogeneous_derivative(apply_paraproduct(spec, f, g), alpha, beta)
        rhs = apply_paraproduct(
            commute_derivative(spec, alpha, beta),
            partial_derivative(f, beta, 1),
            partial_derivative(g, alpha, 0),
        )
        error = np.max(np.abs(lhs.samples - rhs.samples))
        assert error <= 1e-9 * np.max(np.abs(lhs.samples))

    def test_phi_slot_is_refused(self):
        """Test that D^{−α} cannot act on a slot containing frequency 0."""
        spec = build_paraproduct_spec(1, 64)
        with pytest.raises(ValidationFailure, match="Φ-type"):
            commute_derivative(spec, 1.0, target="u")

    def test_type_zero_needs_target(self):
        """Test that Π₀ has no default target."""
        spec = build_paraproduct_spec(0, 32)
        with pytest.raises(ValidationFailure):
            commute_derivative(spec, 1.0)

    def test_biparameter_commutation(self):
        """Test D₁^α D₂^β Π_{1,2}(f, g) = Π′(D₂^β f, D₁^α g)."""
        spec = build_biparameter_spec((1, 2), 16)
        f, g = _random(2, 16, 5), _random(2, 16, 6)
        alpha, beta = 1.0, 0.5
        lhs = homogeneous_derivative(apply_paraproduct(spec, f, g), alpha, beta)
        moved = commute_derivative(spec, alpha, beta)
        rhs = apply_paraproduct(
            moved, partial_derivative(f, beta, 1), partial_derivative(g, alpha, 0)
        )
        assert np.allclose(lhs.samples, rhs.samples, atol=1e-8)

    def test_orders_must_be_positive(self):
        """Test that α ≤ 0 is refused."""
        spec = build_paraproduct_spec(1, 32)
        with pytest.raises(ValidationFailure):
            commute_derivative(spec, 0.0)


class TestKatoPonce:
    """Tests for the fractional Leibniz harness."""

    def test_holder_violation(self):
        """Test that 1/r ≠ 1/p + 1/q is refused."""
        with pytest.raises(ValidationFailure, match="Hölder"):
            validate_holder(2.0, 2.0, 2.0)
        with pytest.raises(ValidationFailure):
            validate_holder(1.0, 2.0, 2.0 / 3.0)

    def test_one_parameter_report(self):
        """Test finite ratios and the table layout over the Gaussian family."""
        family = kato_ponce_family("gaussian", 64, count=3)
        report = kato_ponce_report(family, (2.0, 2.0, 1.0), alpha=1.0)
        assert len(report.rows) == 3
        assert all(np.isfinite(row.ratio) and row.ratio > 0 for row in report.rows)
        table = report.table()
        assert len(table[0]) == len(KATO_PONCE_HEADER)
        # one-parameter rows pad the unused terms with zeros
        assert table[0][4:6] == [0.0, 0.0]

    def test_two_parameter_report(self):
        """Test the four-term right-hand side in 2D."""
        family = kato_ponce_family("random", 16, dim=2, count=2)
        report = kato_ponce_report(family, (4.0, 4.0, 2.0), alpha=1.0, beta=1.0)
        assert all(len(row.rhs_terms) == 4 for row in report.rows)
        assert report.max_ratio > 0

    def test_per_term_exponents(self):
        """Test one (p_j, q_j) pair per term sharing r."""
        family = kato_ponce_family("gaussian", 64, count=2)
        report = kato_ponce_report(
            family, [(2.0, np.inf), (np.inf, 2.0)], alpha=0.5, r=2.0
        )
        assert report.term_exponents == [(2.0, np.inf), (np.inf, 2.0)]

    def test_two_dimensional_needs_beta(self):
        """Test that 2D runs require β."""
        family = kato_ponce_family("random", 16, dim=2, count=1)
        with pytest.raises(ValidationFailure):
            kato_ponce_report(family, (2.0, 2.0, 1.0), alpha=1.0)

    def test_empty_family(self):
        """Test that an empty family is refused."""
        with pytest.raises(ValidationFailure):
            kato_ponce_report([], (2.0, 2.0, 1.0), alpha=1.0)

    def test_unknown_family(self):
        """Test that unknown family names are refused."""
        with pytest.raises(ValidationFailure):
            kato_ponce_family("uniform", 32)

    def test_dilation_invariance(self):
        """Test that the ratio is scale invariant within 2% on a 256-point grid."""
        family = kato_ponce_family("dilated", 256)
        report = kato_ponce_report(family, (2.0, 2.0, 1.0), alpha=1.0)
        ratios = [row.ratio for row in report.rows]
        assert len(ratios) == 3
        assert max(ratios) / min(ratios) - 1 <= 0.02

    def test_dilated_family_needs_fine_grid(self):
        """Test that the dilated family refuses grids too coarse for its Gaussian."""
        with pytest.raises(ValidationFailure, match="N ≥ 256"):
            kato_ponce_family("dilated", 64)

    def test_vanishing_bound_ratio(self):
        """Test an infinite ratio for a positive LHS over a zero RHS."""
        assert KatoPonceRow("a", 1.0, [0.0, 0.0]).ratio == math.inf
        assert KatoPonceRow("b", 0.0, [0.0, 0.0]).ratio == 0.0
        assert KatoPonceRow("c", 1.0, [1.0, 3.0]).ratio == 0.25
