"""
Unit tests for the filter bank and its Perfect Reconstruction losses.
"""
import numpy as np
import pytest

from filterbank import (
    HAAR_TAP,
    FilterBank,
    Mode,
    alias_residual,
    alternate_signs,
    as_taps,
    dist_residual,
    haar_bank,
    poly_conv,
    pr_grad,
    pr_loss,
    pr_terms,
)
from utils.exceptions import ModeMismatchError

S = HAAR_TAP


def norm2(values):
    return float(np.dot(values, values))


def fd_alpha(alpha, step=1e-6):
    bank = haar_bank(Mode.SCALE, alpha)
    return (pr_loss(bank.with_alpha(alpha + step)) - pr_loss(bank.with_alpha(alpha - step))) / (2 * step)


@pytest.mark.unit
class TestHaarBank:
    """Tests for haar_bank construction."""

    def test_pr_at_alpha_one(self):
        """Test the Haar bank satisfies PR exactly at alpha = 1."""
        assert pr_loss(haar_bank(Mode.SCALE, 1.0)) < 1e-24

    def test_loss_at_alpha_zero(self):
        """Test the zero-initialized scale bank starts at loss 2."""
        assert pr_loss(haar_bank(Mode.SCALE, 0.0)) == pytest.approx(2.0, abs=1e-12)

    def test_whole_mode_starts_at_zero_taps(self):
        """Test whole mode zero-initializes the free high-pass."""
        bank = haar_bank(Mode.WHOLE)
        assert np.array_equal(bank.hi_a, np.zeros(2))
        assert pr_loss(bank) == pytest.approx(2.0, abs=1e-12)

    def test_taps_have_haar_magnitude(self):
        """Test every fixed tap has magnitude 1/sqrt(2)."""
        bank = haar_bank()
        for taps in (bank.lo_a, bank.hi_a_base, bank.lo_s, bank.hi_s):
            assert np.allclose(np.abs(taps), S)

    def test_base_high_pass_is_read_only(self):
        """Test the frozen base high-pass cannot be mutated."""
        bank = haar_bank(Mode.SCALE, 0.3)
        with pytest.raises(ValueError):
            bank.hi_a_base[0] = 1.0
        assert np.array_equal(bank.with_alpha(0.7).hi_a_base, [S, -S])

    def test_scale_mode_effective_high_pass(self):
        """Test the effective high-pass is alpha times the base."""
        bank = haar_bank(Mode.SCALE, 0.25)
        assert np.allclose(bank.hi_a, [0.25 * S, -0.25 * S])
        assert bank.effective_alpha == 0.25

    def test_whole_mode_effective_alpha_projection(self):
        """Test whole-mode alpha-equivalent projects onto the base."""
        bank = haar_bank(Mode.WHOLE).with_hi_free([0.5 * S, -0.5 * S])
        assert bank.effective_alpha == pytest.approx(0.5)

    def test_mode_mismatch_updates(self):
        """Test mode-specific updates are rejected in the other mode."""
        with pytest.raises(ModeMismatchError):
            haar_bank(Mode.WHOLE).with_alpha(0.5)
        with pytest.raises(ModeMismatchError):
            haar_bank(Mode.SCALE).with_hi_free([0.0, 0.0])

    def test_unequal_tap_lengths_rejected(self):
        """Test all fixed tap sequences must have one length."""
        with pytest.raises(ValueError):
            FilterBank(lo_a=[S, S], hi_a_base=[S, -S, 0.0], lo_s=[S, S], hi_s=[-S, S])

    def test_non_finite_taps_rejected(self):
        """Test taps must be finite and non-empty."""
        with pytest.raises(ValueError):
            as_taps([1.0, np.nan])
        with pytest.raises(ValueError):
            as_taps([])

    def test_mode_parse(self):
        """Test mode parsing is case-insensitive and strict."""
        assert Mode.parse('Whole') is Mode.WHOLE
        with pytest.raises(ValueError, match='mode'):
            Mode.parse('lattice')


@pytest.mark.unit
class TestPolynomialHelpers:
    """Tests for poly_conv and alternate_signs."""

    def test_identity_element(self):
        assert np.array_equal(poly_conv([1.0], [0.3, -0.7]), [0.3, -0.7])

    def test_haar_products(self):
        """Test hand-expanded Haar products."""
        assert np.allclose(poly_conv([S, S], [S, S]), [0.5, 1.0, 0.5], atol=1e-15)
        assert np.allclose(poly_conv([S, -S], [S, S]), [0.5, 0.0, -0.5], atol=1e-15)

    def test_length(self):
        assert len(poly_conv(np.ones(3), np.ones(4))) == 6

    def test_commutative_and_associative(self):
        """Test algebraic laws on random inputs."""
        rng = np.random.default_rng(7)
        for _ in range(20):
            a, b, c = (rng.standard_normal(rng.integers(1, 6)) for _ in range(3))
            assert np.max(np.abs(poly_conv(a, b) - poly_conv(b, a))) < 1e-12
            left = poly_conv(poly_conv(a, b), c)
            right = poly_conv(a, poly_conv(b, c))
            assert np.max(np.abs(left - right)) < 1e-12

    def test_alternate_signs(self):
        """Test z -> -z flips odd delays only."""
        assert np.array_equal(alternate_signs([S, -S]), [S, S])
        assert np.array_equal(alternate_signs([0.4]), [0.4])

    def test_alternate_signs_involution(self):
        rng = np.random.default_rng(3)
        taps = rng.standard_normal(7)
        assert np.array_equal(alternate_signs(alternate_signs(taps)), taps)


@pytest.mark.unit
class TestResiduals:
    """Tests for the alias and distortion residuals."""

    def test_zero_at_pr(self):
        bank = haar_bank(Mode.SCALE, 1.0)
        assert np.allclose(alias_residual(bank), 0.0, atol=1e-15)
        assert np.allclose(dist_residual(bank), 0.0, atol=1e-15)

    @pytest.mark.parametrize('alpha', [0.0, 0.5, -1.0, 1.5])
    def test_closed_forms(self, alpha):
        """Test alias norm 0.5(1-a)^2 and distortion norm 1.5(1-a)^2."""
        bank = haar_bank(Mode.SCALE, alpha)
        assert norm2(alias_residual(bank)) == pytest.approx(0.5 * (1 - alpha) ** 2, abs=1e-12)
        assert norm2(dist_residual(bank)) == pytest.approx(1.5 * (1 - alpha) ** 2, abs=1e-12)

    def test_alias_residual_shape_at_zero(self):
        """Test the alpha = 0 alias residual is the L(z)H(z)-shaped sequence."""
        assert np.allclose(alias_residual(haar_bank(Mode.SCALE, 0.0)), [0.5, 0.0, -0.5], atol=1e-15)

    def test_distortion_uses_unit_delay(self):
        """Test the 2z^-1 target sits at delay 1 for 2-tap filters."""
        bank = haar_bank(Mode.SCALE, 1.0)
        assert bank.delay == 1
        assert np.allclose(dist_residual(haar_bank(Mode.SCALE, 0.0)), [0.5, -1.0, 0.5], atol=1e-15)

    def test_pr_terms(self):
        alias, dist = pr_terms(haar_bank(Mode.SCALE, 0.0))
        assert alias == pytest.approx(0.5, abs=1e-12)
        assert dist == pytest.approx(1.5, abs=1e-12)


@pytest.mark.unit
class TestPRLoss:
    """Tests for pr_loss and pr_grad."""

    def test_closed_form_on_grid(self):
        """Test pr_loss(alpha) = 2(1 - alpha)^2 on a grid over [-2, 2]."""
        for alpha in np.linspace(-2.0, 2.0, 41):
            assert abs(pr_loss(haar_bank(Mode.SCALE, alpha)) - 2 * (1 - alpha) ** 2) < 1e-12

    @pytest.mark.parametrize('alpha', [-1, -0.5, 0, 0.25, 0.5, 0.75, 1, 1.5])
    def test_acceptance_points(self, alpha):
        """Test loss and gradient closed forms at the acceptance points."""
        bank = haar_bank(Mode.SCALE, alpha)
        assert abs(pr_loss(bank) - 2 * (1 - alpha) ** 2) < 1e-12
        assert abs(pr_grad(bank).alpha - (-4 * (1 - alpha))) < 1e-12

    def test_loss_is_non_negative(self):
        rng = np.random.default_rng(11)
        for taps in rng.standard_normal((20, 2)):
            assert pr_loss(haar_bank(Mode.WHOLE).with_hi_free(taps)) >= 0.0

    def test_gradient_values(self):
        assert pr_grad(haar_bank(Mode.SCALE, 0.0)).alpha == pytest.approx(-4.0, abs=1e-12)
        assert pr_grad(haar_bank(Mode.SCALE, 1.0)).alpha == pytest.approx(0.0, abs=1e-12)
        assert pr_grad(haar_bank(Mode.SCALE, 0.0)).hi_a_free is None

    @pytest.mark.parametrize('alpha', [-1.3, 0.0, 0.37, 0.9, 2.0])
    def test_scale_gradient_matches_finite_differences(self, alpha):
        analytic = pr_grad(haar_bank(Mode.SCALE, alpha)).alpha
        numeric = fd_alpha(alpha)
        assert abs(analytic - numeric) <= 1e-6 * max(abs(analytic), 1.0)

    def test_whole_gradient_matches_finite_differences(self):
        """Test per-tap gradients against central differences (step 1e-6)."""
        rng = np.random.default_rng(5)
        step = 1e-6
        for taps in rng.standard_normal((10, 2)):
            bank = haar_bank(Mode.WHOLE).with_hi_free(taps)
            analytic = pr_grad(bank).hi_a_free
            for k in range(2):
                bump = np.zeros(2)
                bump[k] = step
                numeric = (pr_loss(bank.with_hi_free(taps + bump))
                           - pr_loss(bank.with_hi_free(taps - bump))) / (2 * step)
                assert abs(analytic[k] - numeric) <= 1e-6 * max(abs(analytic[k]), 1.0)

    def test_whole_mode_minimum_at_base(self):
        """Test the whole-mode loss vanishes at the Haar high-pass."""
        bank = haar_bank(Mode.WHOLE).with_hi_free([S, -S])
        assert pr_loss(bank) < 1e-24
        assert np.allclose(pr_grad(bank).hi_a_free, 0.0, atol=1e-12)
