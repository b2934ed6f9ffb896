"""Importance integrals against their independent oracles.

Frozen expected values below were computed from the closed forms
beta*Phi(beta/s) + s*phi(beta/s) (ReLU) and the folded-normal mean
(identity), they never come from the quadrature under test.
"""

import math

import numpy as np
import pytest

from bnfi.activations import identity, leaky_relu, relu, swish
from bnfi.importance import (
    GaussianChannel,
    QuadratureConfig,
    expected_abs_activation,
    folded_normal_mean,
    monte_carlo_importance,
    nonzero_expected_abs_activation,
    relu_importance_closed_form,
    zero_measure,
)

CFG = QuadratureConfig()

PHI0 = 0.3989422804014327  # standard normal density at 0


class TestZeroMeasure:
    def test_relu_centered(self):
        # CDF oracle: Phi(0) = 0.5
        assert zero_measure(relu(), GaussianChannel(1.0, 0.0)) == pytest.approx(0.5, abs=1e-15)

    def test_identity_empty_zero_set(self):
        assert zero_measure(identity(), GaussianChannel(1.0, 0.0)) == 0.0

    def test_degenerate_point_mass_outside(self):
        assert zero_measure(relu(), GaussianChannel(0.0, 1.0)) == 0.0

    def test_degenerate_point_mass_inside(self):
        assert zero_measure(relu(), GaussianChannel(0.0, -1.0)) == 1.0

    def test_shifted_matches_cdf(self):
        ch = GaussianChannel(2.0, 1.0)
        expected = 0.5 * math.erfc((1.0 / 2.0) / math.sqrt(2))  # P(Z <= 0)
        assert zero_measure(relu(), ch) == pytest.approx(expected, abs=1e-15)


class TestExpectedAbsActivation:
    def test_relu_standard(self):
        got = expected_abs_activation(relu(), GaussianChannel(1.0, 0.0), CFG)
        assert got == pytest.approx(PHI0, abs=1e-12)

    def test_relu_degenerate_dead(self):
        assert expected_abs_activation(relu(), GaussianChannel(0.0, -1.0), CFG) == 0.0

    def test_relu_shifted_scaled(self):
        got = expected_abs_activation(relu(), GaussianChannel(2.0, 1.0), CFG)
        assert got == pytest.approx(1.3955931148026122, abs=1e-12)

    def test_identity_folded_normal(self):
        got = expected_abs_activation(identity(), GaussianChannel(1.0, 0.0), CFG)
        assert got == pytest.approx(0.7978845608028654, abs=1e-12)

    def test_degenerate_identity(self):
        assert expected_abs_activation(identity(), GaussianChannel(0.0, 5.0), CFG) == 5.0


class TestNonzeroExpectedAbsActivation:
    def test_relu_standard(self):
        got = nonzero_expected_abs_activation(relu(), GaussianChannel(1.0, 0.0), CFG)
        assert got == pytest.approx(0.7978845608028654, abs=1e-12)

    def test_reduces_to_raw_without_sparsity(self):
        ch = GaussianChannel(1.0, 0.0)
        fn = leaky_relu(0.1)
        assert nonzero_expected_abs_activation(fn, ch, CFG) == expected_abs_activation(fn, ch, CFG)

    def test_dead_channel_scores_zero(self):
        assert nonzero_expected_abs_activation(relu(), GaussianChannel(0.0, -2.0), CFG) == 0.0

    def test_degenerate_live_channel(self):
        got = nonzero_expected_abs_activation(relu(), GaussianChannel(0.0, 3.0), CFG)
        assert got == 3.0


class TestClosedForm:
    def test_at_origin(self):
        assert relu_importance_closed_form(GaussianChannel(1.0, 0.0)) == pytest.approx(
            PHI0, abs=1e-15
        )

    def test_far_right_tail(self):
        assert relu_importance_closed_form(GaussianChannel(1.0, 10.0)) == pytest.approx(
            10.0, abs=1e-6
        )

    def test_linear_in_sigma_at_zero_mean(self):
        assert relu_importance_closed_form(GaussianChannel(3.0, 0.0)) == pytest.approx(
            1.1968268412042982, abs=1e-15
        )

    def test_rejects_degenerate(self):
        with pytest.raises(ValueError):
            relu_importance_closed_form(GaussianChannel(0.0, 1.0))


GRID_SIGMA = (0.01, 0.1, 1.0, 4.0)
GRID_BETA = np.arange(-4.0, 4.01, 0.5)


def test_quadrature_matches_relu_closed_form_on_grid():
    for s in GRID_SIGMA:
        for b in GRID_BETA:
            ch = GaussianChannel(s, float(b))
            got = expected_abs_activation(relu(), ch, CFG)
            want = relu_importance_closed_form(ch)
            assert abs(got - want) <= 1e-9, (s, b, got, want)


def test_quadrature_matches_folded_normal_on_grid():
    for s in GRID_SIGMA:
        for b in GRID_BETA:
            got = expected_abs_activation(identity(), GaussianChannel(s, float(b)), CFG)
            want = folded_normal_mean(float(b), s)
            assert abs(got - want) <= 1e-9, (s, b, got, want)


def test_sign_invariance_is_exact():
    for fn in (identity(), relu(), leaky_relu(0.1), swish()):
        for g, b in [(1.3, 0.4), (0.2, -1.0), (4.0, 2.5)]:
            pos = expected_abs_activation(fn, GaussianChannel(g, b), CFG)
            neg = expected_abs_activation(fn, GaussianChannel(-g, b), CFG)
            assert pos == neg


def test_conditional_reduces_to_raw_within_tolerance():
    for fn in (identity(), leaky_relu(0.1), swish()):
        for s in GRID_SIGMA:
            for b in GRID_BETA:
                ch = GaussianChannel(s, float(b))
                raw = expected_abs_activation(fn, ch, CFG)
                cond = nonzero_expected_abs_activation(fn, ch, CFG)
                assert abs(cond - raw) <= 1e-12 * max(abs(raw), 1.0)


def test_positive_homogeneity():
    for fn in (relu(), leaky_relu(0.1)):
        for k in (0.5, 2.0, 10.0):
            for g, b in [(1.0, 0.5), (0.3, -0.7), (2.0, 1.5)]:
                base = expected_abs_activation(fn, GaussianChannel(g, b), CFG)
                scaled = expected_abs_activation(fn, GaussianChannel(k * g, k * b), CFG)
                assert abs(scaled - k * base) <= 1e-9 * k * base


def test_monotone_in_beta_for_relu():
    betas = np.linspace(-4, 4, 33)
    for s in (0.5, 1.0, 2.0):
        vals = [expected_abs_activation(relu(), GaussianChannel(s, float(b)), CFG) for b in betas]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


def test_non_negative_everywhere():
    rng = np.random.default_rng(5)
    for fn in (identity(), relu(), leaky_relu(0.05), swish()):
        for _ in range(20):
            ch = GaussianChannel(float(rng.normal(0, 2)), float(rng.normal(0, 2)))
            assert expected_abs_activation(fn, ch, CFG) >= 0.0
            assert nonzero_expected_abs_activation(fn, ch, CFG) >= 0.0


class TestMonteCarlo:
    def test_relu_matches_closed_form(self):
        est, se = monte_carlo_importance(relu(), GaussianChannel(1.0, 0.0), 10**6, seed=0)
        assert se == pytest.approx(6e-4, rel=0.5)
        assert abs(est - PHI0) <= 4 * se

    def test_degenerate_is_exact(self):
        est, se = monte_carlo_importance(identity(), GaussianChannel(0.0, 5.0), 1000, seed=1)
        assert est == 5.0 and se == 0.0

    def test_swish_agrees_with_quadrature(self):
        ch = GaussianChannel(1.0, 0.0)
        est, se = monte_carlo_importance(swish(), ch, 10**7, seed=2)
        quad = expected_abs_activation(swish(), ch, CFG)
        assert abs(est - quad) <= 4 * se

    def test_conditional_variant(self):
        ch = GaussianChannel(1.0, 0.0)
        est, se = monte_carlo_importance(relu(), ch, 10**6, seed=3, conditional=True)
        want = nonzero_expected_abs_activation(relu(), ch, CFG)
        assert abs(est - want) <= 4 * se

    def test_conditional_all_zero_samples(self):
        est, se = monte_carlo_importance(relu(), GaussianChannel(0.0, -1.0), 1000, seed=4, conditional=True)
        assert est == 0.0 and se == 0.0

    def test_rejects_tiny_sample_counts(self):
        with pytest.raises(ValueError):
            monte_carlo_importance(relu(), GaussianChannel(1.0, 0.0), 10, seed=0)

    def test_seeded_determinism(self):
        a = monte_carlo_importance(swish(), GaussianChannel(2.0, 1.0), 10**4, seed=7)
        b = monte_carlo_importance(swish(), GaussianChannel(2.0, 1.0), 10**4, seed=7)
        assert a == b


def test_quadrature_config_validation():
    with pytest.raises(ValueError):
        QuadratureConfig(node_count=1)
    with pytest.raises(ValueError):
        QuadratureConfig(half_width=0.0)
    with pytest.raises(ValueError):
        QuadratureConfig(sparse_floor=0.0)


def test_channel_rejects_non_finite():
    with pytest.raises(ValueError):
        GaussianChannel(math.inf, 0.0)
    with pytest.raises(ValueError):
        GaussianChannel(1.0, math.nan)
