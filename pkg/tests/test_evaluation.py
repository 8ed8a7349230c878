import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from triplab.errors import (
    EmptyInputError,
    InvalidBinsError,
    UndefinedCorrelationError,
)
from triplab.evaluation import (
    affine_align_mse,
    aligned_embedding,
    aligned_pearson,
    correct_under_embedding,
    estimate_success_probability,
    expected_correct,
    expected_correct_variance,
    pearson,
    triplet_violations,
)
from triplab.signals import Signal, generate_signal
from triplab.triplets import (
    AnnotatorModel,
    ConstantLink,
    LabeledTriplet,
    LabeledTripletSet,
    LogisticLink,
    TripletQuery,
    sample_triplets,
    simulate_labels,
)


def grid_search_affine(y, z, a_lo, a_hi, steps=2001, refinements=3):
    """Brute-force (a, b) minimizer used as an independent oracle."""
    y = np.asarray(y, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    best = (math.inf, 0.0, 0.0)
    for _ in range(refinements):
        a_grid = np.linspace(a_lo, a_hi, steps)
        for a in a_grid:
            b = float(np.mean(a * y - z))  # optimal b given a
            mse = float(np.mean((a * y - b - z) ** 2))
            if mse < best[0]:
                best = (mse, float(a), b)
        width = (a_hi - a_lo) / steps
        a_lo, a_hi = best[1] - 2 * width, best[1] + 2 * width
    return best


class TestAffineAlignment:
    def test_exact_affine_relation(self):
        z = np.linspace(0, 1, 20)
        y = 2.0 * z + 3.0
        fit = affine_align_mse(y, z)
        assert fit.a == pytest.approx(0.5)
        assert fit.b == pytest.approx(1.5)
        assert fit.mse == pytest.approx(0.0, abs=1e-28)
        assert not fit.degenerate

    def test_negative_scale_absorbed(self):
        z = np.linspace(0, 1, 20)
        fit = affine_align_mse(-3.0 * z, z)
        assert fit.a == pytest.approx(-1.0 / 3.0)
        assert fit.mse == pytest.approx(0.0, abs=1e-28)

    def test_matches_grid_search_oracle(self):
        rng = np.random.default_rng(7)
        for trial in range(5):
            z = rng.uniform(0, 1, 40)
            y = rng.normal(0, 1, 40)
            fit = affine_align_mse(y, z)
            mse_grid, a_grid, b_grid = grid_search_affine(y, z, -10.0, 10.0)
            assert fit.mse <= mse_grid + 1e-12
            # agreement to 4 significant figures
            assert fit.mse == pytest.approx(mse_grid, rel=1e-4)
            assert fit.a == pytest.approx(a_grid, rel=1e-3, abs=1e-3)

    def test_degenerate_constant_embedding(self):
        z = np.array([0.1, 0.5, 0.9])
        fit = affine_align_mse(np.full(3, 2.0), z)
        assert fit.degenerate
        assert fit.a == 0.0
        assert fit.mse == pytest.approx(float(np.var(z)))

    def test_accepts_signal_objects(self):
        sig = generate_signal("sine", 12, seed=0)
        fit = affine_align_mse(sig.values * 4 - 1, sig)
        assert fit.mse == pytest.approx(0.0, abs=1e-28)

    def test_aligned_embedding_overlay(self):
        z = np.linspace(0, 1, 15)
        y = -2.0 * z + 0.3
        np.testing.assert_allclose(aligned_embedding(y, z), z, atol=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            affine_align_mse(np.zeros(3), np.zeros(4))

    @given(st.integers(0, 10_000))
    @settings(max_examples=40, deadline=None)
    def test_mse_var_rho_identity(self, seed):
        # for the optimal fit, mse / var(Z) = 1 - rho^2
        rng = np.random.default_rng(seed)
        z = rng.uniform(0, 1, 30)
        y = rng.normal(0, 1, 30)
        if np.ptp(z) == 0.0 or np.ptp(y) == 0.0:
            return
        fit = affine_align_mse(y, z)
        rho = pearson(y, z)
        assert fit.mse / np.var(z) == pytest.approx(1 - rho**2, abs=1e-10)


class TestPearson:
    def test_hand_value(self):
        assert pearson([1, 2, 3, 4, 5], [2, 1, 4, 3, 5]) == pytest.approx(0.8)

    def test_perfect_and_inverse(self):
        z = np.linspace(0, 1, 10)
        assert pearson(z, z) == pytest.approx(1.0)
        assert pearson(-z, z) == pytest.approx(-1.0)

    def test_constant_raises(self):
        with pytest.raises(UndefinedCorrelationError):
            pearson(np.ones(5), np.linspace(0, 1, 5))

    def test_aligned_pearson_flips_sign(self):
        z = np.linspace(0, 1, 10)
        y = -z + 0.2
        assert pearson(y, z) == pytest.approx(-1.0)
        assert aligned_pearson(y, z) == pytest.approx(1.0)

    def test_aligned_pearson_degenerate(self):
        with pytest.raises(UndefinedCorrelationError):
            aligned_pearson(np.ones(5), np.linspace(0, 1, 5))


def labeled_set(rows, n):
    return LabeledTripletSet(
        [LabeledTriplet(TripletQuery(i, j, k), w, "a", "simulated") for i, j, k, w in rows],
        n=n,
    )


class TestViolations:
    def test_hand_case(self):
        Y = np.array([[0.0, 1.0, 3.0]])
        labels = labeled_set([(1, 2, 3, -1), (2, 1, 3, 1), (3, 1, 2, -1)], n=3)
        # (1,2,3,-1): d_12=1 < d_13=3, agreed
        # (2,1,3,+1): asserts 3 nearer to 2; d_21=1 < d_23=2, violated
        # (3,1,2,-1): asserts 1 nearer to 3; d_31=3 > d_32=2, violated
        assert triplet_violations(Y, labels) == pytest.approx(2 / 3)

    def test_ties_are_agreements(self):
        Y = np.array([[0.0, 1.0, -1.0]])
        labels = labeled_set([(1, 2, 3, -1), (1, 2, 3, 1)][:1], n=3)
        assert triplet_violations(Y, labels) == 0.0

    def test_correct_count_identity(self):
        rng = np.random.default_rng(3)
        Y = rng.normal(size=(1, 12))
        signal = generate_signal("task-b-like", 12, seed=0)
        labels = simulate_labels(
            AnnotatorModel("w", ConstantLink(mu=0.8, eps_sd=0.01)),
            signal,
            sample_triplets(12, 300, seed=1),
            rng,
        )
        tau = triplet_violations(Y, labels)
        correct = correct_under_embedding(Y, labels)
        assert tau == pytest.approx(1.0 - correct / len(labels))

    def test_empty_raises(self):
        with pytest.raises(EmptyInputError):
            triplet_violations(np.zeros((1, 4)), LabeledTripletSet([], n=4))


class TestPoissonBinomial:
    def test_mean_and_variance_formulas(self):
        p = np.array([0.1, 0.5, 0.9])
        assert expected_correct(p) == pytest.approx(1.5)
        assert expected_correct_variance(p) == pytest.approx(
            0.1 * 0.9 + 0.25 + 0.9 * 0.1
        )

    def test_against_monte_carlo(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            p = rng.uniform(0.5, 1.0, size=rng.integers(5, 60))
            draws = rng.random((20_000, p.size)) < p
            counts = draws.sum(axis=1)
            mc_mean = counts.mean()
            se = math.sqrt(expected_correct_variance(p) / 20_000)
            assert abs(expected_correct(p) - mc_mean) < 4 * se
            assert expected_correct_variance(p) == pytest.approx(
                counts.var(), rel=0.1
            )

    def test_domain_check(self):
        with pytest.raises(ValueError):
            expected_correct([0.5, 1.2])
        with pytest.raises(ValueError):
            expected_correct_variance([-0.1])

    @given(st.lists(st.floats(0.0, 1.0), min_size=0, max_size=50))
    def test_bounds(self, probs):
        mean = expected_correct(probs)
        var = expected_correct_variance(probs)
        assert 0.0 <= mean <= len(probs)
        assert 0.0 <= var <= len(probs) / 4 + 1e-12


class TestSuccessCurve:
    def test_constant_link_is_flat(self):
        signal = generate_signal("task-b-like", 60, seed=2)
        labels = simulate_labels(
            AnnotatorModel("w", ConstantLink(mu=0.85, eps_sd=0.0)),
            signal,
            sample_triplets(60, 12_000, seed=3),
            np.random.default_rng(4),
        )
        curve = estimate_success_probability(labels, signal, num_bins=8)
        assert len(curve.bins) == 8
        assert sum(b.count for b in curve.bins) == 12_000
        for b in curve.bins:
            se = math.sqrt(0.85 * 0.15 / b.count)
            assert abs(b.estimated_p - 0.85) < 4 * se

    def test_logistic_link_increases_with_gap(self):
        signal = generate_signal("task-b-like", 60, seed=5)
        labels = simulate_labels(
            AnnotatorModel("w", LogisticLink(sigma=6.0)),
            signal,
            sample_triplets(60, 20_000, seed=6),
            np.random.default_rng(7),
        )
        curve = estimate_success_probability(labels, signal, num_bins=5)
        gaps = [b.mean_distance_gap for b in curve.bins]
        ps = [b.estimated_p for b in curve.bins]
        assert gaps == sorted(gaps)
        assert ps[0] < ps[-1]
        # each bin should sit near the link's own success probability
        link = LogisticLink(sigma=6.0)
        for b in curve.bins:
            se = math.sqrt(0.25 / b.count)
            assert abs(b.estimated_p - link.success_probability(b.mean_distance_gap)) < 6 * se

    def test_ties_excluded_from_denominator(self):
        # plateau signal: queries between equal values are ties
        signal = Signal(np.array([0.5, 0.5, 0.5, 0.9]))
        labels = labeled_set([(1, 2, 3, -1), (1, 2, 4, -1), (2, 3, 4, -1)], n=4)
        curve = estimate_success_probability(labels, signal, num_bins=1)
        b = curve.bins[0]
        assert b.count == 3
        # only the two non-tied queries enter the estimate and both are correct
        assert b.estimated_p == pytest.approx(1.0)

    def test_all_ties_bin_is_nan(self):
        signal = Signal(np.array([0.5, 0.5, 0.5]))
        labels = labeled_set([(1, 2, 3, -1)], n=3)
        curve = estimate_success_probability(labels, signal, num_bins=1)
        assert math.isnan(curve.bins[0].estimated_p)

    def test_bin_count_validation(self):
        signal = generate_signal("sine", 10, seed=0)
        labels = labeled_set([(1, 2, 3, -1), (2, 3, 4, 1)], n=10)
        with pytest.raises(InvalidBinsError):
            estimate_success_probability(labels, signal, num_bins=0)
        with pytest.raises(InvalidBinsError):
            estimate_success_probability(labels, signal, num_bins=3)
