import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from triplab.errors import (
    BudgetExceedsUniverseError,
    DuplicateQueryError,
    EmptyInputError,
    FusionConflictError,
)
from triplab.signals import Signal, generate_signal
from triplab.triplets import (
    AnnotatorModel,
    ConstantLink,
    LabeledTriplet,
    LabeledTripletSet,
    LogisticLink,
    TripletQuery,
    canonical_labeled,
    fraction_to_count,
    fuse,
    partition_to_annotators,
    read_jsonl,
    sample_triplets,
    simulate_label,
    simulate_labels,
    triplet_budget,
    triplet_universe_size,
    write_jsonl,
)


def brute_force_universe(n):
    return {
        (i, j, k)
        for i in range(1, n + 1)
        for j in range(1, n + 1)
        for k in range(j + 1, n + 1)
        if i != j and i != k
    }


class TestUniverseSize:
    def test_reference_value(self):
        assert triplet_universe_size(267) == 9_410_415

    def test_small_values(self):
        assert triplet_universe_size(3) == 3
        assert triplet_universe_size(4) == 12
        assert triplet_universe_size(178) == 2_772_528

    @pytest.mark.parametrize("n", [3, 4, 5, 8, 13])
    def test_matches_enumeration(self, n):
        assert triplet_universe_size(n) == len(brute_force_universe(n))


class TestBudgets:
    def test_reference_fractions(self):
        assert fraction_to_count(178, 0.005) == 13_862
        assert fraction_to_count(267, 0.0025) == 23_526
        assert fraction_to_count(267, 0.005) == 47_052

    def test_fraction_one_is_universe(self):
        assert fraction_to_count(50, 1.0) == triplet_universe_size(50)

    def test_exact_products_not_floored_down(self):
        # 0.1 * 1770 = 177.00000000000003 in floats; must stay 177
        assert fraction_to_count(13, 177 / 858) == 177

    def test_log_budget_reference_values(self):
        assert triplet_budget(267, 31.5) == round(31.5 * 267 * math.log(267))
        assert triplet_budget(178, 15) == round(15 * 178 * math.log(178))
        # both land within 1% of the fraction-based counts they stand in for
        assert abs(triplet_budget(267, 31.5) - 47_052) / 47_052 < 0.01
        assert abs(triplet_budget(178, 15) - 13_862) / 13_862 < 0.01

    def test_log_budget_clamped(self):
        assert triplet_budget(3, 1000.0) == triplet_universe_size(3)
        assert triplet_budget(3, 1e-9) == 1


class TestTripletQuery:
    def test_validation(self):
        with pytest.raises(ValueError):
            TripletQuery(1, 3, 2)  # j > k
        with pytest.raises(ValueError):
            TripletQuery(2, 2, 3)  # i == j
        with pytest.raises(ValueError):
            TripletQuery(0, 1, 2)  # 1-based

    def test_mirror_normalization(self):
        query, w = canonical_labeled(5, 9, 2, -1)
        assert query == TripletQuery(5, 2, 9)
        assert w == 1

    def test_canonical_passthrough(self):
        query, w = canonical_labeled(5, 2, 9, -1)
        assert query == TripletQuery(5, 2, 9)
        assert w == -1

    @given(st.integers(1, 30), st.integers(1, 30), st.integers(1, 30),
           st.sampled_from([-1, 1]))
    def test_mirror_equivalence(self, i, j, k, w):
        if len({i, j, k}) < 3:
            with pytest.raises(ValueError):
                canonical_labeled(i, j, k, w)
            return
        q1, w1 = canonical_labeled(i, j, k, w)
        q2, w2 = canonical_labeled(i, k, j, -w)
        assert (q1, w1) == (q2, w2)
        assert q1.j < q1.k


class TestSampling:
    @pytest.mark.parametrize("n", [3, 4, 5, 9])
    def test_rank_decoding_is_a_bijection(self, n):
        size = triplet_universe_size(n)
        queries = sample_triplets(n, size, seed=0)
        assert {q.as_tuple() for q in queries} == brute_force_universe(n)

    def test_deterministic(self):
        a = sample_triplets(100, 5000, seed=42)
        b = sample_triplets(100, 5000, seed=42)
        assert a == b

    def test_seed_changes_sample(self):
        a = sample_triplets(100, 5000, seed=42)
        b = sample_triplets(100, 5000, seed=43)
        assert a != b

    def test_no_duplicates_at_scale(self):
        queries = sample_triplets(267, 50_000, seed=7)
        keys = {q.as_tuple() for q in queries}
        assert len(keys) == 50_000

    def test_budget_above_universe_raises(self):
        with pytest.raises(BudgetExceedsUniverseError):
            sample_triplets(5, triplet_universe_size(5) + 1, seed=0)

    def test_uniform_marginals(self):
        # every canonical triple of a small universe should appear ~equally
        # often across repeated draws
        n, size = 6, triplet_universe_size(6)
        counts = {key: 0 for key in brute_force_universe(n)}
        draws, m = 400, 12
        for seed in range(draws):
            for q in sample_triplets(n, m, seed=seed):
                counts[q.as_tuple()] += 1
        expected = draws * m / size
        sd = math.sqrt(draws * (m / size) * (1 - m / size))
        for key, c in counts.items():
            assert abs(c - expected) < 6 * sd, f"{key}: {c} vs {expected:.1f}"

    @given(st.integers(3, 40), st.integers(0, 10**6))
    @settings(max_examples=60, deadline=None)
    def test_sampled_queries_always_valid(self, n, seed):
        size = triplet_universe_size(n)
        m = min(size, 25)
        for q in sample_triplets(n, m, seed=seed):
            assert 1 <= q.i <= n and 1 <= q.j < q.k <= n
            assert q.i != q.j and q.i != q.k


def make_set(rows, n):
    return LabeledTripletSet(
        [LabeledTriplet(TripletQuery(i, j, k), w, a, "simulated") for i, j, k, w, a in rows],
        n=n,
    )


class TestLabeledTripletSet:
    def test_duplicate_rejected(self):
        with pytest.raises(DuplicateQueryError):
            make_set([(1, 2, 3, -1, "a"), (1, 2, 3, 1, "b")], n=3)

    def test_out_of_range_rejected(self):
        with pytest.raises(IndexError):
            make_set([(1, 2, 5, -1, "a")], n=4)

    def test_to_arrays_zero_based(self):
        ts = make_set([(3, 1, 2, -1, "a"), (1, 2, 4, 1, "a")], n=4)
        I, J, K, W = ts.to_arrays()
        np.testing.assert_array_equal(I, [2, 0])
        np.testing.assert_array_equal(J, [0, 1])
        np.testing.assert_array_equal(K, [1, 3])
        np.testing.assert_array_equal(W, [-1, 1])


class TestSimulation:
    def test_perfect_annotator_labels_by_distance(self):
        signal = generate_signal("task-b-like", 30, seed=0)
        model = AnnotatorModel("perfect", ConstantLink(mu=1.0, eps_sd=0.0))
        rng = np.random.default_rng(0)
        queries = sample_triplets(30, 500, seed=1)
        labels = simulate_labels(model, signal, queries, rng)
        for lab in labels:
            d_j = signal.dissimilarity(lab.query.i, lab.query.j)
            d_k = signal.dissimilarity(lab.query.i, lab.query.k)
            if d_j < d_k:
                assert lab.w == -1
            elif d_k < d_j:
                assert lab.w == 1

    def test_constant_link_flip_rate(self):
        # a mu=0.8 annotator on a tie-free signal should be right ~80% of the time
        rng_sig = np.random.default_rng(5)
        signal = Signal(np.sort(rng_sig.uniform(0, 1, 40)))
        model = AnnotatorModel("noisy", ConstantLink(mu=0.8, eps_sd=0.01))
        rng = np.random.default_rng(11)
        queries = sample_triplets(40, 8000, seed=2)
        labels = simulate_labels(model, signal, queries, rng)
        correct = 0
        for lab in labels:
            d_j = signal.dissimilarity(lab.query.i, lab.query.j)
            d_k = signal.dissimilarity(lab.query.i, lab.query.k)
            truth = -1 if d_j < d_k else 1
            correct += lab.w == truth
        rate = correct / len(labels)
        assert abs(rate - 0.8) < 3 * math.sqrt(0.8 * 0.2 / 8000)

    def test_logistic_link_respects_gap_sign(self):
        # with a huge sigma the logistic link is effectively noiseless
        signal = generate_signal("task-b-like", 25, seed=1)
        model = AnnotatorModel("sharp", LogisticLink(sigma=1e6))
        rng = np.random.default_rng(3)
        queries = sample_triplets(25, 300, seed=3)
        labels = simulate_labels(model, signal, queries, rng)
        for lab in labels:
            d_j = signal.dissimilarity(lab.query.i, lab.query.j)
            d_k = signal.dissimilarity(lab.query.i, lab.query.k)
            if abs(d_j - d_k) > 1e-5:
                assert lab.w == (-1 if d_j < d_k else 1)

    def test_tie_answers_are_coin_flips(self):
        signal = Signal(np.array([0.2, 0.5, 0.5, 0.8]))
        model = AnnotatorModel("tied", ConstantLink(mu=0.9, eps_sd=0.0))
        rng = np.random.default_rng(17)
        query = TripletQuery(1, 2, 3)  # d_12 == d_13 == 0.3
        draws = [simulate_label(model, signal, query, rng).w for _ in range(2000)]
        mean = np.mean(draws)
        assert abs(mean) < 3 / math.sqrt(2000)

    def test_success_probability_constant_link(self):
        link = ConstantLink(mu=0.9, eps_sd=0.0)
        assert link.success_probability(0.3) == 0.9
        assert link.success_probability(0.0) == 1.0
        # eps_sd=0.01 at mu=0.9: clamping is 10 sigma away, mean is mu
        noisy = ConstantLink(mu=0.9, eps_sd=0.01)
        assert noisy.success_probability(0.3) == pytest.approx(0.9, abs=1e-12)

    def test_success_probability_constant_link_clamped(self):
        # mu close to 1 with a wide eps: clamping pulls the mean below mu
        link = ConstantLink(mu=0.99, eps_sd=0.1)
        p = link.success_probability(0.5)
        # Monte Carlo oracle
        rng = np.random.default_rng(0)
        sim = np.clip(0.99 + rng.normal(0, 0.1, 200_000), 0, 1).mean()
        assert p == pytest.approx(sim, abs=3e-4)
        assert p < 0.99

    def test_success_probability_logistic_link(self):
        link = LogisticLink(sigma=6.0)
        assert link.success_probability(0.0) == 1.0
        assert link.success_probability(0.5) == pytest.approx(1 / (1 + math.exp(-3.0)))
        # symmetric in the gap sign
        assert link.success_probability(-0.5) == link.success_probability(0.5)


class TestPartitionAndFusion:
    def test_partition_round_robin(self):
        queries = sample_triplets(20, 10, seed=0)
        parts = partition_to_annotators(queries, ["a", "b", "c"])
        assert sorted(len(v) for v in parts.values()) == [3, 3, 4]
        flat = [q for qs in parts.values() for q in qs]
        assert {q.as_tuple() for q in flat} == {q.as_tuple() for q in queries}

    def test_partition_rejects_duplicates(self):
        q = TripletQuery(1, 2, 3)
        with pytest.raises(DuplicateQueryError):
            partition_to_annotators([q, q], ["a"])

    def test_fusion_is_union(self):
        signal = generate_signal("task-b-like", 30, seed=0)
        queries = sample_triplets(30, 90, seed=4)
        parts = partition_to_annotators(queries, [f"w{idx}" for idx in range(5)])
        rng = np.random.default_rng(0)
        sets = [
            simulate_labels(AnnotatorModel(a, ConstantLink(mu=0.9)), signal, qs, rng)
            for a, qs in parts.items()
        ]
        fused = fuse(sets)
        assert len(fused) == 90
        assert fused.queries() == {q.as_tuple() for q in queries}
        assert set(fused.annotator_counts()) == set(parts)

    def test_fusion_conflict_names_both_annotators(self):
        s1 = make_set([(1, 2, 3, -1, "alice")], n=4)
        s2 = make_set([(1, 2, 3, 1, "bob")], n=4)
        with pytest.raises(FusionConflictError) as excinfo:
            fuse([s1, s2])
        assert excinfo.value.annotators == ("alice", "bob")
        assert excinfo.value.query == TripletQuery(1, 2, 3)

    def test_fusion_mismatched_n(self):
        s1 = make_set([(1, 2, 3, -1, "a")], n=4)
        s2 = make_set([(1, 2, 4, 1, "b")], n=5)
        with pytest.raises(ValueError):
            fuse([s1, s2])

    def test_fuse_empty(self):
        with pytest.raises(EmptyInputError):
            fuse([])


class TestJsonl:
    def test_round_trip(self, tmp_path):
        signal = generate_signal("task-a-like", 25, seed=2)
        model = AnnotatorModel("w1", ConstantLink(mu=0.9, eps_sd=0.01))
        labels = simulate_labels(
            model, signal, sample_triplets(25, 200, seed=5), np.random.default_rng(1)
        )
        p = tmp_path / "labels.jsonl"
        write_jsonl(labels, p)
        loaded = read_jsonl(p, n=25)
        assert len(loaded) == len(labels)
        assert loaded.queries() == labels.queries()
        original = {lab.query.as_tuple(): lab.w for lab in labels}
        for lab in loaded:
            assert lab.w == original[lab.query.as_tuple()]

    def test_mirrored_rows_normalized(self, tmp_path):
        p = tmp_path / "mirror.jsonl"
        p.write_text(json.dumps({"i": 2, "j": 5, "k": 1, "w": 1, "annotator": "h"}) + "\n")
        loaded = read_jsonl(p)
        lab = loaded.labels[0]
        assert lab.query == TripletQuery(2, 1, 5)
        assert lab.w == -1

    def test_n_inferred(self, tmp_path):
        p = tmp_path / "infer.jsonl"
        p.write_text(json.dumps({"i": 9, "j": 2, "k": 4, "w": 1, "annotator": "h"}) + "\n")
        assert read_jsonl(p).n == 9

    def test_bad_line_reports_number(self, tmp_path):
        p = tmp_path / "bad.jsonl"
        p.write_text('{"i":1,"j":2,"k":3,"w":-1,"annotator":"a"}\n{"i":1}\n')
        with pytest.raises(ValueError, match="line 2"):
            read_jsonl(p)
