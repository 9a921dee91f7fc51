"""Topic ordering as a minimum-weight Hamiltonian path."""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hiertm.spectre import (
    EXACT_LIMIT,
    DistanceMatrix,
    Spectre,
    load_spectre,
    path_weight,
    save_spectre,
    solve_spectre,
    topic_distances,
)

from helpers import hand_model


def matrix_of(rows):
    return DistanceMatrix(values=np.asarray(rows, dtype=float))


def brute_force(dist: DistanceMatrix) -> float:
    return min(
        path_weight(dist, perm)
        for perm in itertools.permutations(range(dist.size))
    )


def random_matrix(rng: np.random.Generator, n: int) -> DistanceMatrix:
    raw = rng.random((n, n))
    sym = (raw + raw.T) / 2
    np.fill_diagonal(sym, 0.0)
    return DistanceMatrix(values=sym)


class TestDistanceMatrix:
    def test_asymmetric_rejected(self):
        with pytest.raises(ValueError, match="symmetric"):
            matrix_of([[0, 1], [2, 0]])

    def test_nonzero_diagonal_rejected(self):
        with pytest.raises(ValueError, match="diagonal"):
            matrix_of([[1, 0], [0, 0]])

    def test_negative_distance_rejected(self):
        with pytest.raises(ValueError, match="nonnegative"):
            matrix_of([[0, -1], [-1, 0]])

    def test_non_square_rejected(self):
        with pytest.raises(ValueError, match="square"):
            DistanceMatrix(values=np.zeros((2, 3)))


class TestTopicDistances:
    def test_identical_topics_are_at_distance_zero(self):
        model = hand_model([[0.5, 0.5], [0.5, 0.5]], ["a", "b"])
        dist = topic_distances(model)
        assert dist.values[0, 1] == 0.0

    def test_disjoint_topics_are_at_distance_one(self):
        model = hand_model([[1.0, 0.0], [0.0, 1.0]], ["a", "b"])
        dist = topic_distances(model)
        assert dist.values[0, 1] == pytest.approx(1.0, abs=1e-12)

    def test_hellinger_hand_value(self):
        model = hand_model([[1.0, 0.0], [0.5, 0.5]], ["a", "b"])
        dist = topic_distances(model, metric="hellinger")
        expected = math.sqrt((1 - math.sqrt(0.5)) ** 2 + 0.5) / math.sqrt(2)
        assert dist.values[0, 1] == pytest.approx(expected, abs=1e-12)
        assert dist.values[0, 1] == pytest.approx(0.5411961001461971, abs=1e-12)

    def test_jensen_shannon_bounded_by_sqrt_ln2(self):
        model = hand_model([[1.0, 0.0], [0.0, 1.0]], ["a", "b"])
        dist = topic_distances(model, metric="jensen_shannon")
        assert dist.values[0, 1] == pytest.approx(math.sqrt(math.log(2)), abs=1e-12)

    def test_jensen_shannon_is_zero_for_equal_columns(self):
        model = hand_model([[0.3, 0.7], [0.3, 0.7]], ["a", "b"])
        dist = topic_distances(model, metric="jensen_shannon")
        assert dist.values[0, 1] == 0.0

    def test_unknown_metric_rejected(self):
        model = hand_model([[1.0]], ["a"])
        with pytest.raises(ValueError, match="unknown metric"):
            topic_distances(model, metric="cosine")

    def test_matrix_is_symmetric_with_zero_diagonal(self):
        model = hand_model(
            [[0.6, 0.3, 0.1], [0.1, 0.3, 0.6], [0.2, 0.5, 0.3]], ["a", "b", "c"]
        )
        dist = topic_distances(model)
        assert dist.size == 3
        np.testing.assert_array_equal(np.diag(dist.values), np.zeros(3))


class TestSolveExact:
    def test_three_node_hand_instance(self):
        # Edges: (0,1) = 1, (0,2) = 5, (1,2) = 2; best path 0-1-2 weighs 3.
        dist = matrix_of([[0, 1, 5], [1, 0, 2], [5, 2, 0]])
        spectre = solve_spectre(dist, mode="exact")
        assert spectre.order == (0, 1, 2)
        assert spectre.weight == pytest.approx(3.0)

    def test_all_equal_distances_pick_lexicographic_minimum(self):
        dist = matrix_of([[0, 1, 1], [1, 0, 1], [1, 1, 0]])
        spectre = solve_spectre(dist, mode="exact")
        assert spectre.order == (0, 1, 2)

    def test_canonical_orientation_starts_low(self):
        rng = np.random.default_rng(1)
        for trial in range(5):
            dist = random_matrix(rng, 6)
            spectre = solve_spectre(dist, mode="exact")
            assert spectre.order[0] < spectre.order[-1]

    def test_matches_brute_force_up_to_eight(self):
        rng = np.random.default_rng(7)
        for n in (2, 4, 6, 8):
            dist = random_matrix(rng, n)
            spectre = solve_spectre(dist, mode="exact")
            assert spectre.weight == pytest.approx(brute_force(dist), abs=1e-12)
            assert path_weight(dist, spectre.order) == pytest.approx(
                spectre.weight, abs=1e-12
            )

    def test_size_limit_enforced(self):
        rng = np.random.default_rng(2)
        dist = random_matrix(rng, EXACT_LIMIT + 1)
        with pytest.raises(ValueError, match="heuristic"):
            solve_spectre(dist, mode="exact")

    def test_single_topic(self):
        spectre = solve_spectre(matrix_of([[0.0]]), mode="exact")
        assert spectre.order == (0,)
        assert spectre.weight == 0.0


class TestSolveHeuristic:
    def test_matches_exact_on_small_instances(self):
        rng = np.random.default_rng(11)
        hits = 0
        for _ in range(20):
            dist = random_matrix(rng, 6)
            exact = solve_spectre(dist, mode="exact")
            heuristic = solve_spectre(dist, mode="heuristic")
            assert heuristic.weight >= exact.weight - 1e-12
            if heuristic.weight <= exact.weight + 1e-9:
                hits += 1
        assert hits >= 18  # 2-opt from every start rarely misses at this size

    def test_never_worse_than_plain_nearest_neighbor(self):
        from hiertm.spectre import _nearest_neighbor

        rng = np.random.default_rng(13)
        for _ in range(10):
            dist = random_matrix(rng, 12)
            heuristic = solve_spectre(dist, mode="heuristic")
            nn_best = min(
                path_weight(dist, tuple(_nearest_neighbor(dist, s)))
                for s in range(dist.size)
            )
            assert heuristic.weight <= nn_best + 1e-12

    def test_canonical_orientation(self):
        rng = np.random.default_rng(17)
        dist = random_matrix(rng, 9)
        spectre = solve_spectre(dist, mode="heuristic")
        assert spectre.order[0] < spectre.order[-1]

    def test_deterministic(self):
        rng = np.random.default_rng(19)
        dist = random_matrix(rng, 15)
        assert solve_spectre(dist).order == solve_spectre(dist).order

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError, match="unknown mode"):
            solve_spectre(matrix_of([[0.0]]), mode="annealing")

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=25, deadline=None)
    def test_weight_equals_sum_along_returned_path(self, seed):
        rng = np.random.default_rng(seed)
        dist = random_matrix(rng, int(rng.integers(2, 9)))
        spectre = solve_spectre(dist, mode="heuristic")
        assert spectre.weight == pytest.approx(
            path_weight(dist, spectre.order), abs=1e-12
        )
        assert sorted(spectre.order) == list(range(dist.size))


class TestSpectreValidation:
    def test_order_must_be_a_permutation(self):
        with pytest.raises(ValueError, match="permutation"):
            Spectre(order=(0, 0, 1), weight=1.0)


class TestPersistence:
    def test_round_trip_maps_indices_to_topic_ids(self, tmp_path):
        topic_ids = ("t00", "t01", "t02")
        spectre = Spectre(order=(2, 0, 1), weight=1.25)
        save_spectre(spectre, topic_ids, "hellinger", tmp_path / "spectre.json")
        loaded, metric = load_spectre(tmp_path / "spectre.json", topic_ids)
        assert loaded.order == (2, 0, 1)
        assert loaded.weight == 1.25
        assert metric == "hellinger"

    def test_file_lists_topic_ids_in_path_order(self, tmp_path):
        import json

        spectre = Spectre(order=(1, 0), weight=0.5)
        save_spectre(spectre, ("t00", "t01"), "jensen_shannon", tmp_path / "s.json")
        payload = json.loads((tmp_path / "s.json").read_text())
        assert payload["order"] == ["t01", "t00"]
        assert payload["metric"] == "jensen_shannon"
