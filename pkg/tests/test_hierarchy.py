"""Level linking: psi estimation, normalization, edge selection, builders."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hiertm.artm import TrainConfig, train
from hiertm.corpus import Collection, CorpusError, merge
from hiertm.edge_quality import EdgeScore, EdgeScoreTable
from hiertm.hierarchy import (
    Edge,
    Hierarchy,
    HierarchyConfig,
    NormalizedPsi,
    PsiMatrix,
    build_concat,
    build_heterogeneous,
    edges_above,
    fit_level,
    load_edges,
    load_hierarchy,
    normalize_psi,
    save_hierarchy,
    top_k_edges,
    write_edges,
)
from hiertm.synthetic import make_theme_collection

from helpers import corpus_of, doc, hand_model, word


def psi_of(columns, parent_ids, child_ids):
    """Build a PsiMatrix from per-parent columns (lists of child weights)."""
    values = np.asarray(columns, dtype=float).T
    return PsiMatrix(
        values=values,
        parent_ids=tuple(parent_ids),
        child_ids=tuple(child_ids),
        parent_level=0,
        child_level=1,
    )


class TestPsiValidation:
    def test_columns_must_sum_to_one(self):
        with pytest.raises(ValueError, match="deviate"):
            psi_of([[0.5, 0.4]], ["p0"], ["c0", "c1"])

    def test_negative_entries_rejected(self):
        with pytest.raises(ValueError, match="negative"):
            psi_of([[1.5, -0.5]], ["p0"], ["c0", "c1"])

    def test_shape_must_match_ids(self):
        with pytest.raises(ValueError, match="shape"):
            PsiMatrix(
                values=np.ones((2, 2)) / 2,
                parent_ids=("p0",),
                child_ids=("c0", "c1"),
                parent_level=0,
                child_level=1,
            )


class TestNormalizePsi:
    def test_min_max_rescaling_of_one_column(self):
        psi = psi_of([[0.2 / 1.5, 0.5 / 1.5, 0.8 / 1.5]], ["p0"], ["c0", "c1", "c2"])
        norm = normalize_psi(psi)
        np.testing.assert_allclose(norm.values[:, 0], [0.0, 0.5, 1.0], atol=1e-12)

    def test_two_children_become_indicator(self):
        psi = psi_of([[0.1, 0.9]], ["p0"], ["c0", "c1"])
        norm = normalize_psi(psi)
        np.testing.assert_allclose(norm.values[:, 0], [0.0, 1.0])

    def test_constant_column_collapses_to_zero_with_warning(self):
        psi = psi_of([[0.5, 0.5], [0.9, 0.1]], ["p0", "p1"], ["c0", "c1"])
        with pytest.warns(UserWarning, match="constant"):
            norm = normalize_psi(psi)
        assert norm.values[:, 0].max() == 0.0
        np.testing.assert_allclose(norm.values[:, 1], [1.0, 0.0])

    def test_columns_are_rescaled_independently(self):
        psi = psi_of(
            [[0.2, 0.3, 0.5], [0.05, 0.15, 0.8]],
            ["p0", "p1"],
            ["c0", "c1", "c2"],
        )
        norm = normalize_psi(psi)
        assert norm.values[:, 0].min() == 0.0
        assert norm.values[:, 0].max() == 1.0
        assert norm.values[:, 1].min() == 0.0
        assert norm.values[:, 1].max() == 1.0
        assert norm.weight("p1", "c1") == pytest.approx(0.1 / 0.75)

    def test_indicator_columns_are_fixed_points(self):
        psi = psi_of([[0.0, 1.0], [1.0, 0.0]], ["p0", "p1"], ["c0", "c1"])
        norm = normalize_psi(psi)
        np.testing.assert_array_equal(norm.values, psi.values)


class TestEdgesAbove:
    def make_norm(self):
        return NormalizedPsi(
            values=np.array([[0.0], [0.5], [1.0]]),
            parent_ids=("p0",),
            child_ids=("c0", "c1", "c2"),
            parent_level=0,
            child_level=1,
        )

    def test_threshold_is_strict(self):
        norm = self.make_norm()
        assert len(edges_above(norm, 0.4)) == 2
        assert len(edges_above(norm, 0.5)) == 1
        assert edges_above(norm, 1.0) == []

    def test_threshold_below_all_weights_keeps_everything(self):
        norm = self.make_norm()
        edges = edges_above(norm, -0.1)
        assert [(e.parent, e.child) for e in edges] == [
            ("p0", "c0"),
            ("p0", "c1"),
            ("p0", "c2"),
        ]

    def test_weights_carried_onto_edges(self):
        norm = self.make_norm()
        (edge,) = edges_above(norm, 0.9)
        assert edge == Edge("p0", "c2")
        assert edge.weight == 1.0

    @given(st.floats(min_value=-0.5, max_value=1.5), st.floats(min_value=-0.5, max_value=1.5))
    @settings(max_examples=40, deadline=None)
    def test_edge_count_is_monotone_in_threshold(self, k1, k2):
        norm = self.make_norm()
        low, high = sorted((k1, k2))
        assert len(edges_above(norm, low)) >= len(edges_above(norm, high))


class TestFitLevel:
    def two_theme_corpus(self):
        return corpus_of(
            doc("d1", {word("a"): 10, word("b"): 10}),
            doc("d2", {word("a"): 12, word("b"): 8}),
            doc("d3", {word("c"): 10, word("d"): 10}),
            doc("d4", {word("c"): 9, word("d"): 11}),
        )

    def test_children_of_disjoint_parents_split_cleanly(self):
        corpus = self.two_theme_corpus()
        parent = train(
            corpus,
            TrainConfig(n_topics=2, max_iterations=400, ll_rel_tolerance=1e-10, seed=1, topic_prefix="l0_t"),
        )
        with pytest.warns(UserWarning, match="does not exceed"):
            child, psi = fit_level(
                parent,
                2,
                corpus,
                TrainConfig(n_topics=2, max_iterations=400, ll_rel_tolerance=1e-10, seed=2, topic_prefix="l1_t"),
            )
        # With as many children as parents and separable themes the psi
        # columns approach a permutation and reconstruction is near exact.
        assert psi.values.shape == (2, 2)
        assert psi.values.max(axis=0) == pytest.approx([1.0, 1.0], abs=1e-2)
        assert {int(np.argmax(psi.values[:, a])) for a in range(2)} == {0, 1}
        assert psi.reconstruction_error < 1e-2

    def test_child_model_excludes_pseudo_documents(self):
        corpus = self.two_theme_corpus()
        parent = train(corpus, TrainConfig(n_topics=2, seed=1, topic_prefix="l0_t"))
        with pytest.warns(UserWarning):
            child, psi = fit_level(parent, 2, corpus, TrainConfig(n_topics=2, seed=2))
        assert child.theta.shape == (2, 4)
        assert child.doc_ids == tuple(corpus.doc_ids())
        child.check_stochastic()

    def test_vocabulary_mismatch_rejected(self):
        corpus = self.two_theme_corpus()
        parent = train(corpus, TrainConfig(n_topics=2, seed=1))
        other = corpus_of(doc("dx", {word("zzz"): 3}))
        with pytest.raises(ValueError, match="vocabulary"):
            fit_level(parent, 3, other, TrainConfig(n_topics=3))

    def test_single_parent_warns(self):
        corpus = corpus_of(doc("d1", {word("a"): 2, word("b"): 2}))
        parent = train(corpus, TrainConfig(n_topics=1, seed=0))
        with pytest.warns(UserWarning, match="fewer than 2"):
            fit_level(parent, 2, corpus, TrainConfig(n_topics=2, seed=1))

    def test_nonpositive_parent_doc_mass_rejected(self):
        corpus = self.two_theme_corpus()
        parent = train(corpus, TrainConfig(n_topics=2, seed=1))
        with pytest.raises(ValueError, match="positive"):
            fit_level(parent, 3, corpus, TrainConfig(n_topics=3), parent_doc_mass=0.0)

    def test_psi_columns_are_distributions(self):
        corpus = self.two_theme_corpus()
        parent = train(corpus, TrainConfig(n_topics=2, seed=1))
        child, psi = fit_level(parent, 3, corpus, TrainConfig(n_topics=3, seed=5))
        np.testing.assert_allclose(psi.values.sum(axis=0), [1.0, 1.0], atol=1e-9)
        assert psi.values.min() >= 0


class TestTopKEdges:
    def table(self):
        rows = [
            EdgeScore("p0", "c0", 0.9, {"m": 0.9}),
            EdgeScore("p0", "c1", 0.5, {"m": 0.5}),
            EdgeScore("p1", "c0", 0.8, {"m": 0.8}),
            EdgeScore("p1", "c1", 0.4, {"m": 0.4}),
        ]
        return EdgeScoreTable(rows=rows)

    def test_plain_top_k_when_every_child_is_covered(self):
        edges = top_k_edges(self.table(), 3, "m")
        assert [(e.parent, e.child) for e in edges] == [
            ("p0", "c0"),
            ("p0", "c1"),
            ("p1", "c0"),
        ]

    def test_orphaned_child_swaps_in_its_best_edge(self):
        # Top-2 by score is (p0,c0), (p1,c0) which orphans c1; the best c1
        # edge replaces the worst retained edge whose child stays covered.
        edges = top_k_edges(self.table(), 2, "m")
        assert [(e.parent, e.child) for e in edges] == [
            ("p0", "c0"),
            ("p0", "c1"),
        ]

    def test_k_at_least_total_returns_all(self):
        edges = top_k_edges(self.table(), 99, "m")
        assert len(edges) == 4

    def test_k_zero_rejected(self):
        with pytest.raises(ValueError, match=">= 1"):
            top_k_edges(self.table(), 0, "m")

    def test_unknown_measure_rejected(self):
        with pytest.raises(ValueError, match="unknown measure"):
            top_k_edges(self.table(), 2, "nope")

    def test_result_carries_edge_weights_not_scores(self):
        edges = top_k_edges(self.table(), 4, "m")
        by_pair = {(e.parent, e.child): e.weight for e in edges}
        assert by_pair[("p1", "c1")] == 0.4

    @given(st.integers(min_value=1, max_value=12))
    @settings(max_examples=30, deadline=None)
    def test_size_is_min_of_k_and_total(self, k):
        rng = np.random.default_rng(k)
        rows = [
            EdgeScore(f"p{a}", f"c{t}", 0.5, {"m": float(rng.random())})
            for a in range(2)
            for t in range(3)
        ]
        edges = top_k_edges(EdgeScoreTable(rows=rows), k, "m")
        assert len(edges) == min(k, len(rows))
        assert {e.child for e in edges} == {"c0", "c1", "c2"} or k < 3

    def test_every_child_keeps_an_edge_when_k_allows(self):
        rows = [
            EdgeScore("p0", "c0", 0.9, {"m": 0.99}),
            EdgeScore("p0", "c1", 0.9, {"m": 0.98}),
            EdgeScore("p0", "c2", 0.9, {"m": 0.01}),
            EdgeScore("p1", "c2", 0.9, {"m": 0.02}),
        ]
        edges = top_k_edges(EdgeScoreTable(rows=rows), 3, "m")
        assert {e.child for e in edges} == {"c0", "c1", "c2"}


class TestHierarchyConfig:
    def test_topic_counts_must_increase(self):
        with pytest.raises(ValueError, match="increase"):
            HierarchyConfig(level_topic_counts=(5, 5))

    def test_level_train_config_prefixes_topics_by_level(self):
        config = HierarchyConfig(level_topic_counts=(2, 4), seed=10)
        assert config.level_train_config(0).topic_prefix == "l0_t"
        assert config.level_train_config(1).topic_prefix == "l1_t"
        assert config.level_train_config(1).seed == 11

    def test_batch_fraction_bounds(self):
        with pytest.raises(ValueError, match="batch_fraction"):
            HierarchyConfig(batch_fraction=0.0)
        with pytest.raises(ValueError, match="batch_fraction"):
            HierarchyConfig(batch_fraction=1.5)


class TestBuildConcat:
    def test_single_collection_first_level_equals_plain_training(self, theme_generator):
        collection = make_theme_collection(theme_generator, "only", [0, 1], 10, seed=3)
        config = HierarchyConfig(level_topic_counts=(2, 4), max_iterations=30, seed=5)
        hierarchy = build_concat([collection], config)
        direct = train(merge([collection]), config.level_train_config(0))
        assert np.array_equal(hierarchy.levels[0].phi, direct.phi)
        assert np.array_equal(hierarchy.levels[0].theta, direct.theta)

    def test_levels_and_psis_have_declared_shapes(self, theme_hierarchy):
        assert [m.n_topics for m in theme_hierarchy.levels] == [3, 6]
        assert len(theme_hierarchy.psis) == 1
        assert theme_hierarchy.psis[0].values.shape == (6, 3)
        assert theme_hierarchy.psis[0].parent_level == 0
        assert theme_hierarchy.psis[0].child_level == 1

    def test_vocabulary_is_the_union_over_collections(self):
        left = Collection(id="l", documents=[doc("d1", {word("aa"): 3})])
        right = Collection(id="r", documents=[doc("d2", {word("bb"): 3})])
        config = HierarchyConfig(level_topic_counts=(1, 2), max_iterations=10)
        with pytest.warns(UserWarning):
            hierarchy = build_concat([left, right], config)
        surfaces = {t.surface for t in hierarchy.levels[0].tokens}
        assert surfaces == {"aa", "bb"}

    def test_edges_respect_threshold(self, theme_hierarchy):
        norm = theme_hierarchy.normalized[0]
        expected = {
            (p, c)
            for a, p in enumerate(norm.parent_ids)
            for t, c in enumerate(norm.child_ids)
            if norm.values[t, a] > 0.3
        }
        assert {(e.parent, e.child) for e in theme_hierarchy.edges} == expected

    def test_no_collections_rejected(self):
        with pytest.raises(CorpusError, match="no collections"):
            build_concat([], HierarchyConfig(level_topic_counts=(2, 3)))

    def test_deterministic_under_fixed_seed(self, theme_generator):
        collection = make_theme_collection(theme_generator, "only", [0, 1], 8, seed=4)
        config = HierarchyConfig(level_topic_counts=(2, 4), max_iterations=15, seed=9)
        first = build_concat([collection], config)
        second = build_concat([collection], config)
        assert np.array_equal(first.levels[1].phi, second.levels[1].phi)
        assert first.edges == second.edges


class TestBuildHeterogeneous:
    def test_without_new_documents_warns_and_matches_concat(self, theme_generator):
        base = make_theme_collection(theme_generator, "base", [0, 1], 10, seed=6)
        config = HierarchyConfig(level_topic_counts=(2, 4), max_iterations=15, seed=2)
        with pytest.warns(UserWarning, match="no new documents"):
            het = build_heterogeneous(base, [], config)
        concat = build_concat([base], config)
        assert np.array_equal(het.levels[0].phi, concat.levels[0].phi)

    def test_single_full_batch_covers_every_document(self, theme_generator):
        base = make_theme_collection(theme_generator, "base", [0, 1], 10, seed=6)
        extra = make_theme_collection(theme_generator, "extra", [1, 2], 6, seed=7)
        config = HierarchyConfig(
            level_topic_counts=(2, 4), max_iterations=15, seed=2, batch_fraction=1.0
        )
        het = build_heterogeneous(base, [extra], config, batches=1)
        expected = {d.id for d in base.documents} | {d.id for d in extra.documents}
        assert set(het.levels[0].doc_ids) == expected

    def test_batch_count_defaults_to_inverse_fraction(self, theme_generator):
        base = make_theme_collection(theme_generator, "base", [0, 1], 10, seed=6)
        extra = make_theme_collection(theme_generator, "extra", [1, 2], 7, seed=7)
        config = HierarchyConfig(
            level_topic_counts=(2, 4), max_iterations=8, seed=2, batch_fraction=0.3
        )
        het = build_heterogeneous(base, [extra], config)
        # ceil(1 / 0.3) = 4 rounds of ceil(0.3 * 7) = 3 docs exhaust the pool.
        expected = {d.id for d in base.documents} | {d.id for d in extra.documents}
        assert set(het.levels[0].doc_ids) == expected

    def test_deterministic_under_fixed_seed(self, theme_generator):
        base = make_theme_collection(theme_generator, "base", [0, 1], 10, seed=6)
        extra = make_theme_collection(theme_generator, "extra", [1, 2], 6, seed=7)
        config = HierarchyConfig(
            level_topic_counts=(2, 4), max_iterations=10, seed=3, batch_fraction=0.5
        )
        first = build_heterogeneous(base, [extra], config)
        second = build_heterogeneous(base, [extra], config)
        assert np.array_equal(first.levels[0].phi, second.levels[0].phi)
        assert first.edges == second.edges

    def test_empty_base_rejected(self):
        with pytest.raises(CorpusError, match="base"):
            build_heterogeneous(
                Collection(id="b", documents=[]),
                [],
                HierarchyConfig(level_topic_counts=(2, 3)),
            )

    def test_zero_batches_rejected(self, theme_generator):
        base = make_theme_collection(theme_generator, "base", [0], 5, seed=1)
        extra = make_theme_collection(theme_generator, "extra", [1], 5, seed=2)
        with pytest.raises(ValueError, match="batches"):
            build_heterogeneous(
                base, [extra], HierarchyConfig(level_topic_counts=(2, 3)), batches=0
            )


class TestHierarchyValidation:
    def test_edges_must_reference_known_topics(self):
        model = hand_model([[1.0, 0.0], [0.0, 1.0]], ["a", "b"])
        with pytest.raises(ValueError, match="unknown topics"):
            Hierarchy(levels=[model], psis=[], normalized=[], edges=[Edge("tX", "t00")])

    def test_psi_count_must_match_levels(self):
        model = hand_model([[1.0, 0.0], [0.0, 1.0]], ["a", "b"])
        psi = psi_of([[1.0, 0.0]], ["p0"], ["c0", "c1"])
        with pytest.raises(ValueError, match="adjacent"):
            Hierarchy(levels=[model], psis=[psi], normalized=[], edges=[])

    def test_level_of_locates_topics(self, theme_hierarchy):
        assert theme_hierarchy.level_of("l0_t00") == 0
        assert theme_hierarchy.level_of("l1_t03") == 1
        with pytest.raises(KeyError):
            theme_hierarchy.level_of("nope")


class TestPersistence:
    def test_round_trip_preserves_structure(self, theme_hierarchy, tmp_path):
        save_hierarchy(theme_hierarchy, tmp_path / "hier")
        loaded = load_hierarchy(tmp_path / "hier")
        assert len(loaded.levels) == 2
        assert loaded.levels[0].topic_ids == theme_hierarchy.levels[0].topic_ids
        assert loaded.levels[1].topic_ids == theme_hierarchy.levels[1].topic_ids
        np.testing.assert_allclose(
            loaded.psis[0].values, theme_hierarchy.psis[0].values, atol=1e-9
        )
        assert loaded.edges == theme_hierarchy.edges
        for ours, theirs in zip(loaded.edges, theme_hierarchy.edges):
            assert ours.weight == pytest.approx(theirs.weight, abs=1e-12)

    def test_missing_directory_rejected(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="level_0"):
            load_hierarchy(tmp_path / "nothing")

    def test_edge_file_round_trip_with_scores(self, tmp_path):
        edges = [Edge("p0", "c1", 0.75), Edge("p0", "c0", 0.5)]
        write_edges(edges, tmp_path / "edges.json", scores={("p0", "c1"): {"m": 0.9}})
        loaded = load_edges(tmp_path / "edges.json")
        assert loaded == sorted(edges)
        assert [e.weight for e in loaded] == [0.5, 0.75]
