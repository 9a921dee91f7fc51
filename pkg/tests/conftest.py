"""Shared fixtures: small hand corpora and a prebuilt synthetic hierarchy."""

from __future__ import annotations

import pytest

from hiertm.corpus import CorpusSet, compute_cooc
from hiertm.hierarchy import HierarchyConfig, build_concat
from hiertm.synthetic import ThemeGenerator, make_theme_collection

from helpers import corpus_of, doc, word


@pytest.fixture
def four_doc_corpus() -> CorpusSet:
    """d(a) = 3, d(b) = 2, d(a, b) = 2 over four documents."""
    return corpus_of(
        doc("d1", {word("a"): 1, word("b"): 1}),
        doc("d2", {word("a"): 1, word("b"): 1}),
        doc("d3", {word("a"): 1}),
        doc("d4", {word("c"): 1}),
    )


@pytest.fixture
def four_doc_cooc(four_doc_corpus):
    return compute_cooc(four_doc_corpus)


@pytest.fixture(scope="session")
def theme_generator() -> ThemeGenerator:
    return ThemeGenerator(n_themes=3)


@pytest.fixture(scope="session")
def theme_collections(theme_generator):
    return [
        make_theme_collection(theme_generator, "alpha", [0, 1, 2], n_docs=24, seed=11),
        make_theme_collection(theme_generator, "beta", [0, 1, 2], n_docs=24, seed=12),
    ]


@pytest.fixture(scope="session")
def theme_hierarchy(theme_collections):
    """A small trained two-level hierarchy reused by read-only tests."""
    config = HierarchyConfig(
        level_topic_counts=(3, 6), max_iterations=60, seed=7, edge_threshold=0.3
    )
    return build_concat(theme_collections, config)
