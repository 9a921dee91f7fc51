"""Estimator-style front ends over the functional training API."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from . import artm, hierarchy
from .validation import as_corpus, check_fitted


class ARTM(BaseEstimator):
    """Flat topic model with fit/transform semantics.

    Samples are documents; ``transform`` returns one row per document with
    its topic distribution.
    """

    def __init__(
        self,
        n_topics=10,
        max_iterations=50,
        ll_rel_tolerance=1e-4,
        regularizers=(),
        seed=0,
        modality_weights=None,
        topic_prefix="t",
        fold_in_iterations=20,
    ):
        self.n_topics = n_topics
        self.max_iterations = max_iterations
        self.ll_rel_tolerance = ll_rel_tolerance
        self.regularizers = regularizers
        self.seed = seed
        self.modality_weights = modality_weights
        self.topic_prefix = topic_prefix
        self.fold_in_iterations = fold_in_iterations

    def _config(self) -> artm.TrainConfig:
        return artm.TrainConfig(
            n_topics=self.n_topics,
            max_iterations=self.max_iterations,
            ll_rel_tolerance=self.ll_rel_tolerance,
            regularizers=tuple(self.regularizers),
            seed=self.seed,
            modality_weights=self.modality_weights,
            topic_prefix=self.topic_prefix,
        )

    def fit(self, X, y=None):
        corpus = as_corpus(X)
        self.model_ = artm.train(corpus, self._config())
        self.n_iterations_ = self.model_.n_iterations
        self.ll_history_ = self.model_.ll_history
        return self

    def transform(self, X) -> np.ndarray:
        check_fitted(self, "model_")
        corpus = as_corpus(X)
        columns = []
        for doc in corpus.documents():
            if self.model_.has_doc(doc.id):
                columns.append(self.model_.doc_column(doc.id))
            else:
                columns.append(
                    artm.fold_in(self.model_, doc, self.fold_in_iterations)
                )
        return np.asarray(columns)

    def fit_transform(self, X, y=None) -> np.ndarray:
        return self.fit(X).transform(X)

    def score(self, X, y=None) -> float:
        check_fitted(self, "model_")
        return artm.log_likelihood(self.model_, as_corpus(X))

    def top_tokens(self, topic_id: str, n: int = 10, modality: str = "word"):
        check_fitted(self, "model_")
        return artm.top_tokens(self.model_, topic_id, n, modality)


class HierarchicalARTM(BaseEstimator):
    """Multi-level hierarchy builder wrapping the concat and heterogeneous flows."""

    def __init__(
        self,
        level_topic_counts=(5, 12),
        algo="concat",
        max_iterations=50,
        ll_rel_tolerance=1e-4,
        regularizers=(),
        seed=0,
        modality_weights=None,
        edge_threshold=0.5,
        batch_fraction=0.1,
        batches=None,
    ):
        self.level_topic_counts = level_topic_counts
        self.algo = algo
        self.max_iterations = max_iterations
        self.ll_rel_tolerance = ll_rel_tolerance
        self.regularizers = regularizers
        self.seed = seed
        self.modality_weights = modality_weights
        self.edge_threshold = edge_threshold
        self.batch_fraction = batch_fraction
        self.batches = batches

    def _config(self) -> hierarchy.HierarchyConfig:
        return hierarchy.HierarchyConfig(
            level_topic_counts=tuple(self.level_topic_counts),
            max_iterations=self.max_iterations,
            ll_rel_tolerance=self.ll_rel_tolerance,
            regularizers=tuple(self.regularizers),
            seed=self.seed,
            modality_weights=self.modality_weights,
            edge_threshold=self.edge_threshold,
            batch_fraction=self.batch_fraction,
            batches=self.batches,
        )

    def fit(self, X, y=None):
        corpus = as_corpus(X)
        collections = list(corpus.collections)
        if self.algo == "concat":
            self.hierarchy_ = hierarchy.build_concat(collections, self._config())
        elif self.algo == "heterogeneous":
            self.hierarchy_ = hierarchy.build_heterogeneous(
                collections[0], collections[1:], self._config()
            )
        else:
            raise ValueError(f"unknown algo {self.algo!r}")
        return self

    def transform(self, X) -> np.ndarray:
        """Topic distributions of the deepest level, one row per document."""
        check_fitted(self, "hierarchy_")
        corpus = as_corpus(X)
        deepest = self.hierarchy_.levels[-1]
        columns = []
        for doc in corpus.documents():
            if deepest.has_doc(doc.id):
                columns.append(deepest.doc_column(doc.id))
            else:
                columns.append(artm.fold_in(deepest, doc, 20))
        return np.asarray(columns)

    def fit_transform(self, X, y=None) -> np.ndarray:
        return self.fit(X).transform(X)
