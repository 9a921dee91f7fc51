"""Hand-construction helpers shared across test modules."""

from __future__ import annotations

import numpy as np

from hiertm.artm import TopicModel
from hiertm.corpus import Collection, CorpusSet, Document, Token, merge


def word(surface: str) -> Token:
    return Token("word", surface)


def tag(surface: str) -> Token:
    return Token("tag", surface)


def doc(doc_id: str, counts: dict[Token, int], collection_id: str = "c") -> Document:
    return Document(id=doc_id, collection_id=collection_id, counts=counts)


def corpus_of(*docs: Document, collection_id: str = "c") -> CorpusSet:
    return merge([Collection(id=collection_id, documents=list(docs))])


def hand_model(
    columns,
    surfaces,
    topic_ids=None,
    doc_ids=("d0",),
    theta=None,
    modalities=None,
) -> TopicModel:
    """Build a TopicModel directly from phi columns over word-token surfaces."""
    phi = np.asarray(columns, dtype=float).T
    n_tokens, n_topics = phi.shape
    assert n_tokens == len(surfaces)
    if topic_ids is None:
        topic_ids = tuple(f"t{i:02d}" for i in range(n_topics))
    if theta is None:
        theta = np.full((n_topics, len(doc_ids)), 1.0 / n_topics)
    if modalities is None:
        modalities = ["word"] * len(surfaces)
    tokens = tuple(Token(m, s) for m, s in zip(modalities, surfaces))
    return TopicModel(
        phi=phi,
        theta=np.asarray(theta, dtype=float),
        tokens=tokens,
        topic_ids=tuple(topic_ids),
        doc_ids=tuple(doc_ids),
        modality_weights={"word": 1.0, "tag": 1.0},
        seed=0,
    )
