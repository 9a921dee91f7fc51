"""Seeded synthetic corpora with known generating structure, for experiments."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Collection, CorpusSet, Document, Token, merge


def make_random_corpus(
    seed: int,
    max_docs: int = 30,
    max_tokens: int = 50,
    with_tags: bool = False,
) -> CorpusSet:
    """A small random bag-of-words corpus with no planted structure."""
    rng = np.random.default_rng(seed)
    n_docs = int(rng.integers(5, max_docs + 1))
    vocab_size = int(rng.integers(10, max_tokens + 1))
    surfaces = [f"w{i:03d}" for i in range(vocab_size)]
    documents = []
    for d in range(n_docs):
        n_distinct = int(rng.integers(3, min(10, vocab_size) + 1))
        chosen = rng.choice(vocab_size, size=n_distinct, replace=False)
        counts = {
            Token("word", surfaces[i]): int(rng.integers(1, 6)) for i in sorted(chosen)
        }
        if with_tags:
            counts[Token("tag", f"g{int(rng.integers(0, 3))}")] = 1
        documents.append(Document(id=f"d{d:03d}", collection_id="rand", counts=counts))
    return merge([Collection(id="rand", documents=documents)])


@dataclass
class ThemeGenerator:
    """A bank of themes, each owning a block of tokens with Zipf-like weights.

    Token surfaces encode their theme (w<theme><rank>), every theme has one
    tag token, and documents are drawn from mixtures over themes.
    """

    n_themes: int
    tokens_per_theme: int = 12

    def __post_init__(self):
        weights = 1.0 / (np.arange(self.tokens_per_theme) + 1.0)
        self._theme_dist = weights / weights.sum()

    def word_surface(self, theme: int, rank: int) -> str:
        return f"w{theme:02d}{rank:02d}"

    def tag_surface(self, theme: int) -> str:
        return f"theme{theme:02d}"

    def theme_of(self, surface: str) -> int:
        return int(surface[1:3])

    def sample_counts(
        self,
        rng: np.random.Generator,
        mixture: dict[int, float],
        length: int,
    ) -> dict[Token, int]:
        themes = sorted(mixture)
        probs = np.array([mixture[t] for t in themes])
        probs = probs / probs.sum()
        counts: dict[Token, int] = {}
        theme_draws = rng.choice(len(themes), size=length, p=probs)
        rank_draws = rng.choice(self.tokens_per_theme, size=length, p=self._theme_dist)
        for theme_idx, rank in zip(theme_draws, rank_draws):
            token = Token("word", self.word_surface(themes[theme_idx], int(rank)))
            counts[token] = counts.get(token, 0) + 1
        primary = max(mixture, key=lambda t: (mixture[t], -t))
        counts[Token("tag", self.tag_surface(primary))] = 1
        return dict(sorted(counts.items()))

    def embedding_vectors(self) -> dict[str, np.ndarray]:
        """One unit vector per word token, pointing along its theme axis."""
        vectors = {}
        for theme in range(self.n_themes):
            axis = np.zeros(self.n_themes)
            axis[theme] = 1.0
            for rank in range(self.tokens_per_theme):
                vectors[self.word_surface(theme, rank)] = axis.copy()
        return vectors


def make_theme_collection(
    generator: ThemeGenerator,
    collection_id: str,
    themes: list[int],
    n_docs: int,
    seed: int,
    purity: float = 0.85,
    length_range: tuple[int, int] = (40, 80),
) -> Collection:
    """Documents drawn mostly from one theme each, cycling through the given set."""
    rng = np.random.default_rng(seed)
    documents = []
    for d in range(n_docs):
        primary = themes[d % len(themes)]
        others = [t for t in themes if t != primary]
        mixture = {primary: purity}
        if others:
            secondary = int(rng.choice(others))
            mixture[secondary] = 1.0 - purity
        length = int(rng.integers(length_range[0], length_range[1] + 1))
        counts = generator.sample_counts(rng, mixture, length)
        documents.append(
            Document(
                id=f"{collection_id}_d{d:03d}",
                collection_id=collection_id,
                counts=counts,
                title=f"{collection_id} document {d:03d}",
            )
        )
    return Collection(id=collection_id, documents=documents)


def sidecar_records(collection: Collection, author: str = "generator") -> list[dict]:
    """Raw-text records matching a synthetic collection, for display and upload."""
    records = []
    for doc in collection.documents:
        words = []
        tags = []
        for token, count in sorted(doc.counts.items()):
            if token.modality == "word":
                words.extend([token.surface] * count)
            else:
                tags.append(token.surface)
        records.append(
            {
                "id": doc.id,
                "title": doc.title or doc.id,
                "author": author,
                "collection": doc.collection_id,
                "text": " ".join(words),
                "tags": tags,
            }
        )
    return records
