"""Multimodal bag-of-words collections: ingestion, merging, co-occurrence statistics."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple

MODALITIES = ("word", "tag")


class CorpusError(ValueError):
    """Malformed or inconsistent corpus data."""


class Token(NamedTuple):
    # Field order (modality, surface) gives the canonical sort order:
    # lexicographic by modality, then by surface.
    modality: str
    surface: str

    def __str__(self):
        return f"{self.modality}:{self.surface}"

    @classmethod
    def parse(cls, text: str) -> "Token":
        modality, _, surface = text.partition(":")
        if modality not in MODALITIES or not surface:
            raise CorpusError(f"cannot parse token {text!r}")
        return cls(modality, surface)


def _check_token(token: Token) -> Token:
    if token.modality not in MODALITIES:
        raise CorpusError(f"unknown modality {token.modality!r}")
    if not token.surface or any(ch.isspace() for ch in token.surface):
        raise CorpusError(f"bad token surface {token.surface!r}")
    return token


@dataclass
class Document:
    """One bag-of-words document; ``counts`` maps tokens to positive counts."""

    id: str
    collection_id: str
    counts: dict[Token, int]
    title: str | None = None
    raw_text: str | None = None

    def __post_init__(self):
        if not self.counts:
            raise CorpusError(f"document {self.id!r} is empty")
        for token, count in self.counts.items():
            _check_token(token)
            if count < 1:
                raise CorpusError(f"zero-count token {token} in document {self.id!r}")

    @property
    def length(self) -> int:
        return sum(self.counts.values())

    def tokens(self) -> set[Token]:
        return set(self.counts)


@dataclass
class Collection:
    """A named set of documents with its own per-modality vocabulary."""

    id: str
    documents: list[Document]
    vocabulary: dict[str, frozenset[Token]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.vocabulary:
            self.vocabulary = _vocabulary_of(self.documents)
        observed = set().union(*self.vocabulary.values()) if self.vocabulary else set()
        for doc in self.documents:
            missing = doc.tokens() - observed
            if missing:
                raise CorpusError(
                    f"document {doc.id!r} uses tokens outside the vocabulary: {sorted(missing)[:3]}"
                )

    @property
    def vocabulary_size(self) -> int:
        return sum(len(v) for v in self.vocabulary.values())

    def all_tokens(self) -> set[Token]:
        return set().union(*self.vocabulary.values()) if self.vocabulary else set()


def _vocabulary_of(documents: Iterable[Document]) -> dict[str, frozenset[Token]]:
    per_modality: dict[str, set[Token]] = {m: set() for m in MODALITIES}
    for doc in documents:
        for token in doc.counts:
            per_modality[token.modality].add(token)
    return {m: frozenset(v) for m, v in per_modality.items()}


@dataclass
class CorpusSet:
    """Several collections merged over a common vocabulary with a dense token index."""

    collections: list[Collection]
    common_vocabulary: tuple[Token, ...]
    token_index: dict[Token, int]

    @property
    def n_tokens(self) -> int:
        return len(self.common_vocabulary)

    @property
    def n_docs(self) -> int:
        return sum(len(c.documents) for c in self.collections)

    def documents(self) -> Iterator[Document]:
        for collection in self.collections:
            yield from collection.documents

    def doc_ids(self) -> list[str]:
        return [doc.id for doc in self.documents()]

    def document_by_id(self, doc_id: str) -> Document:
        for doc in self.documents():
            if doc.id == doc_id:
                return doc
        raise KeyError(doc_id)


def ingest(path, collection_id: str, format: str = "bow") -> Collection:
    """Parse a bag-of-words corpus file into a Collection.

    Line format: ``<doc_id> |@word tok[:count] ... |@tag tok[:count] ...``
    with count defaulting to 1 and ``#`` starting comment lines.
    """
    if format != "bow":
        raise CorpusError(f"unknown corpus format {format!r}")
    documents = []
    seen_ids: set[str] = set()
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                doc = _parse_line(line, collection_id)
            except CorpusError as exc:
                raise CorpusError(f"{path}:{lineno}: {exc}") from None
            if doc.id in seen_ids:
                raise CorpusError(f"{path}:{lineno}: duplicate document id {doc.id!r}")
            seen_ids.add(doc.id)
            documents.append(doc)
    return Collection(id=collection_id, documents=documents)


def _parse_line(line: str, collection_id: str) -> Document:
    head, *blocks = line.split("|")
    doc_id = head.strip()
    if not doc_id or " " in doc_id:
        raise CorpusError(f"malformed document id {head.strip()!r}")
    counts: dict[Token, int] = {}
    for block in blocks:
        block = block.strip()
        if not block:
            continue
        marker, *entries = block.split()
        if not marker.startswith("@") or marker[1:] not in MODALITIES:
            raise CorpusError(f"unknown modality block {marker!r}")
        modality = marker[1:]
        for entry in entries:
            surface, _, count_text = entry.rpartition(":")
            if not surface:
                surface, count_text = entry, ""
            if count_text:
                try:
                    count = int(count_text)
                except ValueError:
                    raise CorpusError(f"bad count in {entry!r}") from None
            else:
                count = 1
            if count == 0:
                raise CorpusError(f"zero-count token {surface!r}")
            if count < 0:
                raise CorpusError(f"negative count in {entry!r}")
            token = _check_token(Token(modality, surface))
            counts[token] = counts.get(token, 0) + count
    if not counts:
        raise CorpusError(f"empty document {doc_id!r}")
    # Deterministic token order inside the document mapping.
    return Document(id=doc_id, collection_id=collection_id, counts=dict(sorted(counts.items())))


def write_corpus(collection: Collection, path) -> None:
    """Serialize a collection back to the one-document-per-line format."""
    with open(path, "w", encoding="utf-8") as handle:
        for doc in collection.documents:
            blocks = []
            for modality in MODALITIES:
                entries = [
                    f"{t.surface}:{c}" if c != 1 else t.surface
                    for t, c in sorted(doc.counts.items())
                    if t.modality == modality
                ]
                if entries:
                    blocks.append(f"|@{modality} " + " ".join(entries))
            handle.write(f"{doc.id} " + " ".join(blocks) + "\n")


def write_sidecar(records: list[dict], path) -> None:
    """Write the raw-text sidecar as JSON lines."""
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")


def read_sidecar(path) -> dict[str, dict]:
    """Read the sidecar into a mapping from document id to its record."""
    records: dict[str, dict] = {}
    required = {"id", "title", "author", "collection", "text", "tags"}
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            missing = required - set(record)
            if missing:
                raise CorpusError(f"{path}:{lineno}: sidecar record missing {sorted(missing)}")
            records[record["id"]] = record
    return records


def merge(collections: list[Collection]) -> CorpusSet:
    """Merge collections into one corpus over the union vocabulary.

    The token index is dense, contiguous from 0 and lexicographic by
    (modality, surface), so it only depends on the vocabulary content.
    """
    ids = [c.id for c in collections]
    if len(set(ids)) != len(ids):
        raise CorpusError(f"duplicate collection ids: {ids}")
    seen_docs: set[str] = set()
    for collection in collections:
        for doc in collection.documents:
            if doc.id in seen_docs:
                raise CorpusError(f"duplicate document id across collections: {doc.id!r}")
            seen_docs.add(doc.id)
    union: set[Token] = set()
    for collection in collections:
        union |= collection.all_tokens()
    ordered = tuple(sorted(union))
    return CorpusSet(
        collections=list(collections),
        common_vocabulary=ordered,
        token_index={token: i for i, token in enumerate(ordered)},
    )


@dataclass
class CoocStats:
    """Document / co-document frequencies and tf-idf values over one corpus."""

    doc_freq: dict[Token, int]
    codoc_freq: dict[tuple[Token, Token], int]
    n_docs: int
    tfidf_cache: dict[tuple[Token, str], float]
    postings: dict[Token, tuple[str, ...]] = field(default_factory=dict)

    def df(self, token: Token) -> int:
        return self.doc_freq.get(token, 0)

    def codf(self, a: Token, b: Token) -> int:
        key = (a, b) if a <= b else (b, a)
        return self.codoc_freq.get(key, 0)

    def tfidf(self, token: Token, doc_id: str) -> float:
        return self.tfidf_cache.get((token, doc_id), 0.0)

    def docs_with(self, token: Token) -> tuple[str, ...]:
        return self.postings.get(token, ())


def _cooc_chunk(docs: list[Document]):
    doc_freq: dict[Token, int] = {}
    codoc_freq: dict[tuple[Token, Token], int] = {}
    postings: dict[Token, list[str]] = {}
    for doc in docs:
        tokens = sorted(doc.counts)
        for i, token in enumerate(tokens):
            doc_freq[token] = doc_freq.get(token, 0) + 1
            postings.setdefault(token, []).append(doc.id)
            for other in tokens[i + 1 :]:
                key = (token, other)
                codoc_freq[key] = codoc_freq.get(key, 0) + 1
    return doc_freq, codoc_freq, postings


def compute_cooc(corpus: CorpusSet, threads: int | None = None) -> CoocStats:
    """Count d(w), d(w_i, w_j) and per-document augmented-frequency tf-idf.

    tf(w, d) = 1/2 + f(w, d) / max_{w' in d} f(w', d) over the document's own
    modality-agnostic maximum; idf(w) = ln(|D| / d(w)).
    """
    docs = list(corpus.documents())
    if not docs:
        raise CorpusError("empty corpus")
    n_docs = len(docs)

    chunks = _partition(docs, threads)
    if len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            results = list(pool.map(_cooc_chunk, chunks))
    else:
        results = [_cooc_chunk(chunks[0])]

    doc_freq: dict[Token, int] = {}
    codoc_freq: dict[tuple[Token, Token], int] = {}
    postings: dict[Token, list[str]] = {}
    # Merge in chunk order so the result is independent of worker scheduling.
    for chunk_df, chunk_codf, chunk_postings in results:
        for token, count in chunk_df.items():
            doc_freq[token] = doc_freq.get(token, 0) + count
        for pair, count in chunk_codf.items():
            codoc_freq[pair] = codoc_freq.get(pair, 0) + count
        for token, ids in chunk_postings.items():
            postings.setdefault(token, []).extend(ids)

    tfidf_cache: dict[tuple[Token, str], float] = {}
    for doc in docs:
        max_count = max(doc.counts.values())
        for token, count in doc.counts.items():
            tf = 0.5 + count / max_count
            idf = math.log(n_docs / doc_freq[token])
            tfidf_cache[(token, doc.id)] = tf * idf

    return CoocStats(
        doc_freq=doc_freq,
        codoc_freq=codoc_freq,
        n_docs=n_docs,
        tfidf_cache=tfidf_cache,
        postings={t: tuple(ids) for t, ids in postings.items()},
    )


def _partition(docs: list[Document], threads: int | None) -> list[list[Document]]:
    if not threads or threads <= 1 or len(docs) < 2:
        return [docs]
    n_chunks = min(threads, len(docs))
    size = math.ceil(len(docs) / n_chunks)
    return [docs[i : i + size] for i in range(0, len(docs), size)]


@dataclass
class TokenProbs:
    """Document-level probability estimates p(w) = d(w)/|D|, p(w_i, w_j) = d(w_i, w_j)/|D|."""

    single: dict[Token, float]
    pair: dict[tuple[Token, Token], float]
    n_docs: int

    def p(self, token: Token) -> float:
        return self.single.get(token, 0.0)

    def p_pair(self, a: Token, b: Token) -> float:
        key = (a, b) if a <= b else (b, a)
        return self.pair.get(key, 0.0)


def estimate_pw(corpus: CorpusSet, cooc: CoocStats | None = None) -> TokenProbs:
    """Estimate token and pair probabilities from document frequencies."""
    if cooc is None:
        cooc = compute_cooc(corpus)
    n = cooc.n_docs
    return TokenProbs(
        single={t: c / n for t, c in cooc.doc_freq.items()},
        pair={p: c / n for p, c in cooc.codoc_freq.items()},
        n_docs=n,
    )
