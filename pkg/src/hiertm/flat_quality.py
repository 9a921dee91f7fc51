"""Flat topic quality: coherence family, embedding distance, and PMI family."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

from .artm import TopicModel, top_tokens
from .corpus import CoocStats, Token, TokenProbs

if TYPE_CHECKING:
    from .edge_quality import EmbeddingStore

COUNT_EPS = 1.0
PROB_EPS = 1e-12

MEASURES = ("coherence", "coherence_tfidf", "coherence_embed", "pmi", "npmi", "lcp")


class DegenerateTopicError(ValueError):
    """Topic has too few top tokens to form a pair."""


def _top_pairs(model: TopicModel, topic: str, n: int) -> list[tuple[Token, Token]]:
    tokens = top_tokens(model, topic, n, modality="word")
    if len(tokens) < 2:
        raise DegenerateTopicError(f"topic {topic} has fewer than 2 top tokens")
    return [(tokens[i], tokens[j]) for i in range(len(tokens)) for j in range(i + 1, len(tokens))]


def _mean_or_nan(terms: list[float], topic: str, measure: str) -> float:
    if not terms:
        warnings.warn(f"{measure} undefined for topic {topic}: no scorable token pairs")
        return float("nan")
    return sum(terms) / len(terms)


def coherence(topic: str, model: TopicModel, cooc: CoocStats, n: int = 10) -> float:
    """Co-document coherence: mean over i<j of ln((d(wi, wj) + 1) / d(wi)).

    Pairs whose first token never occurs in the co-occurrence corpus are
    skipped and the pair count shrinks accordingly.
    """
    terms = []
    for first, second in _top_pairs(model, topic, n):
        d_first = cooc.df(first)
        if d_first == 0 or cooc.df(second) == 0:
            continue
        terms.append(math.log((cooc.codf(first, second) + COUNT_EPS) / d_first))
    return _mean_or_nan(terms, topic, "coherence")


def coherence_tfidf(topic: str, model: TopicModel, cooc: CoocStats, n: int = 10) -> float:
    """Tf-idf coherence over ordered pairs of distinct top tokens.

    Each term is ln of (sum over co-documents of tfidf(wi, d) * tfidf(wj, d),
    plus a tiny epsilon) divided by the sum of tfidf(wi, d) over documents
    containing wi; zero denominators skip the pair.
    """
    tokens = top_tokens(model, topic, n, modality="word")
    if len(tokens) < 2:
        raise DegenerateTopicError(f"topic {topic} has fewer than 2 top tokens")
    terms = []
    for first in tokens:
        docs_first = cooc.docs_with(first)
        denom = sum(cooc.tfidf(first, d) for d in docs_first)
        for second in tokens:
            if first == second:
                continue
            if denom <= 0:
                continue
            shared = set(docs_first) & set(cooc.docs_with(second))
            numer = sum(cooc.tfidf(first, d) * cooc.tfidf(second, d) for d in shared)
            terms.append(math.log((numer + PROB_EPS) / denom))
    return _mean_or_nan(terms, topic, "coherence_tfidf")


def coherence_embed(topic: str, model: TopicModel, embeds: "EmbeddingStore", n: int = 10) -> float:
    """Mean embedding distance 1 - <v_i, v_j> over distinct top-token pairs."""
    tokens = top_tokens(model, topic, n, modality="word")
    if len(tokens) < 2:
        raise DegenerateTopicError(f"topic {topic} has fewer than 2 top tokens")
    vectors = [embeds.get(t.surface) for t in tokens]
    terms = []
    for i in range(len(tokens)):
        for j in range(i + 1, len(tokens)):
            if vectors[i] is None or vectors[j] is None:
                continue
            terms.append(1.0 - float(vectors[i] @ vectors[j]))
    return _mean_or_nan(terms, topic, "coherence_embed")


def _smoothed(p: float) -> float:
    return p + PROB_EPS


def pmi(topic: str, model: TopicModel, probs: TokenProbs, n: int = 10) -> float:
    """Mean pointwise mutual information ln(p(wi, wj) / (p(wi) p(wj))) over i<j."""
    terms = []
    for first, second in _top_pairs(model, topic, n):
        joint = _smoothed(probs.p_pair(first, second))
        terms.append(math.log(joint / (_smoothed(probs.p(first)) * _smoothed(probs.p(second)))))
    return _mean_or_nan(terms, topic, "pmi")


def npmi(topic: str, model: TopicModel, probs: TokenProbs, n: int = 10) -> float:
    """PMI normalized by -ln p(wi, wj); always-co-occurring pairs score 1."""
    terms = []
    for first, second in _top_pairs(model, topic, n):
        joint = _smoothed(probs.p_pair(first, second))
        ratio = math.log(joint / (_smoothed(probs.p(first)) * _smoothed(probs.p(second))))
        terms.append(ratio / -math.log(joint))
    return _mean_or_nan(terms, topic, "npmi")


def lcp(topic: str, model: TopicModel, probs: TokenProbs, n: int = 10) -> float:
    """Mean log conditional probability ln(p(wi, wj) / p(wi)) over i<j."""
    terms = []
    for first, second in _top_pairs(model, topic, n):
        joint = _smoothed(probs.p_pair(first, second))
        terms.append(math.log(joint / _smoothed(probs.p(first))))
    return _mean_or_nan(terms, topic, "lcp")


@dataclass
class FlatScoreReport:
    """Per-topic values for each requested flat measure."""

    values: dict[str, dict[str, float]]
    n_top: int
    epsilon: float = COUNT_EPS

    def topics(self) -> list[str]:
        return sorted(self.values)


def score_all_flat(
    model: TopicModel,
    measures: tuple[str, ...] = MEASURES,
    cooc: CoocStats | None = None,
    probs: TokenProbs | None = None,
    embeds: "EmbeddingStore | None" = None,
    n: int = 10,
) -> FlatScoreReport:
    """Evaluate the requested measures for every topic of one model."""
    needs = {
        "coherence": cooc,
        "coherence_tfidf": cooc,
        "coherence_embed": embeds,
        "pmi": probs,
        "npmi": probs,
        "lcp": probs,
    }
    for measure in measures:
        if measure not in needs:
            raise ValueError(f"unknown measure {measure!r}")
        if needs[measure] is None:
            raise ValueError(f"measure {measure!r} requires a resource that was not given")
    report: dict[str, dict[str, float]] = {}
    for topic in model.topic_ids:
        row = {}
        for measure in measures:
            if measure == "coherence":
                row[measure] = coherence(topic, model, cooc, n)
            elif measure == "coherence_tfidf":
                row[measure] = coherence_tfidf(topic, model, cooc, n)
            elif measure == "coherence_embed":
                row[measure] = coherence_embed(topic, model, embeds, n)
            elif measure == "pmi":
                row[measure] = pmi(topic, model, probs, n)
            elif measure == "npmi":
                row[measure] = npmi(topic, model, probs, n)
            elif measure == "lcp":
                row[measure] = lcp(topic, model, probs, n)
        report[topic] = row
    return FlatScoreReport(values=report, n_top=n)


def write_flat_report(report: FlatScoreReport, prefix: Path | str) -> None:
    """Write <prefix>.tsv and <prefix>.json with identical content."""
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    with open(prefix.with_suffix(".tsv"), "w", encoding="utf-8") as handle:
        handle.write("topic\tmeasure\tvalue\n")
        for topic in report.topics():
            for measure in sorted(report.values[topic]):
                value = report.values[topic][measure]
                handle.write(f"{topic}\t{measure}\t{value:.12g}\n")
    payload = {
        "epsilon": report.epsilon,
        "n_top": report.n_top,
        "topics": report.values,
    }
    with open(prefix.with_suffix(".json"), "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True, ensure_ascii=False)
        handle.write("\n")
