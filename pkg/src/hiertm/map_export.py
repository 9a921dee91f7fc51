"""Assemble hierarchy, spectre order, and documents into the servable topic map."""

from __future__ import annotations

import json
from pathlib import Path

from .artm import TopicModel, top_tokens
from .corpus import CorpusSet
from .hierarchy import Hierarchy
from .spectre import Spectre

TOP_DOC_TOPICS = 3


def _topic_tags(model: TopicModel, topic_id: str, n: int) -> list[str]:
    column = model.topic_column(topic_id)
    tagged = [
        (token.surface, column[i])
        for i, token in enumerate(model.tokens)
        if token.modality == "tag" and column[i] > 0
    ]
    tagged.sort(key=lambda pair: (-pair[1], pair[0]))
    return [surface for surface, _ in tagged[:n]]


def _attach_documents(
    model: TopicModel,
    corpus: CorpusSet,
    docs_per_topic: int,
) -> dict[str, list[dict]]:
    """Assign each document to its strongest topics at one level.

    A document appears under every topic ranked in the top few of its theta
    column, so one document may live in several cells of the map.
    """
    attached: dict[str, list[tuple[float, str, str, str]]] = {t: [] for t in model.topic_ids}
    titles = {doc.id: (doc.title or doc.id, doc.collection_id) for doc in corpus.documents()}
    for j, doc_id in enumerate(model.doc_ids):
        column = model.theta[:, j]
        ranked = sorted(range(len(column)), key=lambda t: (-column[t], model.topic_ids[t]))
        for t in ranked[:TOP_DOC_TOPICS]:
            if column[t] <= 0:
                continue
            title, collection_id = titles.get(doc_id, (doc_id, ""))
            attached[model.topic_ids[t]].append((float(column[t]), doc_id, title, collection_id))
    result: dict[str, list[dict]] = {}
    for topic_id, items in attached.items():
        items.sort(key=lambda item: (-item[0], item[1]))
        result[topic_id] = [
            {"id": doc_id, "title": title, "collection_id": collection_id, "weight": weight}
            for weight, doc_id, title, collection_id in items[:docs_per_topic]
        ]
    return result


def export_map(
    hierarchy: Hierarchy,
    spectre: Spectre,
    corpus: CorpusSet,
    docs_per_topic: int = 100,
) -> dict:
    """Build the JSON-ready map structure consumed by the service and the UI."""
    top = hierarchy.levels[0]
    if len(spectre.order) != top.n_topics:
        raise ValueError("spectre order does not cover the top level")
    children_of: dict[str, list[tuple[float, str]]] = {}
    for edge in hierarchy.edges:
        children_of.setdefault(edge.parent, []).append((edge.weight, edge.child))
    spectre_rank = {top.topic_ids[t]: rank for rank, t in enumerate(spectre.order)}

    topics = []
    documents: dict[str, list[dict]] = {}
    for level_index, model in enumerate(hierarchy.levels):
        if level_index > 0:
            documents.update(_attach_documents(model, corpus, docs_per_topic))
        for topic_id in model.topic_ids:
            ordered_children = [
                child
                for _, child in sorted(
                    children_of.get(topic_id, []), key=lambda pair: (-pair[0], pair[1])
                )
            ]
            topics.append(
                {
                    "id": topic_id,
                    "level": level_index,
                    "top_words": {
                        "3": [str(t.surface) for t in top_tokens(model, topic_id, 3)],
                        "10": [str(t.surface) for t in top_tokens(model, topic_id, 10)],
                    },
                    "top_tags": _topic_tags(model, topic_id, 3),
                    "children": ordered_children,
                    "spectre_rank": spectre_rank.get(topic_id),
                }
            )
    return {
        "levels": [
            {"level": i, "n_topics": model.n_topics, "topic_ids": list(model.topic_ids)}
            for i, model in enumerate(hierarchy.levels)
        ],
        "topics": topics,
        "documents": documents,
    }


def paginate_topic_docs(export: dict, topic_id: str, offset: int, limit: int) -> list[dict]:
    """Stable slice of a topic's weight-ordered document list."""
    if offset < 0 or limit < 0:
        raise ValueError("offset and limit must be nonnegative")
    known = {t["id"] for t in export["topics"]}
    if topic_id not in known:
        raise KeyError(topic_id)
    docs = export["documents"].get(topic_id, [])
    return docs[offset : offset + limit]


def save_map(export: dict, path: Path | str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(export, handle, indent=2, sort_keys=True, ensure_ascii=False)
        handle.write("\n")


def load_map(path: Path | str) -> dict:
    with open(path, encoding="utf-8") as handle:
        return json.load(handle)
