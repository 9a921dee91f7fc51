"""Read-only HTTP service over an exported topic map and its hierarchy."""

from __future__ import annotations

import json
from contextlib import asynccontextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from fastapi import FastAPI, HTTPException, Request, Response
from fastapi.middleware.cors import CORSMiddleware

from . import corpus as corpus_mod
from .artm import OutOfVocabularyError, TopicModel, fold_in
from .corpus import Token
from .hierarchy import load_hierarchy

MAX_UPLOAD_BYTES = 1 << 20
FOLD_IN_ITERATIONS = 20
MAX_HIGHLIGHTED_TOPICS = 5
MAX_SUGGESTIONS = 5


@dataclass
class ServeState:
    """Everything the endpoints read; immutable once loaded."""

    map_bytes: bytes
    export: dict
    top_model: TopicModel
    deep_model: TopicModel
    sidecar: dict[str, dict] = field(default_factory=dict)
    inverted: dict[str, set[str]] = field(default_factory=dict)
    topic_docs: dict[str, set[str]] = field(default_factory=dict)
    titles: dict[str, str] = field(default_factory=dict)


def _build_topic_docs(export: dict) -> dict[str, set[str]]:
    """Documents reachable from each topic: its own list plus its children's."""
    children = {t["id"]: t["children"] for t in export["topics"]}
    own = {tid: {d["id"] for d in docs} for tid, docs in export["documents"].items()}

    def reachable(topic_id: str, seen: set[str]) -> set[str]:
        if topic_id in seen:
            return set()
        seen.add(topic_id)
        docs = set(own.get(topic_id, set()))
        for child in children.get(topic_id, []):
            docs |= reachable(child, seen)
        return docs

    return {tid: reachable(tid, set()) for tid in children}


def load_state(
    model_dir: Path | str,
    corpus_paths=None,
    collection_ids=None,
    sidecar_path=None,
) -> ServeState:
    """Load the map, per-level models, corpus index, and sidecar from disk."""
    directory = Path(model_dir)
    map_path = directory / "map.json"
    if not map_path.exists():
        raise FileNotFoundError(f"no map.json under {directory}; run export-map first")
    map_bytes = map_path.read_bytes()
    export = json.loads(map_bytes)
    hierarchy = load_hierarchy(directory)

    sidecar = corpus_mod.read_sidecar(sidecar_path) if sidecar_path else {}
    inverted: dict[str, set[str]] = {}
    titles: dict[str, str] = {}
    if corpus_paths:
        if isinstance(corpus_paths, (str, Path)):
            corpus_paths = [corpus_paths]
        ids = collection_ids or [Path(p).stem for p in corpus_paths]
        if isinstance(ids, str):
            ids = [ids]
        corpus = corpus_mod.merge(
            [corpus_mod.ingest(p, cid) for p, cid in zip(corpus_paths, ids)]
        )
        for doc in corpus.documents():
            titles[doc.id] = doc.title or doc.id
            for token in doc.counts:
                if token.modality == "word":
                    inverted.setdefault(token.surface.lower(), set()).add(doc.id)
    for doc_id, record in sidecar.items():
        # Sidecar titles win: bow files carry no display metadata, so the
        # corpus pass above can only ever fall back to the document id.
        title = record.get("title")
        if title:
            titles[doc_id] = title
        else:
            titles.setdefault(doc_id, doc_id)

    return ServeState(
        map_bytes=map_bytes,
        export=export,
        top_model=hierarchy.levels[0],
        deep_model=hierarchy.levels[-1],
        sidecar=sidecar,
        inverted=inverted,
        topic_docs=_build_topic_docs(export),
        titles=titles,
    )


def _query_counts(state: ServeState, text: str) -> dict[Token, int]:
    counts: dict[Token, int] = {}
    for word in text.lower().split():
        token = Token("word", word)
        if state.top_model.has_token(token):
            counts[token] = counts.get(token, 0) + 1
    return counts


def _conjunction_matches(state: ServeState, text: str) -> set[str]:
    words = text.lower().split()
    if not words:
        return set()
    matched: set[str] | None = None
    for word in words:
        docs = state.inverted.get(word, set())
        matched = docs if matched is None else matched & docs
        if not matched:
            return set()
    return matched


def _topic_response(state: ServeState, counts: dict[Token, int], text: str) -> dict:
    weights = fold_in(state.top_model, counts, FOLD_IN_ITERATIONS)
    matched = _conjunction_matches(state, text)
    order = sorted(
        range(len(weights)),
        key=lambda t: (-weights[t], state.top_model.topic_ids[t]),
    )
    topics = []
    for t in order[:MAX_HIGHLIGHTED_TOPICS]:
        if weights[t] <= 0:
            continue
        topic_id = state.top_model.topic_ids[t]
        topic_matches = sorted(matched & state.topic_docs.get(topic_id, set()))
        topics.append(
            {
                "id": topic_id,
                "weight": float(weights[t]),
                "match_count": len(topic_matches),
                "matched_doc_ids": topic_matches[:50],
            }
        )
    return {"oov": False, "topics": topics, "total_matches": len(matched)}


def _require_state(request: Request) -> ServeState:
    state = getattr(request.app.state, "store", None)
    if state is None:
        raise HTTPException(status_code=503, detail="model is still loading")
    return state


def create_app(loader: Callable[[], ServeState]) -> FastAPI:
    """Build the application; the model loads once at startup."""

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        app.state.store = loader()
        yield

    app = FastAPI(title="hiertm topic map", lifespan=lifespan)
    app.state.store = None
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.get("/api/map")
    def get_map(request: Request):
        state = _require_state(request)
        return Response(content=state.map_bytes, media_type="application/json")

    @app.get("/api/search")
    def search(request: Request, q: str = ""):
        state = _require_state(request)
        if not q.strip():
            raise HTTPException(status_code=400, detail="empty query")
        counts = _query_counts(state, q)
        if not counts:
            return {"oov": True, "topics": [], "total_matches": 0}
        try:
            return _topic_response(state, counts, q)
        except OutOfVocabularyError:
            return {"oov": True, "topics": [], "total_matches": 0}

    @app.post("/api/upload")
    async def upload(request: Request):
        state = _require_state(request)
        body = await request.body()
        if len(body) > MAX_UPLOAD_BYTES:
            raise HTTPException(status_code=413, detail="document exceeds 1 MiB")
        try:
            text = body.decode("utf-8")
        except UnicodeDecodeError:
            raise HTTPException(status_code=422, detail="body is not UTF-8 text") from None
        if not text.strip():
            raise HTTPException(status_code=400, detail="empty document")
        counts = _query_counts(state, text)
        if not counts:
            raise HTTPException(status_code=422, detail="no known tokens in document")
        try:
            return _topic_response(state, counts, text)
        except OutOfVocabularyError:
            raise HTTPException(status_code=422, detail="no usable tokens in document") from None

    @app.get("/api/document/{doc_id}")
    def document(request: Request, doc_id: str):
        state = _require_state(request)
        record = state.sidecar.get(doc_id)
        if record is None:
            raise HTTPException(status_code=404, detail=f"unknown document {doc_id!r}")
        return {
            "id": doc_id,
            "title": record["title"],
            "author": record["author"],
            "collection": record["collection"],
            "text": record["text"],
            "tags": record["tags"],
            "suggested_tags": _suggest_tags(state, doc_id),
            "similar_docs": _similar_docs(state, doc_id),
        }

    @app.get("/api/topic/{level}/{topic_id}/documents")
    def topic_documents(
        request: Request, level: int, topic_id: str, offset: int = 0, limit: int = 10
    ):
        state = _require_state(request)
        matching = [
            t for t in state.export["topics"] if t["id"] == topic_id and t["level"] == level
        ]
        if not matching:
            raise HTTPException(status_code=404, detail=f"unknown topic {topic_id!r}")
        docs = state.export["documents"].get(topic_id, [])
        if offset < 0 or limit < 0:
            raise HTTPException(status_code=400, detail="offset and limit must be nonnegative")
        return {
            "topic": topic_id,
            "level": level,
            "offset": offset,
            "total": len(docs),
            "documents": docs[offset : offset + limit],
        }

    return app


def _suggest_tags(state: ServeState, doc_id: str) -> list[dict]:
    model = state.deep_model
    if not model.has_doc(doc_id):
        return []
    theta_col = model.doc_column(doc_id)
    tag_rows = [i for i, t in enumerate(model.tokens) if t.modality == "tag"]
    if not tag_rows:
        return []
    mass = model.phi[tag_rows, :] @ theta_col
    ranked = sorted(
        (
            (float(mass[k]), model.tokens[tag_rows[k]].surface)
            for k in range(len(tag_rows))
            if mass[k] > 0
        ),
        key=lambda pair: (-pair[0], pair[1]),
    )
    return [{"tag": surface, "weight": weight} for weight, surface in ranked[:MAX_SUGGESTIONS]]


def _similar_docs(state: ServeState, doc_id: str) -> list[dict]:
    model = state.deep_model
    if not model.has_doc(doc_id):
        return []
    sqrt_theta = np.sqrt(model.theta)
    own = sqrt_theta[:, model.doc_position(doc_id)]
    distances = np.linalg.norm(sqrt_theta - own[:, None], axis=0) / np.sqrt(2.0)
    similarity = 1.0 - distances
    ranked = sorted(
        (
            (float(similarity[j]), other)
            for j, other in enumerate(model.doc_ids)
            if other != doc_id
        ),
        key=lambda pair: (-pair[0], pair[1]),
    )
    return [
        {"id": other, "title": state.titles.get(other, other), "similarity": sim}
        for sim, other in ranked[:MAX_SUGGESTIONS]
    ]


def run_server(state: ServeState, host: str = "127.0.0.1", port: int = 8000) -> None:
    import uvicorn

    app = create_app(lambda: state)
    uvicorn.run(app, host=host, port=port, log_level="warning")
