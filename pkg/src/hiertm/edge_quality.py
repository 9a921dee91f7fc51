"""Parent-child edge quality measures and the word embedding store."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .artm import TopicModel, top_tokens
from .corpus import CoocStats, Token
from .hierarchy import Hierarchy

COUNT_EPS = 1.0
KL_DELTA = 1e-12

EDGE_MEASURES = ("embed_sim", "cooc_sim", "hellinger_sim", "kl_sim")


class EmbeddingStore:
    """Word vectors keyed by surface form, unit-normalized at load time."""

    def __init__(self, vectors: dict[str, np.ndarray], dim: int):
        self.dim = dim
        self.vectors: dict[str, np.ndarray] = {}
        for surface, vector in vectors.items():
            arr = np.asarray(vector, dtype=float)
            if arr.shape != (dim,):
                raise ValueError(f"vector for {surface!r} has wrong dimension")
            norm = float(np.linalg.norm(arr))
            if norm == 0.0:
                warnings.warn(f"zero embedding vector for {surface!r}; skipping it")
                continue
            self.vectors[surface] = arr / norm

    def __len__(self) -> int:
        return len(self.vectors)

    def __contains__(self, surface: str) -> bool:
        return surface in self.vectors

    def get(self, surface: str) -> np.ndarray | None:
        return self.vectors.get(surface)


def load_embeddings(path: Path | str) -> EmbeddingStore:
    """Read a text embedding file: header `<count> <dim>`, then token and floats."""
    vectors: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as handle:
        header = handle.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: malformed embedding header")
        declared, dim = int(header[0]), int(header[1])
        for lineno, line in enumerate(handle, 2):
            parts = line.rstrip("\n").split(" ")
            if len(parts) != dim + 1:
                raise ValueError(f"{path}:{lineno}: expected {dim + 1} fields")
            vectors[parts[0]] = np.array([float(v) for v in parts[1:]])
    if len(vectors) != declared:
        warnings.warn(f"{path}: header declares {declared} vectors, found {len(vectors)}")
    return EmbeddingStore(vectors, dim)


def save_embeddings(store_or_vectors, path: Path | str) -> None:
    vectors = store_or_vectors.vectors if isinstance(store_or_vectors, EmbeddingStore) else store_or_vectors
    with open(path, "w", encoding="utf-8") as handle:
        dim = len(next(iter(vectors.values())))
        handle.write(f"{len(vectors)} {dim}\n")
        for surface in sorted(vectors):
            row = " ".join(f"{v:.12g}" for v in vectors[surface])
            handle.write(f"{surface} {row}\n")


def _cross_pairs(
    parent_model: TopicModel,
    parent: str,
    child_model: TopicModel,
    child: str,
    n: int,
) -> list[tuple[Token, Token]]:
    parent_tokens = top_tokens(parent_model, parent, n, modality="word")
    child_tokens = top_tokens(child_model, child, n, modality="word")
    return [(a, t) for a in parent_tokens for t in child_tokens if a != t]


def embed_sim(
    parent: str,
    child: str,
    models: tuple[TopicModel, TopicModel],
    embeds: EmbeddingStore,
    n: int = 10,
) -> float:
    """Mean inner product of embeddings over distinct parent x child top tokens."""
    parent_model, child_model = models
    terms = []
    for first, second in _cross_pairs(parent_model, parent, child_model, child, n):
        v1 = embeds.get(first.surface)
        v2 = embeds.get(second.surface)
        if v1 is None or v2 is None:
            continue
        terms.append(float(v1 @ v2))
    if not terms:
        warnings.warn(f"embed_sim undefined for edge {parent}->{child}")
        return float("nan")
    return sum(terms) / len(terms)


def cooc_sim(
    parent: str,
    child: str,
    models: tuple[TopicModel, TopicModel],
    cooc: CoocStats,
    n: int = 10,
) -> float:
    """Mean of ln((d(wi, wj) + 1) / d(wj)) over distinct parent x child top tokens.

    The denominator counts documents containing the child-side token; pairs
    whose child token never occurs in the co-occurrence corpus are skipped.
    """
    parent_model, child_model = models
    terms = []
    for first, second in _cross_pairs(parent_model, parent, child_model, child, n):
        d_child = cooc.df(second)
        if d_child == 0:
            continue
        terms.append(math.log((cooc.codf(first, second) + COUNT_EPS) / d_child))
    if not terms:
        warnings.warn(f"cooc_sim undefined for edge {parent}->{child}")
        return float("nan")
    return sum(terms) / len(terms)


def _aligned_columns(
    parent_model: TopicModel,
    parent: str,
    child_model: TopicModel,
    child: str,
) -> tuple[np.ndarray, np.ndarray]:
    """Express both topic columns over the union vocabulary, zero-padding gaps."""
    if parent_model.tokens == child_model.tokens:
        return parent_model.topic_column(parent), child_model.topic_column(child)
    union = sorted(set(parent_model.tokens) | set(child_model.tokens))
    p = np.zeros(len(union))
    q = np.zeros(len(union))
    p_col = parent_model.topic_column(parent)
    q_col = child_model.topic_column(child)
    for i, token in enumerate(union):
        if parent_model.has_token(token):
            p[i] = p_col[parent_model.token_index(token)]
        if child_model.has_token(token):
            q[i] = q_col[child_model.token_index(token)]
    for name, column in (("parent", p), ("child", q)):
        if abs(column.sum() - 1.0) > 1e-6:
            raise ValueError(f"{name} column does not stay stochastic after alignment")
    return p, q


def hellinger_sim(
    parent: str,
    child: str,
    models: tuple[TopicModel, TopicModel],
) -> float:
    """1 minus the Hellinger distance of the two full topic distributions."""
    parent_model, child_model = models
    p, q = _aligned_columns(parent_model, parent, child_model, child)
    distance = math.sqrt(float(np.sum((np.sqrt(p) - np.sqrt(q)) ** 2))) / math.sqrt(2.0)
    return 1.0 - distance


def kl_sim(
    parent: str,
    child: str,
    models: tuple[TopicModel, TopicModel],
) -> float:
    """Negated KL divergence of the child column from the parent column.

    Both columns are mixed with a tiny uniform mass and renormalized so that
    exact zeros under sparsing stay finite.
    """
    parent_model, child_model = models
    p, q = _aligned_columns(parent_model, parent, child_model, child)
    size = p.shape[0]
    p = (p + KL_DELTA / size) / (1.0 + KL_DELTA)
    q = (q + KL_DELTA / size) / (1.0 + KL_DELTA)
    return -float(np.sum(p * np.log(p / q)))


@dataclass
class EdgeScore:
    parent: str
    child: str
    weight: float
    scores: dict[str, float] = field(default_factory=dict)
    label: int | None = None

    def __post_init__(self):
        if self.label not in (None, 1, -1):
            raise ValueError("label must be +1, -1, or absent")


@dataclass
class EdgeScoreTable:
    """Scores for every candidate parent-child pair, one row per edge."""

    rows: list[EdgeScore]
    n_top: int = 10

    def measures(self) -> tuple[str, ...]:
        names: set[str] = set()
        for row in self.rows:
            names.update(row.scores)
        return tuple(sorted(names))

    def rows_for(self, measure: str) -> list[EdgeScore]:
        if measure not in self.measures():
            raise ValueError(f"unknown measure {measure!r}")
        usable = [r for r in self.rows if math.isfinite(r.scores.get(measure, float("nan")))]
        dropped = len(self.rows) - len(usable)
        if dropped:
            warnings.warn(f"{dropped} edges lack a finite {measure} score and are ignored")
        return usable

    def row(self, parent: str, child: str) -> EdgeScore:
        for r in self.rows:
            if r.parent == parent and r.child == child:
                return r
        raise KeyError((parent, child))


def score_all(
    hierarchy: Hierarchy,
    measures: tuple[str, ...] = EDGE_MEASURES,
    embeds: EmbeddingStore | None = None,
    cooc: CoocStats | None = None,
    n: int = 10,
) -> EdgeScoreTable:
    """Score every parent-child pair on each adjacent level pair."""
    for measure in measures:
        if measure not in EDGE_MEASURES:
            raise ValueError(f"unknown measure {measure!r}")
    if "embed_sim" in measures and embeds is None:
        raise ValueError("measure 'embed_sim' requires an embedding store")
    if "cooc_sim" in measures and cooc is None:
        raise ValueError("measure 'cooc_sim' requires co-occurrence statistics")
    rows: list[EdgeScore] = []
    for norm in hierarchy.normalized:
        parent_model = hierarchy.levels[norm.parent_level]
        child_model = hierarchy.levels[norm.child_level]
        pair = (parent_model, child_model)
        for a, parent in enumerate(norm.parent_ids):
            for t, child in enumerate(norm.child_ids):
                scores: dict[str, float] = {}
                for measure in measures:
                    if measure == "embed_sim":
                        scores[measure] = embed_sim(parent, child, pair, embeds, n)
                    elif measure == "cooc_sim":
                        scores[measure] = cooc_sim(parent, child, pair, cooc, n)
                    elif measure == "hellinger_sim":
                        scores[measure] = hellinger_sim(parent, child, pair)
                    elif measure == "kl_sim":
                        scores[measure] = kl_sim(parent, child, pair)
                rows.append(
                    EdgeScore(
                        parent=parent,
                        child=child,
                        weight=float(norm.values[t, a]),
                        scores=scores,
                    )
                )
    rows.sort(key=lambda r: (r.parent, r.child))
    return EdgeScoreTable(rows=rows, n_top=n)


def write_edge_scores(table: EdgeScoreTable, prefix: Path | str) -> None:
    """Write <prefix>.tsv (long form) and <prefix>.json (one record per edge)."""
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    with open(prefix.with_suffix(".tsv"), "w", encoding="utf-8") as handle:
        handle.write("parent\tchild\tmeasure\tvalue\n")
        for row in table.rows:
            for measure in sorted(row.scores):
                handle.write(f"{row.parent}\t{row.child}\t{measure}\t{row.scores[measure]:.12g}\n")
    records = []
    for row in table.rows:
        record = {
            "parent": row.parent,
            "child": row.child,
            "weight": row.weight,
            "scores": {k: row.scores[k] for k in sorted(row.scores)},
        }
        if row.label is not None:
            record["label"] = row.label
        records.append(record)
    payload = {"n_top": table.n_top, "edges": records}
    with open(prefix.with_suffix(".json"), "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True, ensure_ascii=False)
        handle.write("\n")


def load_edge_scores(path: Path | str) -> EdgeScoreTable:
    with open(path, encoding="utf-8") as handle:
        payload = json.load(handle)
    rows = [
        EdgeScore(
            parent=r["parent"],
            child=r["child"],
            weight=float(r["weight"]),
            scores={k: float(v) for k, v in r["scores"].items()},
            label=r.get("label"),
        )
        for r in payload["edges"]
    ]
    return EdgeScoreTable(rows=rows, n_top=int(payload.get("n_top", 10)))
