"""Multi-level hierarchies: per-level models, psi matrices, and edge management."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Mapping

import numpy as np

from .artm import (
    TopicModel,
    TrainConfig,
    em_factorize,
    build_count_matrix,
    load_model,
    make_topic_ids,
    save_model,
    train,
)
from .corpus import Collection, CorpusError, CorpusSet, merge

if TYPE_CHECKING:
    from .edge_quality import EdgeScoreTable

COLUMN_SUM_TOL = 1e-9


@dataclass
class PsiMatrix:
    """Distribution of child topics over each parent topic (children x parents)."""

    values: np.ndarray
    parent_ids: tuple[str, ...]
    child_ids: tuple[str, ...]
    parent_level: int
    child_level: int
    reconstruction_error: float = float("nan")

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.child_ids), len(self.parent_ids)):
            raise ValueError("psi shape does not match child x parent ids")
        if self.values.size and self.values.min() < 0:
            raise ValueError("psi has negative entries")
        err = np.abs(self.values.sum(axis=0) - 1.0).max() if self.values.size else 0.0
        if err > COLUMN_SUM_TOL:
            raise ValueError(f"psi columns deviate from 1 by {err:.3e}")


@dataclass
class NormalizedPsi:
    """Per-parent min-max rescaling of psi onto [0, 1]."""

    values: np.ndarray
    parent_ids: tuple[str, ...]
    child_ids: tuple[str, ...]
    parent_level: int
    child_level: int

    def weight(self, parent: str, child: str) -> float:
        return float(
            self.values[self.child_ids.index(child), self.parent_ids.index(parent)]
        )


@dataclass(frozen=True, order=True)
class Edge:
    parent: str
    child: str
    weight: float = field(compare=False, default=0.0)

    def __post_init__(self):
        if not -1e-12 <= self.weight <= 1.0 + 1e-12:
            raise ValueError(f"edge weight {self.weight} outside [0, 1]")


@dataclass
class Hierarchy:
    levels: list[TopicModel]
    psis: list[PsiMatrix]
    normalized: list[NormalizedPsi]
    edges: list[Edge]

    def __post_init__(self):
        if len(self.psis) != max(len(self.levels) - 1, 0):
            raise ValueError("need exactly one psi per adjacent level pair")
        for i, psi in enumerate(self.psis):
            if psi.parent_ids != self.levels[i].topic_ids:
                raise ValueError(f"psi {i} parent ids do not match level {i}")
            if psi.child_ids != self.levels[i + 1].topic_ids:
                raise ValueError(f"psi {i} child ids do not match level {i + 1}")
        known = {t for level in self.levels for t in level.topic_ids}
        for edge in self.edges:
            if edge.parent not in known or edge.child not in known:
                raise ValueError(f"edge {edge.parent}->{edge.child} references unknown topics")

    def level_of(self, topic_id: str) -> int:
        for i, level in enumerate(self.levels):
            if topic_id in level.topic_ids:
                return i
        raise KeyError(topic_id)


@dataclass(frozen=True)
class HierarchyConfig:
    """Settings shared by the hierarchy builders."""

    level_topic_counts: tuple[int, ...] = (5, 12)
    max_iterations: int = 50
    ll_rel_tolerance: float = 1e-4
    regularizers: tuple = ()
    seed: int = 0
    modality_weights: Mapping[str, float] | None = None
    edge_threshold: float = 0.5
    parent_doc_mass: float | None = None
    batch_fraction: float = 0.1
    batches: int | None = None

    def __post_init__(self):
        counts = tuple(self.level_topic_counts)
        if not counts:
            raise ValueError("need at least one level")
        if any(b <= a for a, b in zip(counts, counts[1:])):
            raise ValueError("topic counts must strictly increase by level")
        if not 0 < self.batch_fraction <= 1:
            raise ValueError("batch_fraction must be in (0, 1]")

    def level_train_config(self, level: int) -> TrainConfig:
        return TrainConfig(
            n_topics=self.level_topic_counts[level],
            max_iterations=self.max_iterations,
            ll_rel_tolerance=self.ll_rel_tolerance,
            regularizers=tuple(self.regularizers),
            seed=self.seed + level,
            modality_weights=self.modality_weights,
            topic_prefix=f"l{level}_t",
        )


def fit_level(
    parent: TopicModel,
    n_child_topics: int,
    corpus: CorpusSet,
    config: TrainConfig,
    parent_doc_mass: float | None = None,
) -> tuple[TopicModel, PsiMatrix]:
    """Estimate the next level's phi together with psi linking it to the parent.

    Each parent topic enters the EM as a pseudo-document whose token counts
    are its phi column scaled by ``parent_doc_mass`` (default: average
    per-parent share of the corpus mass). The psi columns are the inferred
    topic distributions of those pseudo-documents, so the parent columns are
    approximated by phi_child @ psi; the total absolute gap is recorded on
    the returned psi as ``reconstruction_error``.
    """
    if tuple(corpus.common_vocabulary) != tuple(parent.tokens):
        raise ValueError("corpus vocabulary does not match the parent model")
    n_parents = parent.n_topics
    if n_parents < 2:
        warnings.warn("parent level has fewer than 2 topics")
    if n_child_topics <= n_parents:
        warnings.warn(
            f"child level size {n_child_topics} does not exceed parent size {n_parents}"
        )
    counts = build_count_matrix(corpus, parent.modality_weights)
    if parent_doc_mass is None:
        parent_doc_mass = counts.sum() / n_parents
    if parent_doc_mass <= 0:
        raise ValueError("parent_doc_mass must be positive")
    augmented = np.concatenate([counts, parent.phi * parent_doc_mass], axis=1)
    rng = np.random.default_rng(config.seed)
    phi0 = rng.random((corpus.n_tokens, n_child_topics)) + 1e-6
    phi0 /= phi0.sum(axis=0)
    theta0 = rng.random((n_child_topics, augmented.shape[1])) + 1e-6
    theta0 /= theta0.sum(axis=0)
    phi, theta, history, n_iter = em_factorize(augmented, phi0, theta0, config)
    n_docs = corpus.n_docs
    child_ids = make_topic_ids(config.topic_prefix, n_child_topics)
    child = TopicModel(
        phi=phi,
        theta=theta[:, :n_docs] if n_docs else theta[:, :0],
        tokens=corpus.common_vocabulary,
        topic_ids=child_ids,
        doc_ids=tuple(corpus.doc_ids()),
        modality_weights=dict(parent.modality_weights),
        seed=config.seed,
        n_iterations=n_iter,
        ll_history=history,
        collection_ids=tuple(c.id for c in corpus.collections),
    )
    psi_values = theta[:, n_docs:]
    reconstruction = float(np.abs(parent.phi - phi @ psi_values).sum())
    psi = PsiMatrix(
        values=psi_values,
        parent_ids=parent.topic_ids,
        child_ids=child_ids,
        parent_level=0,
        child_level=1,
        reconstruction_error=reconstruction,
    )
    return child, psi


def normalize_psi(psi: PsiMatrix) -> NormalizedPsi:
    """Min-max rescale each parent column; constant columns collapse to zeros."""
    values = np.zeros_like(psi.values)
    for a, parent_id in enumerate(psi.parent_ids):
        column = psi.values[:, a]
        spread = column.max() - column.min()
        if spread <= 0:
            warnings.warn(f"constant psi column for parent {parent_id}; no edge survives")
            continue
        values[:, a] = (column - column.min()) / spread
    return NormalizedPsi(
        values=values,
        parent_ids=psi.parent_ids,
        child_ids=psi.child_ids,
        parent_level=psi.parent_level,
        child_level=psi.child_level,
    )


def edges_above(norm: NormalizedPsi, k: float) -> list[Edge]:
    """All edges with normalized weight strictly above k, sorted by ids."""
    edges = []
    for a, parent_id in enumerate(norm.parent_ids):
        for t, child_id in enumerate(norm.child_ids):
            weight = float(norm.values[t, a])
            if weight > k:
                edges.append(Edge(parent=parent_id, child=child_id, weight=weight))
    edges.sort()
    return edges


def top_k_edges(scores: "EdgeScoreTable", k: int, measure: str) -> list[Edge]:
    """Keep the k best edges by one measure while covering every child topic.

    If the plain top-k orphans a child, its best edge is swapped in for the
    worst retained edge whose child keeps another parent, so the result stays
    at exactly min(k, total) edges.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    rows = scores.rows_for(measure)
    ordered = sorted(rows, key=lambda r: (-r.scores[measure], r.parent, r.child))
    if k >= len(ordered):
        return sorted(Edge(r.parent, r.child, r.weight) for r in ordered)
    selected = ordered[:k]
    children = {r.child for r in ordered}
    missing = children - {r.child for r in selected}
    for child in sorted(missing):
        best = min(
            (r for r in ordered if r.child == child),
            key=lambda r: (-r.scores[measure], r.parent, r.child),
        )
        selected.append(best)
    while len(selected) > k:
        child_counts: dict[str, int] = {}
        for r in selected:
            child_counts[r.child] = child_counts.get(r.child, 0) + 1
        removable = [r for r in selected if child_counts[r.child] > 1]
        pool = removable if removable else selected
        worst = max(pool, key=lambda r: (-r.scores[measure], r.parent, r.child))
        selected.remove(worst)
    return sorted(Edge(r.parent, r.child, r.weight) for r in selected)


def _hierarchy_from_levels(levels: list[TopicModel], psis: list[PsiMatrix], threshold: float) -> Hierarchy:
    for i, psi in enumerate(psis):
        psi.parent_level = i
        psi.child_level = i + 1
    normalized = [normalize_psi(psi) for psi in psis]
    edges: list[Edge] = []
    for norm in normalized:
        edges.extend(edges_above(norm, threshold))
    return Hierarchy(levels=levels, psis=psis, normalized=normalized, edges=sorted(edges))


def build_concat(collections: list[Collection], config: HierarchyConfig) -> Hierarchy:
    """Train a hierarchy over the plain concatenation of all collections."""
    if not collections:
        raise CorpusError("no collections given")
    corpus = merge(collections)
    levels = [train(corpus, config.level_train_config(0))]
    psis: list[PsiMatrix] = []
    for level in range(1, len(config.level_topic_counts)):
        child, psi = fit_level(
            levels[-1],
            config.level_topic_counts[level],
            corpus,
            config.level_train_config(level),
            parent_doc_mass=config.parent_doc_mass,
        )
        levels.append(child)
        psis.append(psi)
    return _hierarchy_from_levels(levels, psis, config.edge_threshold)


def build_heterogeneous(
    base: Collection,
    new: list[Collection],
    config: HierarchyConfig,
    batches: int | None = None,
) -> Hierarchy:
    """Grow a hierarchy from a base collection by warm-started batch additions.

    The first level is trained on the base alone, then documents pooled from
    the new collections are added in seeded random batches; each round
    retrains the first level warm-started from the previous phi. Deeper
    levels are fitted once, on the final corpus.
    """
    if not base.documents:
        raise CorpusError("base collection is empty")
    pool = [(c.id, i, doc) for c in new for i, doc in enumerate(c.documents)]
    if not pool:
        warnings.warn("no new documents; building from the base collection only")
        return build_concat([base], config)
    n_batches = batches if batches is not None else config.batches
    if n_batches is None:
        n_batches = math.ceil(1.0 / config.batch_fraction)
    if n_batches < 1:
        raise ValueError("batches must be >= 1")
    batch_size = math.ceil(config.batch_fraction * len(pool))
    rng = np.random.default_rng(config.seed)
    order = rng.permutation(len(pool))

    level0_config = config.level_train_config(0)
    model = train(merge([base]), level0_config)
    sampled: dict[str, list[tuple[int, object]]] = {c.id: [] for c in new}
    corpus = merge([base])
    taken = 0
    for _ in range(n_batches):
        batch = order[taken : taken + batch_size]
        if batch.size == 0:
            break
        taken += batch.size
        for idx in batch:
            collection_id, position, doc = pool[idx]
            sampled[collection_id].append((position, doc))
        parts = [base]
        for c in new:
            docs = [doc for _, doc in sorted(sampled[c.id], key=lambda p: p[0])]
            if docs:
                parts.append(Collection(id=c.id, documents=docs))
        corpus = merge(parts)
        model = train(corpus, level0_config, phi_init=model)

    levels = [model]
    psis: list[PsiMatrix] = []
    for level in range(1, len(config.level_topic_counts)):
        child, psi = fit_level(
            levels[-1],
            config.level_topic_counts[level],
            corpus,
            config.level_train_config(level),
            parent_doc_mass=config.parent_doc_mass,
        )
        levels.append(child)
        psis.append(psi)
    return _hierarchy_from_levels(levels, psis, config.edge_threshold)


def save_hierarchy(hierarchy: Hierarchy, out_dir: Path | str) -> None:
    """Write level model dirs, psi matrices, and the edge list."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i, level in enumerate(hierarchy.levels):
        save_model(level, out / f"level_{i}")
    for i, psi in enumerate(hierarchy.psis):
        with open(out / f"psi_{i}.tsv", "w", encoding="utf-8") as handle:
            handle.write("child\t" + "\t".join(psi.parent_ids) + "\n")
            for t, child_id in enumerate(psi.child_ids):
                row = "\t".join(f"{v:.12g}" for v in psi.values[t])
                handle.write(f"{child_id}\t{row}\n")
    write_edges(hierarchy.edges, out / "edges.json")


def write_edges(edges: list[Edge], path: Path | str, scores: dict | None = None) -> None:
    records = []
    for edge in sorted(edges):
        record = {
            "parent": edge.parent,
            "child": edge.child,
            "weight": edge.weight,
            "scores": (scores or {}).get((edge.parent, edge.child), {}),
        }
        records.append(record)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(records, handle, indent=2, sort_keys=True, ensure_ascii=False)
        handle.write("\n")


def load_edges(path: Path | str) -> list[Edge]:
    with open(path, encoding="utf-8") as handle:
        records = json.load(handle)
    return sorted(Edge(r["parent"], r["child"], float(r["weight"])) for r in records)


def load_hierarchy(hier_dir: Path | str) -> Hierarchy:
    directory = Path(hier_dir)
    levels = []
    i = 0
    while (directory / f"level_{i}").is_dir():
        levels.append(load_model(directory / f"level_{i}"))
        i += 1
    if not levels:
        raise FileNotFoundError(f"no level_0 directory under {directory}")
    psis = []
    for j in range(len(levels) - 1):
        path = directory / f"psi_{j}.tsv"
        with open(path, encoding="utf-8") as handle:
            header = handle.readline().rstrip("\n").split("\t")
            parent_ids = tuple(header[1:])
            child_ids = []
            rows = []
            for line in handle:
                cells = line.rstrip("\n").split("\t")
                child_ids.append(cells[0])
                rows.append([float(v) for v in cells[1:]])
        values = np.asarray(rows, dtype=float)
        values /= values.sum(axis=0)
        psis.append(
            PsiMatrix(
                values=values,
                parent_ids=parent_ids,
                child_ids=tuple(child_ids),
                parent_level=j,
                child_level=j + 1,
            )
        )
    normalized = [normalize_psi(psi) for psi in psis]
    edges = load_edges(directory / "edges.json") if (directory / "edges.json").exists() else []
    return Hierarchy(levels=levels, psis=psis, normalized=normalized, edges=edges)
