"""Flat topic models trained by regularized EM on the factorization F ~ Phi Theta."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .corpus import MODALITIES, CorpusSet, Document, Token

LOG_FLOOR = 1e-30
COLUMN_SUM_TOL = 1e-9

REGULARIZER_KINDS = ("none", "dirichlet_smooth_sparse", "decorrelation")


class OutOfVocabularyError(ValueError):
    """Raised when a document shares no usable tokens with a model."""


@dataclass(frozen=True)
class RegularizerSpec:
    """One additive term of the training objective.

    ``dirichlet_smooth_sparse`` takes params ``alpha`` (scalar or one value
    per topic, applied to theta) and ``beta`` (scalar or one value per token,
    applied to phi); values above 1 smooth, values below 1 sparsify.
    """

    kind: str
    tau: float = 1.0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in REGULARIZER_KINDS:
            raise ValueError(f"unknown regularizer kind {self.kind!r}")
        if not math.isfinite(self.tau):
            raise ValueError("tau must be finite")
        for name, value in self.params.items():
            arr = np.asarray(value, dtype=float)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"regularizer param {name!r} must be finite")


@dataclass(frozen=True)
class TrainConfig:
    n_topics: int
    max_iterations: int = 50
    ll_rel_tolerance: float = 1e-4
    regularizers: tuple[RegularizerSpec, ...] = ()
    seed: int = 0
    modality_weights: Mapping[str, float] | None = None
    topic_prefix: str = "t"

    def __post_init__(self):
        if self.n_topics < 1:
            raise ValueError("n_topics must be >= 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.ll_rel_tolerance <= 0:
            raise ValueError("ll_rel_tolerance must be > 0")

    def weights(self) -> dict[str, float]:
        merged = {m: 1.0 for m in MODALITIES}
        if self.modality_weights:
            for modality, value in self.modality_weights.items():
                if modality not in MODALITIES:
                    raise ValueError(f"unknown modality {modality!r}")
                if value < 0:
                    raise ValueError("modality weights must be nonnegative")
                merged[modality] = float(value)
        return merged


@dataclass
class TopicModel:
    """One trained level: column-stochastic phi (tokens x topics) and theta (topics x docs)."""

    phi: np.ndarray
    theta: np.ndarray
    tokens: tuple[Token, ...]
    topic_ids: tuple[str, ...]
    doc_ids: tuple[str, ...]
    modality_weights: dict[str, float]
    seed: int
    n_iterations: int = 0
    ll_history: tuple[float, ...] = ()
    collection_ids: tuple[str, ...] = ()

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=float)
        self.theta = np.asarray(self.theta, dtype=float)
        if self.phi.shape != (len(self.tokens), len(self.topic_ids)):
            raise ValueError("phi shape does not match tokens x topics")
        if self.theta.shape != (len(self.topic_ids), len(self.doc_ids)):
            raise ValueError("theta shape does not match topics x docs")
        self._token_index = {t: i for i, t in enumerate(self.tokens)}
        self._topic_index = {t: i for i, t in enumerate(self.topic_ids)}
        self._doc_index = {d: i for i, d in enumerate(self.doc_ids)}

    @property
    def n_topics(self) -> int:
        return len(self.topic_ids)

    def token_index(self, token: Token) -> int:
        return self._token_index[token]

    def has_token(self, token: Token) -> bool:
        return token in self._token_index

    def topic_column(self, topic_id: str) -> np.ndarray:
        return self.phi[:, self._topic_index[topic_id]]

    def doc_column(self, doc_id: str) -> np.ndarray:
        return self.theta[:, self._doc_index[doc_id]]

    def doc_position(self, doc_id: str) -> int:
        return self._doc_index[doc_id]

    def has_doc(self, doc_id: str) -> bool:
        return doc_id in self._doc_index

    def check_stochastic(self, tol: float = COLUMN_SUM_TOL) -> None:
        for name, matrix in (("phi", self.phi), ("theta", self.theta)):
            if matrix.size == 0:
                continue
            if matrix.min() < 0:
                raise ValueError(f"{name} has negative entries")
            err = np.abs(matrix.sum(axis=0) - 1.0).max()
            if err > tol:
                raise ValueError(f"{name} columns deviate from 1 by {err:.3e}")


def make_topic_ids(prefix: str, n: int) -> tuple[str, ...]:
    width = max(2, len(str(max(n - 1, 0))))
    return tuple(f"{prefix}{i:0{width}d}" for i in range(n))


def build_count_matrix(corpus: CorpusSet, modality_weights: Mapping[str, float]) -> np.ndarray:
    """Dense tokens x documents matrix of modality-weighted counts."""
    counts = np.zeros((corpus.n_tokens, corpus.n_docs), dtype=float)
    index = corpus.token_index
    for j, doc in enumerate(corpus.documents()):
        for token, count in doc.counts.items():
            counts[index[token], j] = count * modality_weights[token.modality]
    return counts


def _normalize_columns(matrix: np.ndarray) -> np.ndarray:
    sums = matrix.sum(axis=0)
    dead = sums <= 0.0
    if np.any(dead):
        # A fully truncated column carries no evidence; reset it to uniform.
        matrix = matrix.copy()
        matrix[:, dead] = 1.0 / matrix.shape[0]
        sums = matrix.sum(axis=0)
    return matrix / sums


def _regularizer_offsets(
    regularizers: tuple[RegularizerSpec, ...], n_tokens: int, n_topics: int
) -> tuple[np.ndarray, np.ndarray]:
    phi_offset = np.zeros((n_tokens, 1))
    theta_offset = np.zeros((n_topics, 1))
    for reg in regularizers:
        if reg.kind == "none":
            continue
        if reg.kind == "decorrelation":
            warnings.warn("decorrelation regularizer is not implemented; ignoring it")
            continue
        beta = np.asarray(reg.params.get("beta", 1.0), dtype=float)
        alpha = np.asarray(reg.params.get("alpha", 1.0), dtype=float)
        if beta.ndim == 1 and beta.shape[0] != n_tokens:
            raise ValueError(f"beta length {beta.shape[0]} does not match {n_tokens} tokens")
        if alpha.ndim == 1 and alpha.shape[0] != n_topics:
            raise ValueError(f"alpha length {alpha.shape[0]} does not match {n_topics} topics")
        phi_offset = phi_offset + reg.tau * (beta.reshape(-1, 1) - 1.0)
        theta_offset = theta_offset + reg.tau * (alpha.reshape(-1, 1) - 1.0)
    return phi_offset, theta_offset


def _pointwise_ll(counts: np.ndarray, product: np.ndarray) -> float:
    return float(np.sum(counts * np.log(np.maximum(product, LOG_FLOOR))))


def em_factorize(
    counts: np.ndarray,
    phi0: np.ndarray,
    theta0: np.ndarray,
    config: TrainConfig,
) -> tuple[np.ndarray, np.ndarray, tuple[float, ...], int]:
    """Run the EM alternation on a prepared count matrix.

    Each iteration rescales phi and theta by the expected count ratios, adds
    the regularizer offsets, truncates at zero, and renormalizes columns.
    Returns (phi, theta, log-likelihood history, iterations performed).
    """
    phi = np.array(phi0, dtype=float)
    theta = np.array(theta0, dtype=float)
    phi_offset, theta_offset = _regularizer_offsets(
        config.regularizers, counts.shape[0], phi.shape[1]
    )
    history: list[float] = []
    n_updates = 0
    converged = False
    for _ in range(config.max_iterations):
        product = phi @ theta
        ll = _pointwise_ll(counts, product)
        if not math.isfinite(ll):
            raise RuntimeError(
                f"non-finite log-likelihood at iteration {n_updates}: "
                f"phi range [{phi.min():.3e}, {phi.max():.3e}], "
                f"theta range [{theta.min():.3e}, {theta.max():.3e}]"
            )
        history.append(ll)
        if len(history) > 1:
            prev = history[-2]
            if abs(ll - prev) / max(abs(prev), LOG_FLOOR) < config.ll_rel_tolerance:
                converged = True
                break
        ratio = np.where(counts > 0, counts / np.maximum(product, LOG_FLOOR), 0.0)
        phi_new = np.maximum(phi * (ratio @ theta.T) + phi_offset, 0.0)
        theta_new = np.maximum(theta * (phi.T @ ratio) + theta_offset, 0.0)
        phi = _normalize_columns(phi_new)
        theta = _normalize_columns(theta_new)
        n_updates += 1
    if not converged:
        history.append(_pointwise_ll(counts, phi @ theta))
    return phi, theta, tuple(history), n_updates


def _fit_theta_only(counts: np.ndarray, phi: np.ndarray, config: TrainConfig) -> np.ndarray:
    """Maximize theta with phi frozen, starting from uniform columns."""
    n_topics = phi.shape[1]
    theta = np.full((n_topics, counts.shape[1]), 1.0 / n_topics)
    prev = None
    for _ in range(config.max_iterations):
        product = phi @ theta
        ll = _pointwise_ll(counts, product)
        if prev is not None and abs(ll - prev) / max(abs(prev), LOG_FLOOR) < config.ll_rel_tolerance:
            break
        prev = ll
        ratio = np.where(counts > 0, counts / np.maximum(product, LOG_FLOOR), 0.0)
        theta = _normalize_columns(theta * (phi.T @ ratio))
    return theta


def _initial_phi(
    corpus: CorpusSet,
    n_topics: int,
    rng: np.random.Generator,
    phi_init: TopicModel | None,
) -> np.ndarray:
    n_tokens = corpus.n_tokens
    if phi_init is None:
        return _normalize_columns(rng.random((n_tokens, n_topics)) + 1e-6)
    if phi_init.n_topics != n_topics:
        raise ValueError(
            f"phi_init has {phi_init.n_topics} topics, config requests {n_topics}"
        )
    missing = [t for t in phi_init.tokens if t not in corpus.token_index]
    if missing:
        raise ValueError(
            f"phi_init tokens absent from the corpus: {[str(t) for t in missing[:3]]}"
        )
    phi = np.zeros((n_tokens, n_topics))
    known = np.zeros(n_tokens, dtype=bool)
    for row, token in enumerate(phi_init.tokens):
        i = corpus.token_index[token]
        phi[i] = phi_init.phi[row]
        known[i] = True
    # New tokens enter at small magnitude so the inherited structure dominates.
    fresh = ~known
    if np.any(fresh):
        phi[fresh] = rng.random((int(fresh.sum()), n_topics)) / n_tokens
    return _normalize_columns(phi)


def train(
    corpus: CorpusSet,
    config: TrainConfig,
    phi_init: TopicModel | None = None,
) -> TopicModel:
    """Train one topic model level; warm-startable from a previous model's phi.

    With a warm start, theta is first maximized under the inherited phi so
    that training resumes from the old solution instead of a random one.
    """
    if corpus.n_tokens == 0:
        raise ValueError("corpus has an empty vocabulary")
    if config.n_topics > corpus.n_tokens:
        warnings.warn(
            f"n_topics {config.n_topics} exceeds vocabulary size {corpus.n_tokens}"
        )
    weights = config.weights()
    counts = build_count_matrix(corpus, weights)
    rng = np.random.default_rng(config.seed)
    phi0 = _initial_phi(corpus, config.n_topics, rng, phi_init)
    if phi_init is None:
        theta0 = _normalize_columns(rng.random((config.n_topics, corpus.n_docs)) + 1e-6)
    else:
        theta0 = _fit_theta_only(counts, phi0, config)
    phi, theta, history, n_iter = em_factorize(counts, phi0, theta0, config)
    return TopicModel(
        phi=phi,
        theta=theta,
        tokens=corpus.common_vocabulary,
        topic_ids=make_topic_ids(config.topic_prefix, config.n_topics),
        doc_ids=tuple(corpus.doc_ids()),
        modality_weights=weights,
        seed=config.seed,
        n_iterations=n_iter,
        ll_history=history,
        collection_ids=tuple(c.id for c in corpus.collections),
    )


def fold_in(
    model: TopicModel,
    doc: Document | Mapping[Token, float],
    iterations: int,
) -> np.ndarray:
    """Infer p(t|doc) for an unseen document with phi frozen.

    Tokens outside the model vocabulary (or with zero probability in every
    topic) are ignored; if nothing usable remains the document is rejected.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    counts = doc.counts if isinstance(doc, Document) else doc
    rows, values = [], []
    for token, count in sorted(counts.items()):
        if model.has_token(token):
            rows.append(model.token_index(token))
            values.append(count * model.modality_weights[token.modality])
    if rows:
        phi_sub = model.phi[rows, :]
        usable = phi_sub.sum(axis=1) > 0
        phi_sub = phi_sub[usable]
        weighted = np.asarray(values, dtype=float)[usable]
    if not rows or phi_sub.shape[0] == 0:
        raise OutOfVocabularyError("out-of-vocabulary document")
    n_topics = model.n_topics
    theta = np.full(n_topics, 1.0 / n_topics)
    for _ in range(iterations):
        product = phi_sub @ theta
        ratio = weighted / np.maximum(product, LOG_FLOOR)
        theta = theta * (phi_sub.T @ ratio)
        theta /= theta.sum()
    return theta


def log_likelihood(model: TopicModel, corpus: CorpusSet) -> float:
    """Exact modality-weighted objective sum(n_dw ln p(w|d)) over the corpus."""
    if tuple(corpus.common_vocabulary) != tuple(model.tokens):
        raise ValueError("model and corpus do not share a token index")
    if tuple(corpus.doc_ids()) != tuple(model.doc_ids):
        raise ValueError("model and corpus do not cover the same documents")
    counts = build_count_matrix(corpus, model.modality_weights)
    product = model.phi @ model.theta
    mask = counts > 0
    if np.any(product[mask] == 0.0):
        bad = int(np.sum((product == 0.0) & mask))
        warnings.warn(f"{bad} observed tokens have zero probability; likelihood is -inf")
        return float("-inf")
    return float(np.sum(counts[mask] * np.log(product[mask])))


def top_tokens(model: TopicModel, topic_id: str, n: int, modality: str = "word") -> list[Token]:
    """The n most probable tokens of one modality, ties broken by surface."""
    if modality not in MODALITIES:
        raise ValueError(f"unknown modality {modality!r}")
    if n < 1:
        raise ValueError("n must be >= 1")
    column = model.topic_column(topic_id)
    candidates = [
        (token, column[i]) for i, token in enumerate(model.tokens) if token.modality == modality
    ]
    candidates.sort(key=lambda pair: (-pair[1], pair[0].surface))
    return [token for token, _ in candidates[:n]]


def save_model(model: TopicModel, out_dir: Path | str) -> None:
    """Write phi.tsv, theta.tsv, and meta.json into a model directory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "phi.tsv", "w", encoding="utf-8") as handle:
        handle.write("token\t" + "\t".join(model.topic_ids) + "\n")
        for i, token in enumerate(model.tokens):
            row = "\t".join(f"{v:.12g}" for v in model.phi[i])
            handle.write(f"{token}\t{row}\n")
    with open(out / "theta.tsv", "w", encoding="utf-8") as handle:
        handle.write("topic\t" + "\t".join(model.doc_ids) + "\n")
        for i, topic_id in enumerate(model.topic_ids):
            row = "\t".join(f"{v:.12g}" for v in model.theta[i])
            handle.write(f"{topic_id}\t{row}\n")
    meta = {
        "collection_ids": list(model.collection_ids),
        "final_log_likelihood": model.ll_history[-1] if model.ll_history else None,
        "modality_weights": model.modality_weights,
        "n_iterations": model.n_iterations,
        "seed": model.seed,
    }
    with open(out / "meta.json", "w", encoding="utf-8") as handle:
        json.dump(meta, handle, indent=2, sort_keys=True)
        handle.write("\n")


def load_model(model_dir: Path | str) -> TopicModel:
    """Read a model directory back; columns are renormalized to absorb rounding."""
    directory = Path(model_dir)
    with open(directory / "phi.tsv", encoding="utf-8") as handle:
        header = handle.readline().rstrip("\n").split("\t")
        topic_ids = tuple(header[1:])
        tokens: list[Token] = []
        rows: list[list[float]] = []
        for line in handle:
            cells = line.rstrip("\n").split("\t")
            tokens.append(Token.parse(cells[0]))
            rows.append([float(v) for v in cells[1:]])
    phi = _normalize_columns(np.asarray(rows, dtype=float))
    with open(directory / "theta.tsv", encoding="utf-8") as handle:
        header = handle.readline().rstrip("\n").split("\t")
        doc_ids = tuple(header[1:])
        theta_rows = []
        theta_topics = []
        for line in handle:
            cells = line.rstrip("\n").split("\t")
            theta_topics.append(cells[0])
            theta_rows.append([float(v) for v in cells[1:]])
    if tuple(theta_topics) != topic_ids:
        raise ValueError("phi.tsv and theta.tsv disagree on topic ids")
    theta = _normalize_columns(np.asarray(theta_rows, dtype=float))
    with open(directory / "meta.json", encoding="utf-8") as handle:
        meta = json.load(handle)
    final_ll = meta.get("final_log_likelihood")
    return TopicModel(
        phi=phi,
        theta=theta,
        tokens=tuple(tokens),
        topic_ids=topic_ids,
        doc_ids=doc_ids,
        modality_weights={str(k): float(v) for k, v in meta["modality_weights"].items()},
        seed=int(meta["seed"]),
        n_iterations=int(meta.get("n_iterations", 0)),
        ll_history=(float(final_ll),) if final_ll is not None else (),
        collection_ids=tuple(meta.get("collection_ids", ())),
    )
