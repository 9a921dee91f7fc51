"""Linear topic ordering: minimal-weight Hamiltonian path over topic distances."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .artm import TopicModel

EXACT_LIMIT = 10
DISTANCE_METRICS = ("hellinger", "jensen_shannon")


@dataclass
class DistanceMatrix:
    values: np.ndarray
    metric: str = "hellinger"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        n = self.values.shape[0]
        if self.values.shape != (n, n):
            raise ValueError("distance matrix must be square")
        if not np.allclose(self.values, self.values.T, atol=1e-12):
            raise ValueError("distance matrix must be symmetric")
        if np.any(np.diag(self.values) != 0):
            raise ValueError("distance matrix must have a zero diagonal")
        if self.values.size and self.values.min() < 0:
            raise ValueError("distances must be nonnegative")

    @property
    def size(self) -> int:
        return self.values.shape[0]


@dataclass
class Spectre:
    order: tuple[int, ...]
    weight: float

    def __post_init__(self):
        if sorted(self.order) != list(range(len(self.order))):
            raise ValueError("order must be a permutation of topic indices")


def _hellinger(p: np.ndarray, q: np.ndarray) -> float:
    return math.sqrt(float(np.sum((np.sqrt(p) - np.sqrt(q)) ** 2))) / math.sqrt(2.0)


def _jensen_shannon(p: np.ndarray, q: np.ndarray) -> float:
    m = 0.5 * (p + q)

    def relative_entropy(a: np.ndarray) -> float:
        mask = a > 0
        return float(np.sum(a[mask] * np.log(a[mask] / m[mask])))

    return math.sqrt(max(0.5 * (relative_entropy(p) + relative_entropy(q)), 0.0))


def topic_distances(model: TopicModel, metric: str = "hellinger") -> DistanceMatrix:
    """Pairwise distances between the model's topic distributions."""
    if metric not in DISTANCE_METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    distance = _hellinger if metric == "hellinger" else _jensen_shannon
    n = model.n_topics
    values = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d = distance(model.phi[:, i], model.phi[:, j])
            values[i, j] = values[j, i] = d
    return DistanceMatrix(values=values, metric=metric)


def path_weight(dist: DistanceMatrix, order: tuple[int, ...]) -> float:
    return float(sum(dist.values[a, b] for a, b in zip(order, order[1:])))


def _canonical(order: tuple[int, ...]) -> tuple[int, ...]:
    if order and order[0] > order[-1]:
        return tuple(reversed(order))
    return order


def solve_spectre(dist: DistanceMatrix, mode: str = "heuristic") -> Spectre:
    """Find a low-weight Hamiltonian path visiting every topic once.

    Exact mode enumerates permutations (allowed up to 10 topics) and returns
    the lexicographically smallest optimum in canonical orientation. The
    heuristic builds nearest-neighbor paths from every start and improves
    each with 2-opt segment reversals until no move helps.
    """
    if mode not in ("exact", "heuristic"):
        raise ValueError(f"unknown mode {mode!r}")
    n = dist.size
    if n == 0:
        raise ValueError("empty distance matrix")
    if n == 1:
        return Spectre(order=(0,), weight=0.0)
    if mode == "exact":
        if n > EXACT_LIMIT:
            raise ValueError(
                f"exact mode supports at most {EXACT_LIMIT} topics; use heuristic mode"
            )
        return _solve_exact(dist)
    return _solve_heuristic(dist)


def _solve_exact(dist: DistanceMatrix) -> Spectre:
    best_order: tuple[int, ...] | None = None
    best_weight = math.inf
    for perm in itertools.permutations(range(dist.size)):
        if perm[0] > perm[-1]:
            continue
        weight = path_weight(dist, perm)
        if weight < best_weight - 1e-15:
            best_weight = weight
            best_order = perm
    return Spectre(order=best_order, weight=best_weight)


def _nearest_neighbor(dist: DistanceMatrix, start: int) -> list[int]:
    n = dist.size
    path = [start]
    remaining = set(range(n)) - {start}
    while remaining:
        last = path[-1]
        nxt = min(remaining, key=lambda j: (dist.values[last, j], j))
        path.append(nxt)
        remaining.remove(nxt)
    return path


def _two_opt(dist: DistanceMatrix, path: list[int]) -> list[int]:
    values = dist.values
    n = len(path)
    improved = True
    while improved:
        improved = False
        best_delta = -1e-12
        best_move = None
        for i in range(n - 1):
            for j in range(i + 1, n):
                # Reversing path[i..j] replaces the edges into i and out of j.
                delta = 0.0
                if i > 0:
                    delta += values[path[i - 1], path[j]] - values[path[i - 1], path[i]]
                if j < n - 1:
                    delta += values[path[i], path[j + 1]] - values[path[j], path[j + 1]]
                if delta < best_delta:
                    best_delta = delta
                    best_move = (i, j)
        if best_move is not None:
            i, j = best_move
            path[i : j + 1] = reversed(path[i : j + 1])
            improved = True
    return path


def _solve_heuristic(dist: DistanceMatrix) -> Spectre:
    best_order: tuple[int, ...] | None = None
    best_weight = math.inf
    for start in range(dist.size):
        path = _two_opt(dist, _nearest_neighbor(dist, start))
        order = _canonical(tuple(path))
        weight = path_weight(dist, order)
        if weight < best_weight - 1e-15 or (
            abs(weight - best_weight) <= 1e-15 and (best_order is None or order < best_order)
        ):
            best_weight = weight
            best_order = order
    return Spectre(order=best_order, weight=best_weight)


def save_spectre(spectre: Spectre, topic_ids: tuple[str, ...], metric: str, path: Path | str) -> None:
    payload = {
        "metric": metric,
        "order": [topic_ids[i] for i in spectre.order],
        "weight": spectre.weight,
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True, ensure_ascii=False)
        handle.write("\n")


def load_spectre(path: Path | str, topic_ids: tuple[str, ...]) -> tuple[Spectre, str]:
    with open(path, encoding="utf-8") as handle:
        payload = json.load(handle)
    index = {t: i for i, t in enumerate(topic_ids)}
    order = tuple(index[t] for t in payload["order"])
    return Spectre(order=order, weight=float(payload["weight"])), payload["metric"]
