"""Hierarchy-level quality: averaging curves, ranking agreement, vote aggregation."""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.metrics import roc_auc_score

from .edge_quality import EdgeScoreTable

EdgeKey = tuple[str, str]

DEFAULT_GRID = tuple(round(k * 0.01, 2) for k in range(100))


def avg_quality(scores: EdgeScoreTable, measure: str, k: float) -> float:
    """Mean measure value over edges whose normalized psi weight exceeds k."""
    rows = scores.rows_for(measure)
    passing = [r.scores[measure] for r in rows if r.weight > k]
    if not passing:
        warnings.warn(f"no edges pass threshold {k}; average quality undefined")
        return float("nan")
    return sum(passing) / len(passing)


def avg_quality_curve(
    scores: EdgeScoreTable,
    measure: str,
    grid: tuple[float, ...] = DEFAULT_GRID,
) -> list[tuple[float, float]]:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return [(k, avg_quality(scores, measure, k)) for k in grid]


def rank_request_response(
    scores: EdgeScoreTable,
    measure: str,
    k: int,
) -> tuple[list[EdgeKey], list[EdgeKey]]:
    """Top-k edges by the measure (request) and by psi weight (response)."""
    rows = scores.rows_for(measure)
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > len(rows):
        raise ValueError(f"k = {k} exceeds the {len(rows)} candidate edges")
    by_measure = sorted(rows, key=lambda r: (-r.scores[measure], r.parent, r.child))
    by_weight = sorted(rows, key=lambda r: (-r.weight, r.parent, r.child))
    request = [(r.parent, r.child) for r in by_measure[:k]]
    response = [(r.parent, r.child) for r in by_weight[:k]]
    return request, response


def average_precision_at_k(request: list[EdgeKey], response: list[EdgeKey], k: int) -> float:
    """Precision averaged over response positions that hit the request set."""
    _check_rankings(request, response, k)
    relevant = set(request)
    hits = 0
    total = 0.0
    for i, item in enumerate(response[:k], start=1):
        if item in relevant:
            hits += 1
            total += hits / i
    return total / min(len(relevant), k)


def ndcg_at_k(request: list[EdgeKey], response: list[EdgeKey], k: int) -> float:
    """Binary-gain NDCG of the response against the request set."""
    _check_rankings(request, response, k)
    relevant = set(request)
    dcg = sum(
        1.0 / math.log2(i + 1)
        for i, item in enumerate(response[:k], start=1)
        if item in relevant
    )
    ideal = sum(1.0 / math.log2(i + 1) for i in range(1, min(len(relevant), k) + 1))
    return dcg / ideal


def inverse_dp_at_k(request: list[EdgeKey], response: list[EdgeKey], k: int) -> float:
    """1 / (1 + number of pairs ordered oppositely in the two rankings).

    Only elements present in both rankings participate in pair counting.
    """
    _check_rankings(request, response, k)
    request_pos = {e: i for i, e in enumerate(request[:k])}
    common = [e for e in response[:k] if e in request_pos]
    discordant = 0
    for i in range(len(common)):
        for j in range(i + 1, len(common)):
            if request_pos[common[i]] > request_pos[common[j]]:
                discordant += 1
    return 1.0 / (1.0 + discordant)


def _check_rankings(request: list[EdgeKey], response: list[EdgeKey], k: int) -> None:
    if k < 1:
        raise ValueError("k must be >= 1")
    if not request or not response:
        raise ValueError("rankings must be non-empty")
    if len(set(request)) != len(request) or len(set(response)) != len(response):
        raise ValueError("rankings must not repeat edges")


@dataclass
class RankingReport:
    measure: str
    per_k: dict[int, dict[str, float]]


def ranking_report(scores: EdgeScoreTable, measure: str, ks: list[int]) -> RankingReport:
    per_k = {}
    for k in ks:
        request, response = rank_request_response(scores, measure, k)
        per_k[k] = {
            "average_precision": average_precision_at_k(request, response, k),
            "ndcg": ndcg_at_k(request, response, k),
            "inverse_dp": inverse_dp_at_k(request, response, k),
        }
    return RankingReport(measure=measure, per_k=per_k)


@dataclass
class AssessorVotes:
    """Raw related/unrelated votes per edge."""

    rows: list[tuple[str, str, list[str]]]

    def __post_init__(self):
        for parent, child, votes in self.rows:
            if not votes:
                raise ValueError(f"edge {parent}->{child} has no votes")
            for vote in votes:
                if vote not in ("related", "unrelated"):
                    raise ValueError(f"unknown vote {vote!r}")


def read_votes(path: Path | str) -> AssessorVotes:
    """Read a votes CSV with columns parent, child, vote."""
    grouped: dict[EdgeKey, list[str]] = {}
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if [h.strip() for h in header] != ["parent", "child", "vote"]:
            raise ValueError(f"{path}: expected header parent,child,vote")
        for row in reader:
            if not row:
                continue
            parent, child, vote = (cell.strip() for cell in row)
            grouped.setdefault((parent, child), []).append(vote)
    rows = [(p, c, votes) for (p, c), votes in sorted(grouped.items())]
    return AssessorVotes(rows=rows)


def aggregate_votes(votes: AssessorVotes) -> tuple[list[tuple[str, str, int]], dict[int, int]]:
    """Majority labels and the agreement histogram.

    An edge is labeled +1 when at least 80 percent of its votes (rounded up)
    say related, otherwise -1. The histogram counts edges by the size of
    their larger vote camp, so its values sum to the number of edges.
    """
    labels = []
    histogram: dict[int, int] = {}
    for parent, child, edge_votes in votes.rows:
        related = sum(1 for v in edge_votes if v == "related")
        unrelated = len(edge_votes) - related
        needed = math.ceil(0.8 * len(edge_votes))
        label = 1 if related >= needed else -1
        labels.append((parent, child, label))
        agreement = max(related, unrelated)
        histogram[agreement] = histogram.get(agreement, 0) + 1
    return labels, histogram


def write_labels(labels: list[tuple[str, str, int]], path: Path | str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["parent", "child", "label"])
        for parent, child, label in labels:
            writer.writerow([parent, child, label])


def read_labels(path: Path | str) -> dict[EdgeKey, int]:
    labels: dict[EdgeKey, int] = {}
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if [h.strip() for h in header] != ["parent", "child", "label"]:
            raise ValueError(f"{path}: expected header parent,child,label")
        for row in reader:
            if not row:
                continue
            value = int(row[2])
            if value not in (1, -1):
                raise ValueError(f"{path}: label must be 1 or -1, got {value}")
            labels[(row[0].strip(), row[1].strip())] = value
    return labels


def roc_auc(scores: list[float], labels: list[int]) -> float:
    """Probability that a random positive-labeled score outranks a negative one."""
    if len(scores) != len(labels):
        raise ValueError("scores and labels must have equal length")
    unique = set(labels)
    if unique - {1, -1}:
        raise ValueError("labels must be +1 or -1")
    if len(unique) < 2:
        raise ValueError("both classes must be present")
    y = [1 if label == 1 else 0 for label in labels]
    return float(roc_auc_score(y, np.asarray(scores, dtype=float)))


def write_curve(points: list[tuple[float, float]], path: Path | str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["k", "value"])
        for k, value in points:
            writer.writerow([f"{k:g}", f"{value:.12g}"])


def write_ranking_report(report: RankingReport, prefix: Path | str) -> None:
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    with open(prefix.with_suffix(".tsv"), "w", encoding="utf-8") as handle:
        handle.write("k\tmetric\tvalue\n")
        for k in sorted(report.per_k):
            for metric in sorted(report.per_k[k]):
                handle.write(f"{k}\t{metric}\t{report.per_k[k][metric]:.12g}\n")
    payload = {"measure": report.measure, "per_k": {str(k): v for k, v in report.per_k.items()}}
    with open(prefix.with_suffix(".json"), "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True, ensure_ascii=False)
        handle.write("\n")
