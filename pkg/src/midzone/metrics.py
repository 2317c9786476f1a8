"""Ranking and retrieval metrics.

Rankings order the corpus by descending cosine similarity to the composed
query, with ties broken by ascending item id so results are deterministic.
The reference item is excluded from the candidate pool by default (the
target never is). Metrics are computed as fractions in [0, 1]; percent
formatting with half-up rounding lives in format_percent for table-style
reporting.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Mapping, Sequence

import numpy as np

from .corpus import EmbeddingMatrix
from .errors import (
    DimMismatch,
    EmptyAfterExclusion,
    EmptyRelevantSet,
    FormatError,
    MissingSubset,
    ZeroVector,
)


@dataclass(frozen=True)
class RankedList:
    """Full corpus ordering for one query, best first."""

    query_index: int
    ids: tuple[str, ...]
    sims: np.ndarray

    def rank_of(self, item_id: str) -> int:
        """1-based rank; raises if the item was excluded from the pool."""
        try:
            return self.ids.index(item_id) + 1
        except ValueError:
            raise FormatError(f"item {item_id!r} not in ranking") from None


def rank_corpus(
    q_star: np.ndarray,
    corpus: EmbeddingMatrix,
    exclude: set[str] | None = None,
    query_index: int = 0,
) -> RankedList:
    q_star = np.asarray(q_star, dtype=np.float64)
    if q_star.shape != (corpus.dim,):
        raise DimMismatch(f"query shape {q_star.shape}, corpus dim {corpus.dim}")
    qn = np.linalg.norm(q_star)
    if qn == 0.0:
        raise ZeroVector("query has zero norm")
    sims = corpus.unit_rows() @ (q_star / qn)
    keep = np.arange(corpus.count)
    if exclude:
        mask = np.array([item not in exclude for item in corpus.ids])
        keep = keep[mask]
    if keep.size == 0:
        raise EmptyAfterExclusion("no candidates remain after exclusion")
    kept_ids = np.array([corpus.ids[i] for i in keep])
    kept_sims = sims[keep]
    # lexsort's last key is primary: descending similarity, then ascending id.
    order = np.lexsort((kept_ids, -kept_sims))
    return RankedList(
        query_index=query_index,
        ids=tuple(kept_ids[order]),
        sims=kept_sims[order],
    )


def recall_at_k(ranked: Sequence[RankedList], targets: Sequence[str], k: int) -> float:
    if k < 1:
        raise FormatError(f"k must be positive, got {k}")
    if len(ranked) != len(targets):
        raise FormatError(f"{len(ranked)} rankings but {len(targets)} targets")
    if not ranked:
        raise FormatError("no queries")
    hits = sum(1 for r, t in zip(ranked, targets) if t in r.ids[:k])
    return hits / len(ranked)


def recall_subset_at_k(
    ranked: Sequence[RankedList],
    subsets: Sequence[Sequence[str] | None],
    targets: Sequence[str],
    k: int,
) -> float:
    """Recall after restricting each ranking to the query's subset ids."""
    if k < 1:
        raise FormatError(f"k must be positive, got {k}")
    if not (len(ranked) == len(subsets) == len(targets)):
        raise FormatError("rankings, subsets, and targets must align")
    if not ranked:
        raise FormatError("no queries")
    hits = 0
    for r, subset, target in zip(ranked, subsets, targets):
        if subset is None:
            raise MissingSubset(f"query {r.query_index} has no subset ids")
        allowed = set(subset)
        restricted = [item for item in r.ids if item in allowed]
        if target in restricted[:k]:
            hits += 1
    return hits / len(ranked)


def cirr_average(r_at_5: float, r_subset_at_1: float) -> float:
    """Arithmetic mean of the two headline values (fractions or percents)."""
    return (r_at_5 + r_subset_at_1) / 2.0


def map_at_k(
    ranked: Sequence[RankedList],
    relevant_sets: Sequence[set[str]],
    k: int,
) -> float:
    """Mean over queries of AP@K with min(|relevant|, K) normalization."""
    if k < 1:
        raise FormatError(f"k must be positive, got {k}")
    if len(ranked) != len(relevant_sets):
        raise FormatError(f"{len(ranked)} rankings but {len(relevant_sets)} relevant sets")
    if not ranked:
        raise FormatError("no queries")
    aps = []
    for r, relevant in zip(ranked, relevant_sets):
        if not relevant:
            raise EmptyRelevantSet(f"query {r.query_index} has an empty relevant set")
        hits = 0
        score = 0.0
        for i, item in enumerate(r.ids[:k], start=1):
            if item in relevant:
                hits += 1
                score += hits / i
        aps.append(score / min(len(relevant), k))
    return float(np.mean(aps))


def format_percent(fraction: float) -> str:
    """Fraction -> percent string with half-up rounding to 2 decimals."""
    return str((Decimal(repr(fraction)) * 100).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class MetricsReport:
    """All metric values as fractions.

    ``average`` follows the headline convention of the data at hand: with
    subsets present it is the mean of recall@5 and subset-recall@1;
    otherwise the mean of recall@10 and recall@50.
    """

    recall_at: Mapping[int, float]
    recall_subset_at: Mapping[int, float]
    average: float
    map_at: Mapping[int, float]


def compute_metrics(
    ranked: Sequence[RankedList],
    targets: Sequence[str],
    subsets: Sequence[Sequence[str] | None] | None = None,
    relevant_sets: Sequence[set[str]] | None = None,
    recall_ks: Sequence[int] = (1, 5, 10, 50),
    map_ks: Sequence[int] = (5, 10, 25, 50),
) -> MetricsReport:
    """Assemble the full report from precomputed rankings.

    relevant_sets defaults to the singleton {target} per query, which makes
    mAP@K a positional variant of recall.
    """
    recall = {k: recall_at_k(ranked, targets, k) for k in recall_ks}
    have_subsets = subsets is not None and all(s is not None for s in subsets)
    subset_recall: dict[int, float] = {}
    if have_subsets:
        subset_recall = {
            k: recall_subset_at_k(ranked, subsets, targets, k) for k in (1, 2, 3)
        }
    if relevant_sets is None:
        relevant_sets = [{t} for t in targets]
    maps = {k: map_at_k(ranked, relevant_sets, k) for k in map_ks}
    if have_subsets:
        r5 = recall.get(5, recall_at_k(ranked, targets, 5))
        average = cirr_average(r5, subset_recall[1])
    else:
        r10 = recall.get(10, recall_at_k(ranked, targets, 10))
        r50 = recall.get(50, recall_at_k(ranked, targets, 50))
        average = (r10 + r50) / 2.0
    return MetricsReport(
        recall_at=recall,
        recall_subset_at=subset_recall,
        average=average,
        map_at=maps,
    )
