"""Target-relative negative selection.

For a composed query the corpus is scored by cosine similarity and every
candidate j gets a similarity gap

    delta_j = s_target - s_j.

Candidates whose gap falls inside a configured band form the mid-zone:
hard enough to be informative, far enough from the target to be unlikely
false negatives. Training draws a single uniform negative from that band.

Two band modes exist. ``absolute`` keeps candidates with
alpha <= delta_j <= beta directly. ``quantile`` (default) ranks the gaps,
maps average ranks to [0, 1] (zero-based rank over candidates-1), and
keeps the alpha..beta slice, which adapts to the gap distribution of each
query.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .corpus import EmbeddingMatrix
from .errors import DimMismatch, FormatError, NoCandidates, ZeroVector

MODES = ("quantile", "absolute")


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ZeroVector("cosine similarity of a zero vector is undefined")
    return float(np.dot(u, v) / (nu * nv))


@dataclass(frozen=True)
class ScoreTable:
    """Cosine scores of one query against the corpus.

    ``s`` holds one entry per corpus row with NaN at the target's position
    so the target never enters candidate statistics; ``delta`` is s_tar - s
    with NaN at the target as well.
    """

    query_index: int
    target_pos: int
    s_tar: float
    s: np.ndarray
    delta: np.ndarray
    ids: tuple[str, ...]


def score_all(
    q_star: np.ndarray,
    corpus: EmbeddingMatrix,
    target_id: str,
    query_index: int = 0,
) -> ScoreTable:
    q_star = np.asarray(q_star, dtype=np.float64)
    if q_star.shape != (corpus.dim,):
        raise DimMismatch(f"query shape {q_star.shape}, corpus dim {corpus.dim}")
    qn = np.linalg.norm(q_star)
    if qn == 0.0:
        raise ZeroVector("composed query has zero norm")
    s = corpus.unit_rows() @ (q_star / qn)
    tpos = corpus.index(target_id)
    s_tar = float(s[tpos])
    s = s.copy()
    s[tpos] = np.nan
    delta = s_tar - s
    return ScoreTable(
        query_index=query_index,
        target_pos=tpos,
        s_tar=s_tar,
        s=s,
        delta=delta,
        ids=corpus.ids,
    )


@dataclass(frozen=True)
class MidZoneConfig:
    mode: str = "quantile"
    alpha: float = 0.20
    beta: float = 0.80

    def __post_init__(self):
        if self.mode not in MODES:
            raise FormatError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not (np.isfinite(self.alpha) and np.isfinite(self.beta)):
            raise FormatError("alpha and beta must be finite")
        if not self.alpha < self.beta:
            raise FormatError(f"band requires alpha < beta, got [{self.alpha}, {self.beta}]")
        if self.mode == "quantile" and not (0.0 <= self.alpha and self.beta <= 1.0):
            raise FormatError("quantile band must lie inside [0, 1]")


def normalized_ranks(delta: np.ndarray) -> np.ndarray:
    """Average ranks of the finite gaps mapped to [0, 1]; NaN slots stay NaN.

    A single candidate gets rank 0.0 by convention.
    """
    delta = np.asarray(delta, dtype=np.float64)
    out = np.full(delta.shape, np.nan)
    mask = np.isfinite(delta)
    n = int(mask.sum())
    if n == 0:
        return out
    if n == 1:
        out[mask] = 0.0
        return out
    r = rankdata(delta[mask], method="average")
    out[mask] = (r - 1.0) / (n - 1.0)
    return out


def _band_mask(table: ScoreTable, config: MidZoneConfig) -> np.ndarray:
    """Boolean mask over corpus positions; the target is always False."""
    if config.mode == "absolute":
        coord = table.delta
    else:
        coord = normalized_ranks(table.delta)
    with np.errstate(invalid="ignore"):
        mask = (coord >= config.alpha) & (coord <= config.beta)
    return np.where(np.isfinite(coord), mask, False)


@dataclass(frozen=True)
class NegativeSet:
    """Materialized mid-zone membership for one query at one refresh."""

    query_index: int
    member_ids: tuple[str, ...]
    defined_at_epoch: int


def mid_zone(table: ScoreTable, config: MidZoneConfig, epoch: int = 0) -> NegativeSet:
    mask = _band_mask(table, config)
    members = tuple(table.ids[i] for i in np.flatnonzero(mask))
    return NegativeSet(query_index=table.query_index, member_ids=members, defined_at_epoch=epoch)


def _fallback_candidate(table: ScoreTable, config: MidZoneConfig) -> str:
    """Nearest candidate to the band midpoint when the band is empty.

    Distance is measured in gap space for absolute bands and in normalized
    rank space for quantile bands. Near-ties (within 1e-12) resolve to the
    lexicographically smallest id, keeping float noise out of the pick.
    """
    mid = 0.5 * (config.alpha + config.beta)
    if config.mode == "absolute":
        coord = table.delta
    else:
        coord = normalized_ranks(table.delta)
    finite = np.flatnonzero(np.isfinite(coord))
    if finite.size == 0:
        raise NoCandidates(f"query {table.query_index}: no candidates besides the target")
    dist = np.abs(coord[finite] - mid)
    best = float(dist.min())
    tied = finite[dist <= best + 1e-12]
    return min(table.ids[i] for i in tied)


def sample_negative(
    negative_set: NegativeSet,
    table: ScoreTable,
    config: MidZoneConfig,
    rng: np.random.Generator,
) -> str:
    """Draw one uniform member; fall back to the band-midpoint candidate
    when the set is empty."""
    if negative_set.query_index != table.query_index:
        raise FormatError(
            f"set belongs to query {negative_set.query_index}, table to {table.query_index}"
        )
    if negative_set.member_ids:
        k = int(rng.integers(len(negative_set.member_ids)))
        return negative_set.member_ids[k]
    return _fallback_candidate(table, config)


@dataclass(frozen=True)
class RefreshSchedule:
    """Warm-up epochs followed by equal-length intervals; negative sets are
    rebuilt at the first epoch of each interval.

    ``warmup_epochs == total_epochs`` is allowed as a degenerate case and
    yields no refreshes (the run never leaves warm-up).
    """

    total_epochs: int
    warmup_epochs: int = 0
    num_intervals: int = 5

    def __post_init__(self):
        if self.total_epochs <= 0:
            raise FormatError(f"total_epochs must be positive, got {self.total_epochs}")
        if self.warmup_epochs < 0:
            raise FormatError(f"warmup_epochs must be non-negative, got {self.warmup_epochs}")
        if self.num_intervals <= 0:
            raise FormatError(f"num_intervals must be positive, got {self.num_intervals}")
        if self.warmup_epochs > self.total_epochs:
            raise FormatError(
                f"warmup_epochs {self.warmup_epochs} exceeds total_epochs {self.total_epochs}"
            )
        if self.warmup_epochs < self.total_epochs:
            span = self.total_epochs - self.warmup_epochs
            if span < self.num_intervals:
                raise FormatError(
                    f"{span} post-warmup epochs cannot host {self.num_intervals} intervals"
                )

    def refresh_epochs(self) -> list[int]:
        """First epoch of each interval; empty when warm-up fills the run.

        Boundaries sit at warmup + round(k * span / num_intervals) with
        half-up rounding, k = 0 .. num_intervals - 1.
        """
        if self.warmup_epochs == self.total_epochs:
            return []
        span = self.total_epochs - self.warmup_epochs
        out = []
        for k in range(self.num_intervals):
            out.append(self.warmup_epochs + int(np.floor(k * span / self.num_intervals + 0.5)))
        return out


def log_set_size(sets: Sequence[NegativeSet]) -> float:
    """Mean member count over queries at one refresh."""
    if not sets:
        raise FormatError("cannot average an empty list of negative sets")
    return float(np.mean([len(s.member_ids) for s in sets]))
