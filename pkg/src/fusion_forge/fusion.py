"""Rank-level and score-level hybrids of two ranked lists.

Every method scores the union of the two lists (absent documents get rank
K + 1, or normalized score 0) and returns the top K.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import RankedList, build_ranked_list, rank_map, union_pool
from .errors import InvalidParameter

__all__ = [
    "FusionWeights",
    "Normalization",
    "MINMAX_EPS",
    "DEFAULT_KAPPA",
    "fuse_rrf",
    "fuse_avg_rank",
    "normalize_minmax",
    "normalize_softmax",
    "fuse_scores",
]

MINMAX_EPS = 1e-6
DEFAULT_KAPPA = 60.0


@dataclass(frozen=True)
class FusionWeights:
    """Weight ``alpha`` for retriever 1; retriever 2 gets ``1 - alpha``."""

    alpha: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidParameter(f"alpha must lie in [0, 1], got {self.alpha}")


class Normalization(str, Enum):
    MINMAX = "minmax"
    SOFTMAX = "softmax"


def _pair(lists: Sequence[RankedList]) -> tuple[RankedList, RankedList]:
    if len(lists) != 2:
        raise InvalidParameter(f"fusion takes exactly two lists, got {len(lists)}")
    return lists[0], lists[1]


def fuse_rrf(lists: Sequence[RankedList], kappa: float = DEFAULT_KAPPA, k: int = 10,
             weights: FusionWeights = FusionWeights()) -> RankedList:
    """Weighted reciprocal rank fusion.

    score(d) = 2 * (alpha / (kappa + rank1) + (1 - alpha) / (kappa + rank2)),
    which is the plain two-list sum at alpha = 0.5.
    """
    if not kappa > 0:
        raise InvalidParameter("kappa must be > 0")
    if k < 1:
        raise InvalidParameter("K must be >= 1")
    first, second = _pair(lists)
    pool = union_pool([first, second])
    r1, r2 = rank_map(first), rank_map(second)
    a = weights.alpha
    scored = [(d, rrf_score(r1.get(d, k + 1), r2.get(d, k + 1), kappa, a)) for d in pool]
    return build_ranked_list(pool.query_id, scored).truncate(k)


def fuse_avg_rank(lists: Sequence[RankedList], k: int = 10, weights: FusionWeights = FusionWeights()) -> RankedList:
    """Weighted average rank, negated so higher is better."""
    if k < 1:
        raise InvalidParameter("K must be >= 1")
    first, second = _pair(lists)
    pool = union_pool([first, second])
    r1, r2 = rank_map(first), rank_map(second)
    a = weights.alpha
    scored = [(d, -(a * r1.get(d, k + 1) + (1.0 - a) * r2.get(d, k + 1))) for d in pool]
    return build_ranked_list(pool.query_id, scored).truncate(k)


def normalize_minmax(ranked: RankedList, eps: float = MINMAX_EPS) -> dict[str, float]:
    """Min-max normalized scores of the list's own documents; callers treat absent docs as 0."""
    if not ranked.items:
        return {}
    scores = np.array(ranked.scores)
    lo, hi = scores.min(), scores.max()
    span = hi - lo + eps
    return {d: float((s - lo) / span) for d, s in ranked.items}


def normalize_softmax(ranked: RankedList) -> dict[str, float]:
    """Softmax over the list's own scores; callers treat absent docs as 0."""
    if not ranked.items:
        return {}
    scores = np.array(ranked.scores)
    e = np.exp(scores - scores.max())
    probs = e / e.sum()
    return {d: float(p) for (d, _), p in zip(ranked.items, probs)}


_NORMALIZERS = {Normalization.MINMAX: normalize_minmax, Normalization.SOFTMAX: normalize_softmax}


def fuse_scores(lists: Sequence[RankedList], norm: Normalization | str = Normalization.MINMAX, k: int = 10,
                weights: FusionWeights = FusionWeights()) -> RankedList:
    """Convex combination of per-retriever normalized scores."""
    if k < 1:
        raise InvalidParameter("K must be >= 1")
    first, second = _pair(lists)
    normalize = _NORMALIZERS[Normalization(norm)]
    pool = union_pool([first, second])
    n1, n2 = normalize(first), normalize(second)
    a = weights.alpha
    scored = [(d, a * n1.get(d, 0.0) + (1.0 - a) * n2.get(d, 0.0)) for d in pool]
    return build_ranked_list(pool.query_id, scored).truncate(k)


def rrf_score(rank1: int, rank2: int, kappa: float = DEFAULT_KAPPA, alpha: float = 0.5) -> float:
    """Fused RRF score of a document at the given 1-indexed ranks."""
    return 2.0 * (alpha / (kappa + rank1) + (1.0 - alpha) / (kappa + rank2))

