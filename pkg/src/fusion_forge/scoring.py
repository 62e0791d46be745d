"""Similarity functions, exact top-K search, pool scoring and softmax distributions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import CandidatePool, CorpusIndex, EmbeddingMatrix, RankedList, Scorer, build_ranked_list
from .errors import DimensionMismatch, EmptyPool, InvalidParameter, NonFiniteScore, PoolMismatch, ZeroNormVector

__all__ = [
    "Distribution",
    "cosine",
    "maxsim",
    "search_top_k",
    "score_pool",
    "softmax_distribution",
    "PROB_FLOOR",
]

PROB_FLOOR = 1e-12

_KIND = {Scorer.COSINE: kernels.COSINE, Scorer.MAXSIM: kernels.MAXSIM}


@dataclass(frozen=True, eq=False)
class Distribution:
    """Probability vector aligned to a candidate pool.

    ``log_probs`` is kept alongside ``probs`` so divergences never take the
    log of an underflowed probability.
    """

    pool: CandidatePool
    probs: np.ndarray
    log_probs: np.ndarray

    def __post_init__(self):
        if len(self.probs) != len(self.pool) or len(self.log_probs) != len(self.pool):
            raise PoolMismatch("distribution length differs from pool size")
        self.probs.setflags(write=False)
        self.log_probs.setflags(write=False)

    @classmethod
    def from_probs(cls, pool: CandidatePool, probs) -> "Distribution":
        p = np.array(probs, dtype=np.float64)
        if p.ndim != 1 or np.any(p < 0) or not np.all(np.isfinite(p)):
            raise InvalidParameter("probabilities must be a finite non-negative vector")
        total = p.sum()
        if not math.isclose(total, 1.0, abs_tol=1e-9):
            raise InvalidParameter(f"probabilities sum to {total}, not 1")
        return cls(pool, p, np.log(np.maximum(p, PROB_FLOOR)))

    def __len__(self) -> int:
        return len(self.probs)


def _single(m: EmbeddingMatrix, what: str) -> np.ndarray:
    if m.n_vectors != 1:
        raise DimensionMismatch(f"cosine needs a single-vector {what}, got {m.n_vectors} vectors")
    return m.vectors[0]


def cosine(q: EmbeddingMatrix, p: EmbeddingMatrix) -> float:
    a = _single(q, "query")
    b = _single(p, "document")
    if a.shape != b.shape:
        raise DimensionMismatch(f"dim {a.shape[0]} vs {b.shape[0]}")
    na = math.sqrt(float(a @ a))
    nb = math.sqrt(float(b @ b))
    if na == 0.0 or nb == 0.0:
        raise ZeroNormVector("cosine of a zero-norm vector is undefined")
    return float(a @ b) / (na * nb)


def maxsim(Q: EmbeddingMatrix, P: EmbeddingMatrix) -> float:
    """Sum over query vectors of the best raw dot product against any document vector."""
    if Q.dim != P.dim:
        raise DimensionMismatch(f"dim {Q.dim} vs {P.dim}")
    sims = Q.vectors @ P.vectors.T
    return float(sims.max(axis=1).sum())


def _check_query(query: EmbeddingMatrix, index: CorpusIndex) -> np.ndarray:
    if query.dim != index.dim:
        raise DimensionMismatch(f"query dim {query.dim} != index dim {index.dim}")
    if index.scorer is Scorer.COSINE:
        z = _single(query, "query")
        if not np.any(z):
            raise ZeroNormVector("cosine query has zero norm")
    return query.vectors


def _index_scores(query: EmbeddingMatrix, index: CorpusIndex, rows: np.ndarray | None = None) -> np.ndarray:
    Z = _check_query(query, index)
    if rows is None:
        tokens, offsets, norms = index.tokens, index.offsets, index.norms
    else:
        tokens, offsets, norms = index.subset(rows)
    if index.scorer is Scorer.COSINE and np.any(norms == 0.0):
        raise ZeroNormVector("index contains a zero-norm document")
    return kernels.dot_scores(_KIND[index.scorer], Z, tokens, offsets, norms)


def search_top_k(query: EmbeddingMatrix, index: CorpusIndex, k: int, query_id: str = "") -> RankedList:
    """Exact brute-force search; ties broken by ascending doc id."""
    if k < 1:
        raise InvalidParameter("K must be >= 1")
    scores = _index_scores(query, index)
    if not np.all(np.isfinite(scores)):
        raise NonFiniteScore("non-finite similarity")
    n = len(scores)
    if n > k:
        # partition on score, then widen to keep every doc tied with the K-th score
        kth = np.partition(scores, n - k)[n - k]
        keep = np.flatnonzero(scores >= kth)
    else:
        keep = np.arange(n)
    ids = index.doc_ids
    full = build_ranked_list(query_id, ((ids[i], scores[i]) for i in keep))
    return full.truncate(k)


def score_pool(query: EmbeddingMatrix, pool: CandidatePool, index: CorpusIndex) -> np.ndarray:
    """Raw scores of ``query`` against the pool's documents, in pool order."""
    rows = index.rows(pool.doc_ids)
    return _index_scores(query, index, rows)


def softmax_distribution(scores, pool: CandidatePool) -> Distribution:
    s = np.asarray(scores, dtype=np.float64)
    if len(pool) == 0 or s.size == 0:
        raise EmptyPool("softmax over an empty pool")
    if s.shape != (len(pool),):
        raise PoolMismatch(f"{s.size} scores for a pool of {len(pool)}")
    if not np.all(np.isfinite(s)):
        raise NonFiniteScore("softmax input must be finite")
    lp = kernels.log_softmax(s)
    return Distribution(pool, np.exp(lp), lp)
