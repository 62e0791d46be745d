"""Guided query refinement.

The primary retriever's query embedding is moved by Adam so that its softmax
distribution over the candidate pool agrees with the consensus of both
retrievers; the pool is then re-ranked with the refined query alone.

All losses use the natural logarithm. Gradients are analytic: the divergence
is differentiated with respect to the pool scores (through every occurrence
of the primary distribution, including inside the consensus) and then pushed
through the scorer (quotient rule for cosine, argmax routing for MaxSim).
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from . import kernels
from .core import CandidatePool, CorpusIndex, EmbeddingMatrix, RankedList, Scorer, build_ranked_list, union_pool
from .errors import DimensionMismatch, InvalidParameter, PoolMismatch
from .scoring import Distribution, score_pool, search_top_k, softmax_distribution

__all__ = [
    "LossVariant",
    "PoolPolicy",
    "GqrConfig",
    "AdamState",
    "RetrieverPair",
    "GqrTrace",
    "kl_divergence",
    "js_divergence",
    "gqr_loss",
    "gqr_grad",
    "finite_diff_grad",
    "adam_step",
    "guided_query_refinement",
    "swap_roles",
]


class LossVariant(str, Enum):
    KL_CONSENSUS = "kl_consensus"
    JENSEN_SHANNON = "jensen_shannon"
    KL_TARGET = "kl_target"

    @property
    def code(self) -> int:
        return _VARIANT_CODE[self]


_VARIANT_CODE = {
    LossVariant.KL_CONSENSUS: kernels.KL_CONSENSUS,
    LossVariant.JENSEN_SHANNON: kernels.JENSEN_SHANNON,
    LossVariant.KL_TARGET: kernels.KL_TARGET,
}


class PoolPolicy(str, Enum):
    UNION = "union"
    PRIMARY_ONLY = "primary_only"


@dataclass(frozen=True)
class GqrConfig:
    iterations: int = 10
    step_size: float = 1e-3
    top_k: int = 10
    loss: LossVariant = LossVariant.KL_CONSENSUS
    pool_policy: PoolPolicy = PoolPolicy.UNION
    extra_search: bool = False
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "loss", LossVariant(self.loss))
        object.__setattr__(self, "pool_policy", PoolPolicy(self.pool_policy))
        if int(self.iterations) != self.iterations or self.iterations < 1:
            raise InvalidParameter("iterations must be a positive integer")
        if not self.step_size > 0:
            raise InvalidParameter("step_size must be positive")
        if int(self.top_k) != self.top_k or self.top_k < 1:
            raise InvalidParameter("top_k must be >= 1")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise InvalidParameter("Adam betas must lie in (0, 1)")
        if not self.eps > 0:
            raise InvalidParameter("Adam eps must be positive")

    def with_(self, **changes) -> "GqrConfig":
        return replace(self, **changes)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros_like(cls, z: np.ndarray) -> "AdamState":
        return cls(np.zeros_like(z, dtype=np.float64), np.zeros_like(z, dtype=np.float64), 0)


def _same_pool(p: Distribution, q: Distribution) -> None:
    if p.pool.doc_ids != q.pool.doc_ids:
        raise PoolMismatch("distributions are over different pools")


def kl_divergence(p: Distribution, q: Distribution) -> float:
    _same_pool(p, q)
    mask = p.probs > 0
    return float(np.sum(p.probs[mask] * (p.log_probs[mask] - q.log_probs[mask])))


def _mixture(p: Distribution, q: Distribution) -> Distribution:
    lm = np.where(
        p.log_probs == q.log_probs,
        p.log_probs,
        math.log(0.5) + np.logaddexp(p.log_probs, q.log_probs),
    )
    return Distribution(p.pool, 0.5 * (p.probs + q.probs), lm)


def js_divergence(p: Distribution, q: Distribution) -> float:
    _same_pool(p, q)
    m = _mixture(p, q)
    return 0.5 * kl_divergence(p, m) + 0.5 * kl_divergence(q, m)


def _packed(pool: CandidatePool, index: CorpusIndex):
    rows = index.rows(pool.doc_ids)
    return index.subset(rows)


def _kind(index: CorpusIndex) -> int:
    return kernels.COSINE if index.scorer is Scorer.COSINE else kernels.MAXSIM


def _as_array(z) -> np.ndarray:
    if isinstance(z, EmbeddingMatrix):
        return z.vectors
    arr = np.asarray(z, dtype=np.float64)
    return arr[None, :] if arr.ndim == 1 else arr


def gqr_loss(z, pool: CandidatePool, primary_index: CorpusIndex, p2: Distribution,
             loss: LossVariant = LossVariant.KL_CONSENSUS) -> float:
    """Divergence between the primary distribution at ``z`` and the guidance ``p2``."""
    return _loss_and_grad(z, pool, primary_index, p2, loss)[0]


def gqr_grad(z, pool: CandidatePool, primary_index: CorpusIndex, p2: Distribution,
             loss: LossVariant = LossVariant.KL_CONSENSUS) -> np.ndarray:
    """Analytic gradient of :func:`gqr_loss` with respect to every vector of ``z``."""
    return _loss_and_grad(z, pool, primary_index, p2, loss)[1]


def _loss_and_grad(z, pool, primary_index, p2, loss):
    if p2.pool.doc_ids != pool.doc_ids:
        raise PoolMismatch("guidance distribution is over a different pool")
    Z = _as_array(z)
    if Z.shape[1] != primary_index.dim:
        raise DimensionMismatch(f"query dim {Z.shape[1]} != index dim {primary_index.dim}")
    if primary_index.scorer is Scorer.COSINE and Z.shape[0] != 1:
        raise DimensionMismatch("cosine scoring needs a single-vector query")
    tokens, offsets, norms = _packed(pool, primary_index)
    return kernels.loss_grad(_kind(primary_index), Z, tokens, offsets, norms, p2.log_probs,
                             LossVariant(loss).code)


def finite_diff_grad(fn: Callable[[np.ndarray], float], z, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function, one coordinate at a time."""
    if not h > 0:
        raise InvalidParameter("h must be positive")
    base = np.array(_as_array(z) if isinstance(z, EmbeddingMatrix) else z, dtype=np.float64)
    grad = np.zeros_like(base)
    flat = base.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = fn(base.copy())
        flat[i] = orig - h
        down = fn(base.copy())
        flat[i] = orig
        gflat[i] = (up - down) / (2.0 * h)
    return grad


def adam_step(state: AdamState, z: np.ndarray, grad: np.ndarray, step_size: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """One bias-corrected Adam update; returns ``(new_z, new_state)`` and leaves inputs untouched."""
    z = np.asarray(z, dtype=np.float64)
    g = np.asarray(grad, dtype=np.float64)
    if z.shape != g.shape or state.m.shape != z.shape:
        raise InvalidParameter("Adam state, parameters and gradient must share a shape")
    t = state.t + 1
    m = beta1 * state.m + (1.0 - beta1) * g
    v = beta2 * state.v + (1.0 - beta2) * (g * g)
    mhat = m / (1.0 - beta1 ** t)
    vhat = v / (1.0 - beta2 ** t)
    new_z = z - step_size * mhat / (np.sqrt(vhat) + eps)
    return new_z, AdamState(m, v, t)


@dataclass(frozen=True)
class RetrieverPair:
    """Which retriever is refined (primary) and which guides (complementary)."""

    primary_index: CorpusIndex
    complementary_index: CorpusIndex
    primary_queries: dict = field(default_factory=dict)
    complementary_queries: dict = field(default_factory=dict)


def swap_roles(pair: RetrieverPair) -> RetrieverPair:
    return RetrieverPair(
        primary_index=pair.complementary_index,
        complementary_index=pair.primary_index,
        primary_queries=pair.complementary_queries,
        complementary_queries=pair.primary_queries,
    )


@dataclass
class GqrTrace:
    """Side outputs of one refinement, useful for diagnostics and tests."""

    pool: CandidatePool
    primary: RankedList
    complementary: RankedList
    losses: np.ndarray
    refined_query: np.ndarray


def guided_query_refinement(
    primary_query: EmbeddingMatrix,
    complementary_query: EmbeddingMatrix,
    primary_index: CorpusIndex,
    complementary_index: CorpusIndex,
    config: GqrConfig = GqrConfig(),
    query_id: str = "",
    trace: bool = False,
    lists: tuple[RankedList, RankedList] | None = None,
):
    """Refine the primary query against the consensus and re-rank the pool.

    ``lists`` may carry the two retrievers' top-K lists when the caller has
    already searched. Returns the top-K list, or ``(list, GqrTrace)`` when
    ``trace`` is set.
    """
    k = config.top_k
    if lists is None:
        first = search_top_k(primary_query, primary_index, k, query_id)
        second = search_top_k(complementary_query, complementary_index, k, query_id)
    else:
        first, second = lists
    if config.pool_policy is PoolPolicy.UNION:
        pool = union_pool([first, second])
    else:
        pool = union_pool([first])

    p2 = softmax_distribution(score_pool(complementary_query, pool, complementary_index), pool)

    tokens, offsets, norms = _packed(pool, primary_index)
    z, losses = kernels.refine(
        _kind(primary_index), primary_query.vectors, tokens, offsets, norms, p2.log_probs,
        config.loss.code, int(config.iterations), float(config.step_size),
        float(config.beta1), float(config.beta2), float(config.eps),
    )
    refined = EmbeddingMatrix(z)

    final_pool = pool
    if config.extra_search:
        again = search_top_k(refined, primary_index, k, query_id)
        seen = set(pool.doc_ids)
        final_pool = CandidatePool(query_id, pool.doc_ids + tuple(d for d in again.doc_ids if d not in seen))

    final = score_pool(refined, final_pool, primary_index)
    result = build_ranked_list(query_id, zip(final_pool.doc_ids, final)).truncate(k)
    if trace:
        return result, GqrTrace(final_pool, first, second, losses, z)
    return result
