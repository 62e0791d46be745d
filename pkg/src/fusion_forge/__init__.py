"""Two-retriever fusion over precomputed embeddings.

Rank-level (RRF, average rank) and score-level (min-max, softmax) hybrids,
plus guided query refinement: the primary retriever's query embedding is
optimized at test time toward the consensus of both retrievers.
"""

from .core import CandidatePool, CorpusIndex, EmbeddingMatrix, Qrels, RankedList, Scorer, build_ranked_list, rank_of, union_pool
from .errors import FusionForgeError
from .evaluation import EvalReport, evaluate, ndcg_at_k, recall_at_k
from .fusion import FusionWeights, Normalization, fuse_avg_rank, fuse_rrf, fuse_scores, normalize_minmax, normalize_softmax
from .gqr import (
    AdamState,
    GqrConfig,
    LossVariant,
    PoolPolicy,
    RetrieverPair,
    adam_step,
    finite_diff_grad,
    gqr_grad,
    gqr_loss,
    guided_query_refinement,
    js_divergence,
    kl_divergence,
    swap_roles,
)
from .kernels import BACKEND_NAME as kernel_backend
from .scoring import Distribution, cosine, maxsim, score_pool, search_top_k, softmax_distribution

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "CandidatePool",
    "CorpusIndex",
    "Distribution",
    "EmbeddingMatrix",
    "EvalReport",
    "FusionForgeError",
    "FusionWeights",
    "GqrConfig",
    "LossVariant",
    "Normalization",
    "PoolPolicy",
    "Qrels",
    "RankedList",
    "RetrieverPair",
    "Scorer",
    "adam_step",
    "build_ranked_list",
    "cosine",
    "evaluate",
    "finite_diff_grad",
    "fuse_avg_rank",
    "fuse_rrf",
    "fuse_scores",
    "gqr_grad",
    "gqr_loss",
    "guided_query_refinement",
    "js_divergence",
    "kernel_backend",
    "kl_divergence",
    "maxsim",
    "ndcg_at_k",
    "normalize_minmax",
    "normalize_softmax",
    "rank_of",
    "recall_at_k",
    "score_pool",
    "search_top_k",
    "softmax_distribution",
    "swap_roles",
    "union_pool",
]
