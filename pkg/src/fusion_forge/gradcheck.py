"""Seeded random instances for checking refinement gradients against finite differences."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CandidatePool, CorpusIndex, EmbeddingMatrix, Scorer
from .gqr import LossVariant, finite_diff_grad, gqr_grad, gqr_loss
from .scoring import Distribution, softmax_distribution

ABS_FLOOR = 1e-8
FD_STEP = 1e-5
# smallest allowed gap between the best and second-best token match (keeps MaxSim away from kinks)
ARGMAX_MARGIN = 1e-3

_LOSSES = tuple(LossVariant)


@dataclass
class GradInstance:
    seed: int
    scorer: Scorer
    loss: LossVariant
    query: EmbeddingMatrix
    index: CorpusIndex
    pool: CandidatePool
    guidance: Distribution


@dataclass
class GradCheck:
    seed: int
    scorer: str
    loss: str
    dim: int
    pool_size: int
    max_rel_error: float
    max_abs_error_small: float

    def passed(self, tolerance: float) -> bool:
        return self.max_rel_error <= tolerance and self.max_abs_error_small <= ABS_FLOOR

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _argmax_gap(Q: np.ndarray, docs: list[np.ndarray]) -> float:
    gap = np.inf
    for P in docs:
        if P.shape[0] < 2:
            continue
        sims = np.sort(Q @ P.T, axis=1)
        gap = min(gap, float(np.min(sims[:, -1] - sims[:, -2])))
    return gap


def random_instance(seed: int, scorer: Scorer | str | None = None, loss: LossVariant | str | None = None) -> GradInstance:
    """Instance ``seed``: dim in [4, 64], pool size in [5, 50]; scorer and loss cycle with the seed
    unless given."""
    rng = np.random.default_rng(seed)
    scorer = Scorer.parse(scorer) if scorer is not None else (Scorer.COSINE, Scorer.MAXSIM)[seed % 2]
    loss = LossVariant(loss) if loss is not None else _LOSSES[(seed // 2) % 3]
    dim = int(rng.integers(4, 65))
    n = int(rng.integers(5, 51))
    ids = [f"d{i:03d}" for i in range(n)]
    if scorer is Scorer.COSINE:
        q = rng.normal(size=(1, dim))
        docs = [rng.normal(size=(1, dim)) for _ in range(n)]
        # guidance and primary scores on comparable scales (cosine lives in [-1, 1])
        guide_scale = 3.0
    else:
        n_q = int(rng.integers(1, 6))
        scale = 1.0 / np.sqrt(dim)
        while True:
            q = rng.normal(size=(n_q, dim)) * scale
            docs = [rng.normal(size=(int(rng.integers(1, 7)), dim)) * scale for _ in range(n)]
            if _argmax_gap(q, docs) > ARGMAX_MARGIN:
                break
        guide_scale = 1.0
    index = CorpusIndex(dict(zip(ids, docs)), scorer)
    pool = CandidatePool("q", tuple(ids))
    guidance = softmax_distribution(rng.normal(size=n) * guide_scale, pool)
    return GradInstance(seed, scorer, loss, EmbeddingMatrix(q), index, pool, guidance)


def compare(analytic: np.ndarray, numeric: np.ndarray) -> tuple[float, float]:
    """Max relative error over coordinates above the absolute floor, max absolute error below it."""
    a = np.asarray(analytic, dtype=np.float64).ravel()
    f = np.asarray(numeric, dtype=np.float64).ravel()
    mag = np.maximum(np.abs(a), np.abs(f))
    diff = np.abs(a - f)
    big = mag >= ABS_FLOOR
    rel = float(np.max(diff[big] / mag[big])) if big.any() else 0.0
    small = float(np.max(diff[~big])) if (~big).any() else 0.0
    return rel, small


def check_instance(inst: GradInstance, h: float = FD_STEP, corrupt: bool = False) -> GradCheck:
    args = (inst.pool, inst.index, inst.guidance, inst.loss)
    analytic = gqr_grad(inst.query, *args)
    if corrupt:
        analytic = analytic.copy()
        analytic.flat[0] = analytic.flat[0] * 1.5 + 1e-3
    numeric = finite_diff_grad(lambda z: gqr_loss(z, *args), inst.query.vectors, h)
    rel, small = compare(analytic, numeric)
    return GradCheck(inst.seed, inst.scorer.value, inst.loss.value, inst.index.dim, len(inst.pool), rel, small)


def run_checks(instances: int, seed: int = 0, h: float = FD_STEP, corrupt: bool = False) -> list[GradCheck]:
    return [check_instance(random_instance(seed + i), h, corrupt) for i in range(instances)]
