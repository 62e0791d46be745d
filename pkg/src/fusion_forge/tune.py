"""Development-split grid search for fusion weights and refinement settings."""

from __future__ import annotations

from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

from .core import Qrels, RankedList
from .errors import InvalidParameter, TooFewQueries
from .evaluation import evaluate
from .gqr import GqrConfig

__all__ = [
    "DEFAULT_ALPHAS",
    "DEFAULT_STEP_SIZES",
    "DEFAULT_ITERATIONS",
    "TuningGrid",
    "DevQueries",
    "TestQueries",
    "TuningResult",
    "split_dev",
    "tune_weight",
    "tune_gqr",
]

DEFAULT_ALPHAS = tuple(round(0.1 * i, 1) for i in range(1, 10))
DEFAULT_STEP_SIZES = (1e-5, 5e-5, 1e-4, 5e-4, 1e-3, 5e-3)
DEFAULT_ITERATIONS = (10, 25, 50)
TIE_TOL = 1e-12
TUNING_METRIC = ("ndcg", 5)


@dataclass(frozen=True)
class TuningGrid:
    alphas: tuple[float, ...] = DEFAULT_ALPHAS
    step_sizes: tuple[float, ...] = DEFAULT_STEP_SIZES
    iteration_counts: tuple[int, ...] = DEFAULT_ITERATIONS

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "step_sizes", tuple(float(s) for s in self.step_sizes))
        object.__setattr__(self, "iteration_counts", tuple(int(t) for t in self.iteration_counts))
        if not (self.alphas and self.step_sizes and self.iteration_counts):
            raise InvalidParameter("tuning grids must be non-empty")
        if any(not 0.0 <= a <= 1.0 for a in self.alphas):
            raise InvalidParameter("alphas must lie in [0, 1]")
        if any(not s > 0 for s in self.step_sizes):
            raise InvalidParameter("step sizes must be positive")
        if any(t < 1 for t in self.iteration_counts):
            raise InvalidParameter("iteration counts must be >= 1")


class DevQueries(tuple):
    """Query ids that tuning may read."""


class TestQueries(tuple):
    """Held-out query ids; tuning functions refuse them."""

    __test__ = False


def split_dev(query_ids: Iterable[str], fraction: float = 0.1, seed: int = 0) -> tuple[DevQueries, TestQueries]:
    """Seeded random split; the dev side has ``max(1, round(fraction * N))`` queries."""
    ids = sorted(set(query_ids))
    if len(ids) < 2:
        raise TooFewQueries(f"need at least 2 queries to split, got {len(ids)}")
    if not 0.0 < fraction < 1.0:
        raise InvalidParameter("fraction must lie in (0, 1)")
    n_dev = max(1, round(fraction * len(ids)))
    n_dev = min(n_dev, len(ids) - 1)
    order = np.random.default_rng(seed).permutation(len(ids))
    dev = sorted(ids[i] for i in order[:n_dev])
    test = sorted(ids[i] for i in order[n_dev:])
    return DevQueries(dev), TestQueries(test)


@dataclass
class TuningResult:
    best: object
    best_score: float
    scores: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "best": self.best,
            "best_score": self.best_score,
            "grid": [{"params": k, "dev_ndcg@5": v} for k, v in self.scores.items()],
        }


def _require_dev(dev: Sequence[str]) -> DevQueries:
    if isinstance(dev, TestQueries) or not isinstance(dev, DevQueries):
        raise TypeError("tuning accepts only the DevQueries side of split_dev")
    if not dev:
        raise InvalidParameter("empty dev split")
    return dev


def _dev_score(runs: list[RankedList], qrels: Qrels) -> float:
    metric, k = TUNING_METRIC
    return evaluate(runs, qrels, metric, k).mean


def _select(scores: dict, key: Callable) -> tuple[object, float]:
    top = max(scores.values())
    tied = [p for p, s in scores.items() if s >= top - TIE_TOL]
    best = min(tied, key=key)
    return best, scores[best]


def tune_weight(method: Callable[[str, float], RankedList], dev: DevQueries, alphas: Sequence[float],
                qrels: Qrels) -> TuningResult:
    """Pick the alpha with the best mean dev NDCG@5.

    ``method(query_id, alpha)`` produces the fused list. Ties go to the alpha
    closest to 0.5, then to the smaller alpha.
    """
    dev = _require_dev(dev)
    if not alphas:
        raise InvalidParameter("alpha grid is empty")
    scores = {}
    for alpha in alphas:
        scores[float(alpha)] = _dev_score([method(qid, float(alpha)) for qid in dev], qrels)
    best, best_score = _select(scores, key=lambda a: (round(abs(a - 0.5), 12), a))
    return TuningResult(best, best_score, scores)


def tune_gqr(run_query: Callable[[str, GqrConfig], RankedList], dev: DevQueries, grid: TuningGrid, qrels: Qrels,
             base: GqrConfig = GqrConfig()) -> TuningResult:
    """Exhaustive search over step sizes x iteration counts.

    ``run_query(query_id, config)`` returns the refined list. Ties prefer
    fewer iterations, then the smaller step size. ``best`` is ``(step_size, T)``.
    """
    dev = _require_dev(dev)
    scores = {}
    for iterations in grid.iteration_counts:
        for step in grid.step_sizes:
            cfg = base.with_(step_size=step, iterations=iterations)
            scores[(step, iterations)] = _dev_score([run_query(qid, cfg) for qid in dev], qrels)
    best, best_score = _select(scores, key=lambda p: (p[1], p[0]))
    return TuningResult(best, best_score, scores)
