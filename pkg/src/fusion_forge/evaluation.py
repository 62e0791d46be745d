"""NDCG@k and Recall@k over ranked lists and graded qrels."""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

from .core import Qrels, RankedList
from .errors import InvalidParameter

__all__ = ["EvalReport", "ndcg_at_k", "recall_at_k", "evaluate", "METRICS"]


def _check_k(k: int) -> None:
    if k < 1:
        raise InvalidParameter("k must be >= 1")


def _gain(grade: int) -> float:
    return 2.0 ** grade - 1.0


def ndcg_at_k(run: RankedList, qrels: Qrels, k: int) -> float:
    """Exponential-gain NDCG; 0.0 when the query has no relevant documents."""
    _check_k(k)
    judged = qrels.for_query(run.query_id)
    ideal = sorted((g for g in judged.values() if g > 0), reverse=True)[:k]
    idcg = sum(_gain(g) / math.log2(i + 2) for i, g in enumerate(ideal))
    if idcg == 0.0:
        return 0.0
    dcg = sum(_gain(judged.get(d, 0)) / math.log2(i + 2) for i, (d, _) in enumerate(run.items[:k]))
    return dcg / idcg


def recall_at_k(run: RankedList, qrels: Qrels, k: int) -> float:
    _check_k(k)
    relevant = qrels.relevant(run.query_id)
    if not relevant:
        return 0.0
    hits = sum(1 for d, _ in run.items[:k] if d in relevant)
    return hits / len(relevant)


METRICS = {"ndcg": ndcg_at_k, "recall": recall_at_k}


@dataclass
class EvalReport:
    """Per-query values and their macro average.

    Queries without any relevant document are listed in ``skipped`` and left
    out of the average.
    """

    metric: str
    k: int
    per_query: dict[str, float] = field(default_factory=dict)
    skipped: list[str] = field(default_factory=list)

    @property
    def mean(self) -> float:
        if not self.per_query:
            return 0.0
        return sum(self.per_query.values()) / len(self.per_query)

    @property
    def name(self) -> str:
        return f"{self.metric}@{self.k}"

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "k": self.k,
            "mean": self.mean,
            "n_queries": len(self.per_query),
            "skipped_no_relevant": list(self.skipped),
            "per_query": dict(sorted(self.per_query.items())),
        }


def evaluate(runs: Iterable[RankedList] | Mapping[str, RankedList], qrels: Qrels, metric: str = "ndcg",
             k: int = 5) -> EvalReport:
    if metric not in METRICS:
        raise InvalidParameter(f"unknown metric {metric!r}; expected one of {sorted(METRICS)}")
    fn = METRICS[metric]
    if isinstance(runs, Mapping):
        runs = runs.values()
    report = EvalReport(metric, k)
    for run in runs:
        if not qrels.relevant(run.query_id):
            report.skipped.append(run.query_id)
            continue
        report.per_query[run.query_id] = fn(run, qrels, k)
    return report
