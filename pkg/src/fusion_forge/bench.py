"""Desk-scale latency measurements of the fusion stage.

Only the work after both retrievers have produced their top-K lists is
timed: list fusion for the rank/score hybrids, and pool scoring plus the
refinement loop plus re-scoring for GQR. Each sample is the mean per-query
latency over one pass through all queries.
"""

from __future__ import annotations

import os
import platform
import time
from collections.abc import Callable, Sequence

import numpy as np

from . import kernels
from .core import CorpusIndex, EmbeddingMatrix, Scorer, union_pool
from .gqr import GqrConfig, RetrieverPair, _kind, _packed
from .pipeline import FUSION_METHODS, Engine
from .scoring import score_pool, softmax_distribution


def synthetic_engine(n_docs: int = 200, dim: int = 128, n_queries: int = 20, k: int = 10, seed: int = 0) -> Engine:
    """Two single-vector cosine retrievers over the same random corpus."""
    rng = np.random.default_rng(seed)
    ids = [f"doc{i:04d}" for i in range(n_docs)]
    d1 = rng.normal(size=(n_docs, dim))
    d2 = d1 + rng.normal(scale=1.0, size=(n_docs, dim))
    q1 = {f"q{j:03d}": EmbeddingMatrix(d1[rng.integers(n_docs)] + rng.normal(size=dim)) for j in range(n_queries)}
    q2 = {qid: EmbeddingMatrix(q.vectors + rng.normal(scale=0.5, size=(1, dim))) for qid, q in q1.items()}
    pair = RetrieverPair(
        CorpusIndex(zip(ids, d1[:, None, :]), Scorer.COSINE),
        CorpusIndex(zip(ids, d2[:, None, :]), Scorer.COSINE),
        q1,
        q2,
    )
    return Engine(pair, k=k)


def summarize(samples_ms: Sequence[float]) -> dict:
    arr = np.asarray(samples_ms, dtype=np.float64)
    return {
        "n": int(arr.size),
        "mean_ms": float(arr.mean()),
        "median_ms": float(np.median(arr)),
        "p95_ms": float(np.percentile(arr, 95)),
        "std_ms": float(arr.std(ddof=1)) if arr.size > 1 else 0.0,
    }


def _time_samples(fn: Callable[[str], object], qids: Sequence[str], repetitions: int, warmup: int) -> list[float]:
    for _ in range(warmup):
        for qid in qids:
            fn(qid)
    samples = []
    for _ in range(repetitions):
        t0 = time.perf_counter()
        for qid in qids:
            fn(qid)
        samples.append((time.perf_counter() - t0) * 1e3 / len(qids))
    return samples


def machine_info() -> dict:
    return {
        "platform": platform.platform(),
        "processor": platform.processor() or platform.machine(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "cpu_count": os.cpu_count(),
        "kernel_backend": kernels.BACKEND_NAME,
    }


def bench_methods(engine: Engine, repetitions: int = 100, warmup: int = 3, base: GqrConfig | None = None,
                  iteration_counts: Sequence[int] = (10, 50)) -> dict:
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    qids = engine.query_ids
    for qid in qids:
        engine.lists(qid)
    base = (base or GqrConfig(step_size=1e-3)).with_(top_k=engine.k)
    out = {}
    for method in FUSION_METHODS:
        out[method] = summarize(_time_samples(lambda q, m=method: engine.run(q, m), qids, repetitions, warmup))
    for t in iteration_counts:
        cfg = base.with_(iterations=t)
        out[f"gqr_T{t}"] = summarize(_time_samples(lambda q, c=cfg: engine.run(q, "gqr", gqr=c), qids, repetitions, warmup))
    return out


def bench_kernels(engine: Engine, repetitions: int = 100, warmup: int = 3, iterations: int = 50,
                  step_size: float = 1e-3) -> dict:
    """Time the refinement loop alone under every available kernel backend."""
    pair = engine.pair
    prepared = {}
    for qid in engine.query_ids:
        first, second = engine.lists(qid)
        pool = union_pool([first, second])
        q1, q2 = engine.queries(qid)
        p2 = softmax_distribution(score_pool(q2, pool, pair.complementary_index), pool)
        prepared[qid] = (q1.vectors, *_packed(pool, pair.primary_index), p2.log_probs)
    kind = _kind(pair.primary_index)
    out = {}
    for name, mod in kernels.available_backends().items():
        def fn(qid, mod=mod):
            Z, tokens, offsets, norms, lp2 = prepared[qid]
            mod.refine(kind, Z, tokens, offsets, norms, lp2, kernels.KL_CONSENSUS, iterations, step_size,
                       0.9, 0.999, 1e-8)
        out[name] = summarize(_time_samples(fn, engine.query_ids, repetitions, warmup))
    if "cython" in out and "numpy" in out:
        out["speedup_cython_vs_numpy"] = out["numpy"]["mean_ms"] / out["cython"]["mean_ms"]
    return out


def run_bench(engine: Engine, repetitions: int = 100, warmup: int = 3, base: GqrConfig | None = None) -> dict:
    methods = bench_methods(engine, repetitions, warmup, base)
    ordering_ok = methods["gqr_T50"]["mean_ms"] > methods["gqr_T10"]["mean_ms"] > methods["rrf"]["mean_ms"]
    pools = [len(set(a.doc_ids) | set(b.doc_ids)) for a, b in (engine.lists(q) for q in engine.query_ids)]
    return {
        "machine": machine_info(),
        "fixture": {
            "n_queries": len(engine.query_ids),
            "n_docs": len(engine.pair.primary_index),
            "dim": engine.pair.primary_index.dim,
            "scorer": engine.pair.primary_index.scorer.value,
            "k": engine.k,
            "max_pool": max(pools) if pools else 0,
        },
        "repetitions": repetitions,
        "warmup": warmup,
        "sample": "mean per-query latency of one pass over all queries",
        "methods": methods,
        "ordering_gqr50_gt_gqr10_gt_rrf": ordering_ok,
        "kernels": bench_kernels(engine, repetitions, warmup),
    }
