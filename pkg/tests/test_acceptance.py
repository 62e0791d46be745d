"""Acceptance suite: one check per headline criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v -s`` or ``python tests/test_acceptance.py``.
"""

import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import oracles  # noqa: E402
from conftest import FIXTURES, random_index  # noqa: E402
from fusion_forge.core import CandidatePool, EmbeddingMatrix, Qrels, build_ranked_list  # noqa: E402
from fusion_forge.bench import bench_methods, synthetic_engine  # noqa: E402
from fusion_forge.evaluation import evaluate, ndcg_at_k, recall_at_k  # noqa: E402
from fusion_forge.fusion import FusionWeights, fuse_avg_rank, fuse_rrf, fuse_scores  # noqa: E402
from fusion_forge.gqr import GqrConfig, guided_query_refinement, js_divergence, kl_divergence  # noqa: E402
from fusion_forge.gradcheck import run_checks  # noqa: E402
from fusion_forge.pipeline import Engine, PipelineConfig, guarded, load_config_qrels  # noqa: E402
from fusion_forge.scoring import search_top_k, softmax_distribution  # noqa: E402
from fusion_forge.tune import TuningGrid, split_dev, tune_gqr  # noqa: E402

_CAPTURE = []


@pytest.fixture(autouse=True)
def _uncaptured(capsys):
    _CAPTURE[:] = [capsys]
    yield


def report(n, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}"
    with _CAPTURE[0].disabled():
        print("\n" + line, flush=True)
    assert ok, line


def test_criterion_1_gradients():
    t0 = time.perf_counter()
    checks = run_checks(240, seed=0)
    elapsed = time.perf_counter() - t0
    worst = max(c.max_rel_error for c in checks)
    worst_abs = max(c.max_abs_error_small for c in checks)
    combos = {(c.scorer, c.loss) for c in checks}
    ok = all(c.passed(1e-4) for c in checks) and elapsed < 60 and len(combos) == 6
    report(1, ok, f"{len(checks)} instances, {len(combos)} scorer/loss combos, max rel err {worst:.2e}, "
                  f"max small-coord abs err {worst_abs:.1e}, {elapsed:.1f}s")


def test_criterion_2_fixed_point():
    t0 = time.perf_counter()
    bad = 0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        scorer = "cosine" if seed % 2 == 0 else "maxsim"
        dim = int(rng.integers(8, 65))
        index = random_index(rng, int(rng.integers(30, 300)), dim, scorer)
        q = EmbeddingMatrix(rng.normal(size=(1 if scorer == "cosine" else 4, dim)))
        cfg = GqrConfig(iterations=50, step_size=float(rng.choice([1e-3, 1e-2, 0.1])))
        if guided_query_refinement(q, q, index, index, cfg) != search_top_k(q, index, 10):
            bad += 1
    elapsed = time.perf_counter() - t0
    report(2, bad == 0 and elapsed < 10, f"50 corpora, {bad} mismatches, {elapsed:.2f}s")


def _fusion_instance(rng):
    docs = [f"d{i:03d}" for i in range(int(rng.integers(5, 40)))]
    lists = []
    for _ in range(2):
        n = int(rng.integers(1, min(10, len(docs)) + 1))
        chosen = rng.choice(docs, size=n, replace=False)
        scale = float(rng.choice([0.1, 1.0, 10.0]))
        vals = rng.normal(size=n) * scale
        if rng.random() < 0.2:
            vals = np.round(vals, 1)
        lists.append(build_ranked_list("q", zip(map(str, chosen), map(float, vals))))
    return lists


def test_criterion_3_fusion_oracle():
    bad = 0
    for seed in range(500):
        rng = np.random.default_rng(seed)
        l1, l2 = _fusion_instance(rng)
        alpha = float(rng.choice([0.5, 0.0, 1.0, rng.random()]))
        kappa = 60.0 if seed % 5 else float(rng.integers(1, 200))
        w = FusionWeights(alpha)
        pairs = [
            (fuse_rrf([l1, l2], kappa, 10, w), oracles.rrf(l1.items, l2.items, kappa, 10, alpha)),
            (fuse_avg_rank([l1, l2], 10, w), oracles.avg_rank(l1.items, l2.items, 10, alpha)),
            (fuse_scores([l1, l2], "minmax", 10, w), oracles.score_fusion(l1.items, l2.items, "minmax", 10, alpha)),
            (fuse_scores([l1, l2], "softmax", 10, w), oracles.score_fusion(l1.items, l2.items, "softmax", 10, alpha)),
        ]
        for got, want in pairs:
            if got.doc_ids != [d for d, _ in want] or any(
                abs(a - b) > 1e-9 for a, b in zip(got.scores, [s for _, s in want])
            ):
                bad += 1
    a = build_ranked_list("q", [("x", 1.0)])
    b = build_ranked_list("q", [("y", 1.0)])
    anchor = dict(fuse_rrf([a, b], k=10).items)["x"]
    anchor_ok = abs(anchor - (1 / 61 + 1 / 71)) < 1e-15
    report(3, bad == 0 and anchor_ok, f"500 instances x 4 methods, {bad} mismatches; "
                                      f"kappa=60 / absent rank K+1 anchor {'ok' if anchor_ok else 'wrong'}")


def test_criterion_4_metric_oracle():
    bad = 0
    for seed in range(200):
        rng = np.random.default_rng(10_000 + seed)
        docs = [f"d{i}" for i in range(int(rng.integers(3, 30)))]
        ranked = [str(d) for d in rng.permutation(docs)[: int(rng.integers(1, len(docs) + 1))]]
        grades = {d: int(rng.integers(0, 4)) for d in docs if rng.random() < 0.4}
        qrels = Qrels.from_pairs([("q", d, g) for d, g in grades.items()] or [("z", "z", 1)])
        run = build_ranked_list("q", [(d, float(len(ranked) - i)) for i, d in enumerate(ranked)])
        if ndcg_at_k(run, qrels, 5) != pytest.approx(oracles.ndcg(ranked, grades, 5), abs=1e-12):
            bad += 1
        if recall_at_k(run, qrels, 10) != pytest.approx(oracles.recall(ranked, grades, 10), abs=1e-12):
            bad += 1
    anchor = ndcg_at_k(build_ranked_list("q", [("a", 2.0), ("b", 1.0)]), Qrels.from_pairs([("q", "b", 1)]), 5)
    anchor_ok = abs(anchor - 1 / math.log2(3)) <= 1e-9
    report(4, bad == 0 and anchor_ok, f"200 instances, {bad} mismatches; rank-2 anchor {anchor:.5f}")


def test_criterion_5_improvement_fixture():
    cfg = PipelineConfig.from_file(FIXTURES / "pair" / "config.json")
    qrels = load_config_qrels(cfg)
    engine = Engine.from_config(cfg)
    dev, test = split_dev(engine.query_ids, cfg.dev_fraction, cfg.seed)
    res = tune_gqr(lambda q, c: engine.run(q, "gqr", gqr=c), dev, TuningGrid(), qrels, GqrConfig(top_k=cfg.k))
    step, iterations = res.best
    tuned = GqrConfig(top_k=cfg.k, step_size=step, iterations=iterations)
    gqr = evaluate([engine.run(q, "gqr", gqr=tuned) for q in test], qrels, "ndcg", 5).mean
    primary = evaluate([engine.run(q, "primary") for q in test], qrels, "ndcg", 5).mean
    rrf = evaluate([engine.run(q, "rrf") for q in test], qrels, "ndcg", 5).mean
    # committed margins: 0.9733 vs 0.1008 vs 0.4996 on the 54 test queries
    ok = gqr > primary and gqr > rrf and gqr - rrf > 0.3
    report(5, ok, f"tuned step={step:g} T={iterations}; test NDCG@5 gqr {gqr:.4f}, primary {primary:.4f}, "
                  f"rrf {rrf:.4f} ({len(test)} test queries)")


def test_criterion_6_distribution_invariants():
    bad = []
    for seed in range(300):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 50))
        pool = CandidatePool("q", tuple(f"d{i}" for i in range(n)))
        s = rng.normal(size=n) * float(rng.choice([0.1, 1.0, 10.0]))
        p = softmax_distribution(s, pool)
        shifted = softmax_distribution(s + float(rng.normal() * 100), pool)
        q = softmax_distribution(rng.normal(size=n) * 3, pool)
        kl_pq, kl_pp = kl_divergence(p, q), kl_divergence(p, p)
        js_pq, js_qp = js_divergence(p, q), js_divergence(q, p)
        checks = {
            "sum": abs(p.probs.sum() - 1) <= 1e-9,
            "shift": np.allclose(p.probs, shifted.probs, atol=1e-12, rtol=0),
            "kl_nonneg": kl_pq >= 0,
            "kl_zero": abs(kl_pp) <= 1e-12,
            "kl_pos": kl_pq > 1e-12 or np.allclose(p.probs, q.probs, atol=1e-12),
            "js_sym": abs(js_pq - js_qp) <= 1e-12,
            "js_bound": -1e-15 <= js_pq <= math.log(2),
        }
        bad += [f"{seed}:{k}" for k, v in checks.items() if not v]
    report(6, not bad, f"300 random instances x 7 properties, {len(bad)} violations")


def test_criterion_7_latency():
    engine = synthetic_engine(n_docs=200, dim=128, n_queries=20, k=10, seed=0)
    pools = [len(set(a.doc_ids) | set(b.doc_ids)) for a, b in (engine.lists(q) for q in engine.query_ids)]
    m = bench_methods(engine, repetitions=100, warmup=3)
    t50, t10, rrf = m["gqr_T50"]["mean_ms"], m["gqr_T10"]["mean_ms"], m["rrf"]["mean_ms"]
    ok = max(pools) <= 20 and t50 < 50 and t50 > t10 > rrf
    report(7, ok, f"max pool {max(pools)}; mean ms: gqr T50 {t50:.3f}, gqr T10 {t10:.3f}, rrf {rrf:.4f}")


def test_criterion_8_tuning_protocol():
    cfg = PipelineConfig.from_file(FIXTURES / "pair" / "config.json")
    qrels = load_config_qrels(cfg)
    engine = Engine.from_config(cfg)
    dev, test = split_dev(engine.query_ids, cfg.dev_fraction, cfg.seed)
    reads = []
    grid = TuningGrid(step_sizes=(1e-4, 1e-3, 5e-3), iteration_counts=(10, 25))
    base = GqrConfig(top_k=cfg.k)
    res = tune_gqr(guarded(lambda q, c: engine.run(q, "gqr", gqr=c), dev, reads), dev, grid, qrels, base)
    rescored = {
        (s, t): evaluate([engine.run(q, "gqr", gqr=base.with_(step_size=s, iterations=t)) for q in dev],
                         qrels, "ndcg", 5).mean
        for s in grid.step_sizes for t in grid.iteration_counts
    }
    attains_max = res.best_score == max(rescored.values()) and rescored[res.best] == res.best_score
    covered = set(res.scores) == set(rescored)
    no_leak = bool(reads) and not set(reads) & set(test)
    try:
        guarded(lambda q: q, dev)(test[0])
        guard_fires = False
    except AssertionError:
        guard_fires = True
    ok = attains_max and covered and no_leak and guard_fires
    report(8, ok, f"{len(rescored)} grid points re-evaluated, best {res.best} = max {max(rescored.values()):.4f}; "
                  f"{len(set(reads))} dev queries read, 0 test queries read, guard {'armed' if guard_fires else 'OFF'}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
