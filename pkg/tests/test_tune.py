import pytest

from fusion_forge.core import Qrels, build_ranked_list
from fusion_forge.errors import InvalidParameter, TooFewQueries
from fusion_forge.fusion import FusionWeights, fuse_rrf
from fusion_forge.gqr import GqrConfig
from fusion_forge.pipeline import Engine, PipelineConfig, guarded, load_config_qrels
from fusion_forge.tune import DevQueries, TestQueries, TuningGrid, split_dev, tune_gqr, tune_weight

QIDS = [f"q{i:02d}" for i in range(20)]


def ranked(qid, docs):
    return build_ranked_list(qid, [(d, float(len(docs) - i)) for i, d in enumerate(docs)])


def test_split_sizes_and_disjointness():
    dev, test = split_dev(QIDS, 0.1, seed=0)
    assert len(dev) == 2 and len(test) == 18
    assert set(dev).isdisjoint(test) and set(dev) | set(test) == set(QIDS)
    assert isinstance(dev, DevQueries) and isinstance(test, TestQueries)


def test_split_is_seeded_and_order_free():
    assert split_dev(QIDS, 0.25, 3) == split_dev(list(reversed(QIDS)), 0.25, 3)
    assert split_dev(QIDS, 0.25, 3) != split_dev(QIDS, 0.25, 4)


def test_split_edge_cases():
    assert len(split_dev(QIDS[:3], 0.01, 0)[0]) == 1
    assert len(split_dev(QIDS[:3], 0.99, 0)[1]) == 1
    with pytest.raises(TooFewQueries):
        split_dev(["only"], 0.5)
    with pytest.raises(InvalidParameter):
        split_dev(QIDS, 1.0)


def _adversarial(qid):
    # gold tops retriever 1 but is missing from retriever 2, whose top hit is retriever 1's runner-up
    l1 = ranked(qid, [f"{qid}-gold", f"{qid}-x"] + [f"{qid}-a{i}" for i in range(8)])
    l2 = ranked(qid, [f"{qid}-x"] + [f"{qid}-b{i}" for i in range(9)])
    return l1, l2


def test_weight_tuning_picks_the_only_winning_alpha():
    dev = DevQueries(["q1", "q2", "q3"])
    qrels = Qrels.from_pairs([(q, f"{q}-gold", 1) for q in dev])
    res = tune_weight(lambda q, a: fuse_rrf(_adversarial(q), 60, 10, FusionWeights(a)), dev,
                      [round(0.1 * i, 1) for i in range(1, 10)], qrels)
    assert res.best == 0.9
    assert res.best_score == 1.0
    assert all(v < 1.0 for a, v in res.scores.items() if a != 0.9)


def test_weight_ties_prefer_half():
    dev = DevQueries(["q1"])
    qrels = Qrels.from_pairs([("q1", "g", 1)])
    res = tune_weight(lambda q, a: ranked(q, ["g"]), dev, [0.1, 0.3, 0.5, 0.7], qrels)
    assert res.best == 0.5
    res = tune_weight(lambda q, a: ranked(q, ["g"]), dev, [0.3, 0.7], qrels)
    assert res.best == 0.3
    assert tune_weight(lambda q, a: ranked(q, ["g"]), dev, [0.2], qrels).best == 0.2


def test_tuning_refuses_anything_but_dev():
    _, test = split_dev(QIDS, 0.1)
    qrels = Qrels.from_pairs([("q00", "g", 1)])
    with pytest.raises(TypeError):
        tune_weight(lambda q, a: ranked(q, ["g"]), test, [0.5], qrels)
    with pytest.raises(TypeError):
        tune_gqr(lambda q, c: ranked(q, ["g"]), list(QIDS), TuningGrid(), qrels)


def test_gqr_grid_is_exhaustive_and_ties_prefer_cheap_settings():
    dev = DevQueries(["q1", "q2"])
    qrels = Qrels.from_pairs([("q1", "g", 1), ("q2", "g", 1)])
    seen = []

    def runner(qid, cfg):
        seen.append((qid, cfg.step_size, cfg.iterations))
        return ranked(qid, ["g"])

    grid = TuningGrid(step_sizes=(1e-3, 1e-4), iteration_counts=(50, 10))
    res = tune_gqr(runner, dev, grid, qrels)
    assert len(seen) == 8 and len(set(seen)) == 8
    assert res.best == (1e-4, 10)


def test_gqr_single_point_grid():
    dev = DevQueries(["q1"])
    qrels = Qrels.from_pairs([("q1", "g", 1)])
    res = tune_gqr(lambda q, c: ranked(q, ["g"]), dev, TuningGrid(step_sizes=(0.01,), iteration_counts=(7,)), qrels)
    assert res.best == (0.01, 7) and list(res.scores) == [(0.01, 7)]


def test_gqr_tuning_on_fixture_prefers_more_iterations(pair_dir):
    cfg = PipelineConfig.from_file(pair_dir / "config.json")
    qrels = load_config_qrels(cfg)
    engine = Engine.from_config(cfg)
    dev, test = split_dev(engine.query_ids, cfg.dev_fraction, cfg.seed)
    reads = []
    runner = guarded(lambda q, c: engine.run(q, "gqr", gqr=c), dev, reads)
    res = tune_gqr(runner, dev, TuningGrid(step_sizes=(1e-3,), iteration_counts=(10, 25, 50)), qrels,
                   GqrConfig(top_k=10))
    assert res.best == (1e-3, 50)
    assert res.scores[(1e-3, 10)] < res.scores[(1e-3, 25)] < res.scores[(1e-3, 50)]
    assert set(reads) == set(dev) and not set(reads) & set(test)


def test_guard_rejects_held_out_queries():
    fn = guarded(lambda q: q, ["a"])
    assert fn("a") == "a"
    with pytest.raises(AssertionError):
        fn("b")


def test_grid_validation():
    with pytest.raises(InvalidParameter):
        TuningGrid(alphas=())
    with pytest.raises(InvalidParameter):
        TuningGrid(alphas=(1.5,))
    with pytest.raises(InvalidParameter):
        TuningGrid(step_sizes=(0.0,))
