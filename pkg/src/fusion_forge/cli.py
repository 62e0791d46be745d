"""Command-line entry point: run, tune, eval, bench, check-grad.

Exit codes: 0 success, 1 check failure, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__, kernels
from .errors import FusionForgeError
from .evaluation import evaluate
from .io import load_qrels, load_run, write_run
from .pipeline import FUSION_METHODS, METHODS, Engine, PipelineConfig, guarded, load_config_qrels
from .tune import split_dev, tune_gqr, tune_weight

log = logging.getLogger("fusion_forge")

EXIT_OK, EXIT_CHECK_FAILED, EXIT_INPUT = 0, 1, 2


def _write_json(path: Path | None, payload: dict) -> None:
    text = json.dumps(payload, indent=2, sort_keys=False) + "\n"
    if path is None:
        sys.stdout.write(text)
        return
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text, encoding="utf-8")


def _report_path(cfg: PipelineConfig, suffix: str) -> Path | None:
    if cfg.report is not None:
        return cfg.report
    if cfg.out is not None:
        return cfg.out.with_name(cfg.out.name + suffix)
    return None


def _config(args) -> PipelineConfig:
    return PipelineConfig.from_file(
        args.config,
        method=getattr(args, "method", None),
        k=getattr(args, "k", None),
        seed=getattr(args, "seed", None),
        workers=getattr(args, "workers", None),
        out=getattr(args, "out", None),
        report=getattr(args, "report", None),
    )


def cmd_run(args) -> int:
    cfg = _config(args)
    engine = Engine.from_config(cfg)
    runs, timings = engine.run_many(engine.query_ids, cfg.method, cfg.alpha, cfg.gqr, cfg.workers)
    if cfg.out is not None:
        cfg.out.parent.mkdir(parents=True, exist_ok=True)
        write_run(cfg.out, runs, cfg.tag)
    else:
        for run in runs:
            for rank, (doc_id, score) in enumerate(run.items, start=1):
                print(f"{run.query_id} Q0 {doc_id} {rank} {score:.6f} {cfg.tag}")
    report = {
        "command": "run",
        "method": cfg.method,
        "params": cfg.to_dict(),
        "kernel_backend": kernels.BACKEND_NAME,
        "n_queries": len(runs),
        "run_file": str(cfg.out) if cfg.out else None,
        "timings_ms": timings,
    }
    if cfg.qrels is not None:
        qrels = load_config_qrels(cfg)
        report["metrics"] = {
            "ndcg@5": evaluate(runs, qrels, "ndcg", 5).mean,
            "recall@10": evaluate(runs, qrels, "recall", 10).mean,
        }
    path = _report_path(cfg, ".report.json")
    if path is not None:
        _write_json(path, report)
    log.info("ran %s over %d queries", cfg.method, len(runs))
    return EXIT_OK


def cmd_tune(args) -> int:
    cfg = _config(args)
    qrels = load_config_qrels(cfg)
    engine = Engine.from_config(cfg)
    judged = set(qrels.grades)
    qids = [q for q in engine.query_ids if q in judged]
    dev, test = split_dev(qids, cfg.dev_fraction, cfg.seed)
    reads: list[str] = []
    if cfg.method == "gqr":
        runner = guarded(lambda qid, c: engine.run(qid, "gqr", gqr=c), dev, reads)
        result = tune_gqr(runner, dev, cfg.grid, qrels, cfg.gqr)
        step, iterations = result.best
        selected = {"step_size": step, "iterations": iterations}
        tuned = cfg.gqr.with_(step_size=step, iterations=iterations)
        test_runs = [engine.run(q, "gqr", gqr=tuned) for q in test]
        grid = [{"step_size": s, "iterations": t, "dev_ndcg@5": v} for (s, t), v in result.scores.items()]
    elif cfg.method in FUSION_METHODS:
        runner = guarded(lambda qid, a: engine.run(qid, cfg.method, alpha=a), dev, reads)
        result = tune_weight(runner, dev, cfg.grid.alphas, qrels)
        selected = {"alpha": result.best}
        test_runs = [engine.run(q, cfg.method, alpha=result.best) for q in test]
        grid = [{"alpha": a, "dev_ndcg@5": v} for a, v in result.scores.items()]
    else:
        raise FusionForgeError(f"method {cfg.method!r} has nothing to tune")
    assert not set(reads) & set(test), "tuning read a test query"
    report = {
        "command": "tune",
        "method": cfg.method,
        "seed": cfg.seed,
        "dev_fraction": cfg.dev_fraction,
        "dev_queries": list(dev),
        "n_test_queries": len(test),
        "selected": selected,
        "dev_ndcg@5": result.best_score,
        "grid": grid,
        "test_ndcg@5": evaluate(test_runs, qrels, "ndcg", 5).mean,
        "test_baselines_ndcg@5": {
            m: evaluate([engine.run(q, m) for q in test], qrels, "ndcg", 5).mean
            for m in ("primary", "complementary", "rrf")
        },
    }
    _write_json(cfg.report or cfg.out, report)
    return EXIT_OK


def cmd_eval(args) -> int:
    runs = load_run(args.run)
    qrels = load_qrels(args.qrels)
    metrics = ["ndcg", "recall"] if args.metric == "all" else [args.metric]
    reports = {}
    for metric in metrics:
        k = args.k if args.k is not None else (5 if metric == "ndcg" else 10)
        rep = evaluate(runs, qrels, metric, k)
        reports[rep.name] = rep.to_dict()
        print(f"{rep.name}\t{rep.mean:.6f}\t({len(rep.per_query)} queries)", file=sys.stderr)
    _write_json(args.out, {"command": "eval", "run": str(args.run), "qrels": str(args.qrels), "metrics": reports})
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench import run_bench, synthetic_engine

    if args.repetitions < 1:
        raise FusionForgeError("--repetitions must be >= 1")
    if args.config is not None:
        cfg = _config(args)
        engine = Engine.from_config(cfg)
        base = cfg.gqr
    else:
        engine = synthetic_engine(seed=args.seed if args.seed is not None else 0,
                                  k=args.k if args.k is not None else 10)
        base = None
    report = run_bench(engine, args.repetitions, args.warmup, base)
    _write_json(args.out, report)
    return EXIT_OK


def cmd_check_grad(args) -> int:
    from .gradcheck import run_checks

    if args.instances < 1:
        raise FusionForgeError("--instances must be >= 1")
    seed = args.seed if args.seed is not None else 0
    checks = run_checks(args.instances, seed, corrupt=args.corrupt_gradient)
    failed = [c for c in checks if not c.passed(args.tolerance)]
    worst = max(checks, key=lambda c: c.max_rel_error)
    report = {
        "command": "check-grad",
        "instances": args.instances,
        "seed": seed,
        "tolerance": args.tolerance,
        "passed": not failed,
        "worst": worst.to_dict(),
        "results": [c.to_dict() for c in checks],
    }
    _write_json(args.out, report)
    if failed:
        bad = max(failed, key=lambda c: c.max_rel_error)
        print(f"gradient check FAILED on {len(failed)}/{len(checks)} instances; worst seed {bad.seed} "
              f"(rel err {bad.max_rel_error:.3e})", file=sys.stderr)
        return EXIT_CHECK_FAILED
    print(f"gradient check passed: {len(checks)} instances, max rel err {worst.max_rel_error:.3e}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fusion-forge", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", type=Path, required=config_required, help="pipeline JSON config")
        p.add_argument("--k", type=int, help="list length K")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", type=Path, help="output path")

    p = sub.add_parser("run", help="run one method over every query and write a TREC run")
    common(p)
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--workers", type=int)
    p.add_argument("--report", type=Path, help="JSON report path (default: <out>.report.json)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("tune", help="grid-search weights or GQR settings on a dev split")
    common(p)
    p.add_argument("--method", choices=[*FUSION_METHODS, "gqr"])
    p.add_argument("--workers", type=int)
    p.add_argument("--report", type=Path)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("eval", help="NDCG@k / Recall@k of a run file")
    p.add_argument("--run", type=Path, required=True)
    p.add_argument("--qrels", type=Path, required=True)
    p.add_argument("--metric", choices=["ndcg", "recall", "all"], default="all")
    p.add_argument("--k", type=int, help="cutoff (default 5 for ndcg, 10 for recall)")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="fusion-stage latency microbenchmark")
    common(p, config_required=False)
    p.add_argument("--repetitions", type=int, default=100)
    p.add_argument("--warmup", type=int, default=3)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("check-grad", help="compare analytic and finite-difference gradients")
    p.add_argument("--config", type=Path, help="accepted for symmetry; instances are synthetic")
    p.add_argument("--instances", type=int, default=50)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path)
    p.add_argument("--corrupt-gradient", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_check_grad)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=os.environ.get("FUSION_FORGE_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FusionForgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
