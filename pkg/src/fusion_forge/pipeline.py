"""Config loading and per-query orchestration shared by the CLI commands.

Config file (JSON; relative paths resolve against the config's directory)::

    {
      "primary":       {"queries": "q1.jsonl", "documents": "d1.jsonl", "scorer": "maxsim"},
      "complementary": {"queries": "q2.jsonl", "documents": "d2.jsonl", "scorer": "cosine"},
      "method": "gqr",            # primary | complementary | rrf | avg_rank | minmax | softmax | gqr
      "k": 10, "kappa": 60, "alpha": 0.5,
      "gqr": {"iterations": 25, "step_size": 0.001, "loss": "kl_consensus",
              "pool_policy": "union", "extra_search": false,
              "beta1": 0.9, "beta2": 0.999, "eps": 1e-8},
      "swap_roles": false,
      "qrels": "qrels.txt",
      "grid": {"alphas": [...], "step_sizes": [...], "iteration_counts": [...]},
      "dev_fraction": 0.1, "seed": 0, "workers": 1,
      "out": "run.txt", "report": "report.json", "tag": "fusion_forge"
    }
"""

from __future__ import annotations

import json
import time
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .core import CorpusIndex, EmbeddingMatrix, Qrels, RankedList, Scorer
from .errors import InputError, InvalidParameter, IoError
from .fusion import DEFAULT_KAPPA, FusionWeights, Normalization, fuse_avg_rank, fuse_rrf, fuse_scores
from .gqr import GqrConfig, RetrieverPair, guided_query_refinement, swap_roles
from .io import load_embeddings, load_qrels
from .scoring import search_top_k
from .tune import TuningGrid

FUSION_METHODS = ("rrf", "avg_rank", "minmax", "softmax")
METHODS = ("primary", "complementary", *FUSION_METHODS, "gqr")


@dataclass(frozen=True)
class RetrieverSpec:
    queries: Path
    documents: Path
    scorer: Scorer

    @classmethod
    def from_dict(cls, raw: dict, base: Path, role: str) -> "RetrieverSpec":
        missing = {"queries", "documents", "scorer"} - set(raw)
        if missing:
            raise InputError(f"{role}: missing keys {sorted(missing)}")
        return cls(_resolve(raw["queries"], base), _resolve(raw["documents"], base), Scorer.parse(raw["scorer"]))

    def to_dict(self) -> dict:
        return {"queries": str(self.queries), "documents": str(self.documents), "scorer": self.scorer.value}


def _resolve(p, base: Path) -> Path:
    p = Path(p)
    return p if p.is_absolute() else base / p


@dataclass(frozen=True)
class PipelineConfig:
    primary: RetrieverSpec
    complementary: RetrieverSpec
    method: str = "rrf"
    k: int = 10
    kappa: float = DEFAULT_KAPPA
    alpha: float = 0.5
    gqr: GqrConfig = field(default_factory=GqrConfig)
    swap_roles: bool = False
    qrels: Path | None = None
    grid: TuningGrid = field(default_factory=TuningGrid)
    dev_fraction: float = 0.1
    seed: int = 0
    workers: int = 1
    out: Path | None = None
    report: Path | None = None
    tag: str = "fusion_forge"

    def __post_init__(self):
        if self.method not in METHODS:
            raise InputError(f"unknown method {self.method!r}; expected one of {', '.join(METHODS)}")
        if self.k < 1:
            raise InputError("k must be >= 1")
        if self.workers < 1:
            raise InputError("workers must be >= 1")
        if self.gqr.top_k != self.k:
            object.__setattr__(self, "gqr", self.gqr.with_(top_k=self.k))

    @classmethod
    def from_file(cls, path, **overrides) -> "PipelineConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise IoError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON: {exc.msg} (line {exc.lineno})") from None
        return cls.from_dict(raw, path.parent, **overrides)

    @classmethod
    def from_dict(cls, raw: dict, base: Path = Path("."), **overrides) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        for role in ("primary", "complementary"):
            if role not in raw:
                raise InputError(f"config needs a {role!r} retriever")
        kwargs = dict(raw)
        kwargs["primary"] = RetrieverSpec.from_dict(raw["primary"], base, "primary")
        kwargs["complementary"] = RetrieverSpec.from_dict(raw["complementary"], base, "complementary")
        try:
            if "gqr" in raw:
                kwargs["gqr"] = GqrConfig(**raw["gqr"])
            if "grid" in raw:
                kwargs["grid"] = TuningGrid(**raw["grid"])
        except (TypeError, ValueError) as exc:
            raise InputError(f"invalid config: {exc}") from None
        for key in ("qrels", "out", "report"):
            if raw.get(key) is not None:
                kwargs[key] = _resolve(raw[key], base)
        gqr_over = {k: overrides.pop(k) for k in list(overrides) if k.startswith("gqr_")}
        kwargs.update({k: v for k, v in overrides.items() if v is not None})
        for key in ("out", "report", "qrels"):
            if isinstance(kwargs.get(key), str):
                kwargs[key] = Path(kwargs[key])
        cfg = cls(**kwargs)
        gqr_changes = {k[4:]: v for k, v in gqr_over.items() if v is not None}
        if gqr_changes:
            cfg = replace(cfg, gqr=cfg.gqr.with_(**gqr_changes))
        return cfg

    def to_dict(self) -> dict:
        return {
            "primary": self.primary.to_dict(),
            "complementary": self.complementary.to_dict(),
            "method": self.method,
            "k": self.k,
            "kappa": self.kappa,
            "alpha": self.alpha,
            "gqr": {
                "iterations": self.gqr.iterations,
                "step_size": self.gqr.step_size,
                "loss": self.gqr.loss.value,
                "pool_policy": self.gqr.pool_policy.value,
                "extra_search": self.gqr.extra_search,
                "beta1": self.gqr.beta1,
                "beta2": self.gqr.beta2,
                "eps": self.gqr.eps,
            },
            "swap_roles": self.swap_roles,
            "seed": self.seed,
        }


class Engine:
    """Loaded retriever pair plus per-query method dispatch.

    Top-K lists are cached per query id, so tuning sweeps search each query
    only once per retriever.
    """

    def __init__(self, pair: RetrieverPair, k: int = 10, kappa: float = DEFAULT_KAPPA):
        self.pair = pair
        self.k = k
        self.kappa = kappa
        common = set(pair.primary_queries) & set(pair.complementary_queries)
        self.query_ids = sorted(common)
        self._lists: dict[str, tuple[RankedList, RankedList]] = {}

    @classmethod
    def from_config(cls, cfg: PipelineConfig) -> "Engine":
        pair = RetrieverPair(
            primary_index=_load_index(cfg.primary),
            complementary_index=_load_index(cfg.complementary),
            primary_queries=_load_queries(cfg.primary),
            complementary_queries=_load_queries(cfg.complementary),
        )
        if cfg.swap_roles:
            pair = swap_roles(pair)
        return cls(pair, cfg.k, cfg.kappa)

    def queries(self, qid: str) -> tuple[EmbeddingMatrix, EmbeddingMatrix]:
        return self.pair.primary_queries[qid], self.pair.complementary_queries[qid]

    def lists(self, qid: str) -> tuple[RankedList, RankedList]:
        cached = self._lists.get(qid)
        if cached is None:
            q1, q2 = self.queries(qid)
            cached = (
                search_top_k(q1, self.pair.primary_index, self.k, qid),
                search_top_k(q2, self.pair.complementary_index, self.k, qid),
            )
            self._lists[qid] = cached
        return cached

    def fuse(self, method: str, lists: tuple[RankedList, RankedList], alpha: float = 0.5) -> RankedList:
        w = FusionWeights(alpha)
        if method == "primary":
            return lists[0]
        if method == "complementary":
            return lists[1]
        if method == "rrf":
            return fuse_rrf(lists, self.kappa, self.k, w)
        if method == "avg_rank":
            return fuse_avg_rank(lists, self.k, w)
        if method in ("minmax", "softmax"):
            return fuse_scores(lists, Normalization(method), self.k, w)
        raise InvalidParameter(f"{method!r} is not a list fusion method")

    def run(self, qid: str, method: str, alpha: float = 0.5, gqr: GqrConfig | None = None) -> RankedList:
        lists = self.lists(qid)
        if method != "gqr":
            return self.fuse(method, lists, alpha)
        q1, q2 = self.queries(qid)
        cfg = (gqr or GqrConfig(top_k=self.k)).with_(top_k=self.k)
        return guided_query_refinement(
            q1, q2, self.pair.primary_index, self.pair.complementary_index, cfg, qid, lists=lists
        )

    def run_many(self, qids: Sequence[str], method: str, alpha: float = 0.5, gqr: GqrConfig | None = None,
                 workers: int = 1) -> tuple[list[RankedList], dict[str, float]]:
        """Run every query; output is sorted by query id whatever the worker count."""
        for qid in qids:
            self.lists(qid)

        def one(qid: str) -> tuple[str, RankedList, float]:
            t0 = time.perf_counter()
            out = self.run(qid, method, alpha, gqr)
            return qid, out, (time.perf_counter() - t0) * 1e3

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(one, qids))
        else:
            results = [one(qid) for qid in qids]
        results.sort(key=lambda r: r[0])
        return [r[1] for r in results], {r[0]: r[2] for r in results}


def _check_exists(path: Path) -> None:
    if not path.exists():
        raise IoError(f"file not found: {path}")


def _load_index(retriever: RetrieverSpec) -> CorpusIndex:
    _check_exists(retriever.documents)
    return load_embeddings(retriever.documents, "document", retriever.scorer)


def _load_queries(retriever: RetrieverSpec) -> dict[str, EmbeddingMatrix]:
    _check_exists(retriever.queries)
    return load_embeddings(retriever.queries, "query")


def load_config_qrels(cfg: PipelineConfig) -> Qrels:
    if cfg.qrels is None:
        raise InputError("config has no qrels path")
    _check_exists(cfg.qrels)
    return load_qrels(cfg.qrels)


def guarded(fn: Callable, allowed: Sequence[str], reads: list | None = None) -> Callable:
    """Wrap a per-query callable so it refuses query ids outside ``allowed``."""
    allowed_set = frozenset(allowed)

    def wrapper(qid, *args, **kwargs):
        if qid not in allowed_set:
            raise AssertionError(f"tuning tried to read held-out query {qid!r}")
        if reads is not None:
            reads.append(qid)
        return fn(qid, *args, **kwargs)

    return wrapper
