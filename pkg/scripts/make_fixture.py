"""Generate the synthetic two-retriever fixture under tests/fixtures/pair/.

Primary retriever: single-vector cosine. Complementary retriever: multi-vector
MaxSim. For every query the primary ranks its gold document(s) at 5-8 behind
distractors; the complementary retriever ranks the gold at 1-2 and the
primary's top distractors right behind it, so reciprocal rank fusion keeps
favouring the distractors.

    python scripts/make_fixture.py [--out tests/fixtures/pair] [--seed 7]
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

import numpy as np

N_QUERIES = 60
N_BACKGROUND = 120
DIM_PRIMARY = 32
DIM_COMP = 16
COMP_QUERY_TOKENS = 4


def _unit(v):
    return v / np.linalg.norm(v)


def _with_cosine(rng, u, c):
    w = rng.normal(size=u.shape)
    w = _unit(w - (w @ u) * u)
    return c * u + np.sqrt(1.0 - c * c) * w


def _comp_doc(rng, q_hat, target, n_extra):
    # each query token finds a doc token scoring target / n_tokens; extra tokens are weaker
    r = q_hat.shape[0]
    toks = [q_hat[k] * (target / r) + rng.normal(scale=0.01, size=q_hat.shape[1]) for k in range(r)]
    toks += [rng.normal(scale=0.05, size=q_hat.shape[1]) for _ in range(n_extra)]
    return np.array(toks)


def build(seed: int):
    rng = np.random.default_rng(seed)
    docs1, docs2, queries1, queries2, qrels = {}, {}, {}, {}, []
    for j in range(N_QUERIES):
        qid = f"q{j:03d}"
        u = _unit(rng.normal(size=DIM_PRIMARY))
        q_hat = np.array([_unit(rng.normal(size=DIM_COMP)) for _ in range(COMP_QUERY_TOKENS)])
        n_gold = 2 if j % 3 == 0 else 1
        n_dist = 8
        gold_ranks = sorted(rng.choice(np.arange(5, 9), size=n_gold, replace=False))
        # primary cosines: distractors fill the remaining top-8 slots, gold sits at its rank
        cosines = np.sort(rng.uniform(0.55, 0.9, size=n_dist + n_gold))[::-1]
        slots = list(range(1, n_dist + n_gold + 1))
        gold_ids = [f"{qid}_gold{g}" for g in range(n_gold)]
        dist_ids = [f"{qid}_dist{d}" for d in range(n_dist)]
        order = []
        gi = di = 0
        for s in slots:
            if s in gold_ranks:
                order.append(gold_ids[gi]); gi += 1
            else:
                order.append(dist_ids[di]); di += 1
        for doc_id, c in zip(order, cosines):
            docs1[doc_id] = _with_cosine(rng, u, c)[None, :]
        # complementary: gold first (1-2), then primary's top distractors, then the rest
        comp_order = gold_ids + [d for d in order if d not in gold_ids]
        comp_scores = np.sort(rng.uniform(2.0, 3.0, size=len(comp_order)))[::-1]
        comp_scores[:n_gold] += 1.0
        for doc_id, t in zip(comp_order, comp_scores):
            docs2[doc_id] = _comp_doc(rng, q_hat, t, int(rng.integers(0, 4)))
        queries1[qid] = (u * rng.uniform(0.8, 1.2))[None, :]
        queries2[qid] = q_hat
        for g in gold_ids:
            qrels.append((qid, g, 1))
    for b in range(N_BACKGROUND):
        doc_id = f"bg{b:04d}"
        docs1[doc_id] = rng.normal(size=(1, DIM_PRIMARY))
        docs2[doc_id] = rng.normal(scale=0.1, size=(int(rng.integers(2, 6)), DIM_COMP))
    return docs1, docs2, queries1, queries2, qrels


def _dump(path: Path, records: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec_id in sorted(records):
            fh.write(json.dumps({"id": rec_id, "vectors": np.round(records[rec_id], 6).tolist()}) + "\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parents[1] / "tests/fixtures/pair")
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    docs1, docs2, q1, q2, qrels = build(args.seed)
    _dump(args.out / "primary_docs.jsonl", docs1)
    _dump(args.out / "primary_queries.jsonl", q1)
    _dump(args.out / "complementary_docs.jsonl", docs2)
    _dump(args.out / "complementary_queries.jsonl", q2)
    with open(args.out / "qrels.txt", "w", encoding="utf-8", newline="\n") as fh:
        for qid, doc_id, grade in qrels:
            fh.write(f"{qid} 0 {doc_id} {grade}\n")
    config = {
        "primary": {"queries": "primary_queries.jsonl", "documents": "primary_docs.jsonl", "scorer": "cosine"},
        "complementary": {"queries": "complementary_queries.jsonl", "documents": "complementary_docs.jsonl",
                          "scorer": "maxsim"},
        "method": "rrf",
        "k": 10,
        "kappa": 60,
        "qrels": "qrels.txt",
        "dev_fraction": 0.1,
        "seed": 0,
    }
    (args.out / "config.json").write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
