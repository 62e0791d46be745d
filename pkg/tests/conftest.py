import sys
from pathlib import Path

import numpy as np
import pytest

from fusion_forge.core import CorpusIndex, EmbeddingMatrix, build_ranked_list

sys.path.insert(0, str(Path(__file__).parent))

FIXTURES = Path(__file__).parent / "fixtures"


def random_index(rng, n_docs, dim, scorer="cosine", max_tokens=4, prefix="d"):
    docs = {}
    for i in range(n_docs):
        n_vec = 1 if scorer == "cosine" else int(rng.integers(1, max_tokens + 1))
        docs[f"{prefix}{i:04d}"] = rng.normal(size=(n_vec, dim))
    return CorpusIndex(docs, scorer)


def random_list(rng, qid, doc_ids, k):
    chosen = rng.choice(doc_ids, size=min(k, len(doc_ids)), replace=False)
    return build_ranked_list(qid, ((str(d), float(rng.normal())) for d in chosen))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def pair_dir():
    return FIXTURES / "pair"


@pytest.fixture(scope="session")
def golden_dir():
    return FIXTURES / "golden"
