"""Domain types and the ranking primitives every fusion method builds on."""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import (
    DimensionMismatch,
    DocumentNotInIndex,
    DuplicateDocument,
    InvalidParameter,
    NonFiniteScore,
    QueryMismatch,
)

__all__ = [
    "Scorer",
    "EmbeddingMatrix",
    "CorpusIndex",
    "RankedList",
    "CandidatePool",
    "Qrels",
    "build_ranked_list",
    "union_pool",
    "rank_of",
]


class Scorer(str, Enum):
    COSINE = "cosine"
    MAXSIM = "maxsim"

    @classmethod
    def parse(cls, value: "str | Scorer") -> "Scorer":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InvalidParameter(f"unknown scorer {value!r}; expected cosine or maxsim") from None


class EmbeddingMatrix:
    """One query's or document's vectors, stored as a read-only float64 array.

    A single-vector embedding is a matrix with one row.
    """

    __slots__ = ("_data",)

    def __init__(self, vectors):
        data = np.array(vectors, dtype=np.float64)
        if data.ndim == 1:
            data = data[None, :]
        if data.ndim != 2:
            raise DimensionMismatch("embedding must be a list of equal-length vectors")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise DimensionMismatch("embedding needs at least one vector of dimension >= 1")
        if not np.all(np.isfinite(data)):
            raise NonFiniteScore("embedding contains non-finite components")
        data.setflags(write=False)
        self._data = data

    @property
    def vectors(self) -> np.ndarray:
        return self._data

    @property
    def dim(self) -> int:
        return self._data.shape[1]

    @property
    def n_vectors(self) -> int:
        return self._data.shape[0]

    def __len__(self) -> int:
        return self._data.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingMatrix):
            return NotImplemented
        return self._data.shape == other._data.shape and bool(np.array_equal(self._data, other._data))

    def __hash__(self) -> int:
        return hash((self._data.shape, self._data.tobytes()))

    def __repr__(self) -> str:
        return f"EmbeddingMatrix(n_vectors={self.n_vectors}, dim={self.dim})"


class CorpusIndex:
    """Immutable document collection for one retriever.

    Document vectors are packed once into contiguous arrays so scoring can
    run over any subset of rows without per-document Python overhead:
    ``tokens`` stacks every document's vectors and ``offsets[i]:offsets[i+1]``
    delimits document ``i``. For cosine indexes each document has exactly one
    row and ``norms`` caches the row norms.
    """

    def __init__(self, entries: Mapping[str, EmbeddingMatrix] | Iterable[tuple[str, EmbeddingMatrix]], scorer):
        self.scorer = Scorer.parse(scorer)
        items = list(entries.items()) if isinstance(entries, Mapping) else list(entries)
        if not items:
            raise InvalidParameter("corpus index must be non-empty")
        ids: list[str] = []
        seen: set[str] = set()
        mats: list[EmbeddingMatrix] = []
        for doc_id, emb in items:
            if doc_id in seen:
                raise DuplicateDocument(doc_id)
            if not isinstance(emb, EmbeddingMatrix):
                emb = EmbeddingMatrix(emb)
            seen.add(doc_id)
            ids.append(doc_id)
            mats.append(emb)
        dim = mats[0].dim
        for doc_id, emb in zip(ids, mats):
            if emb.dim != dim:
                raise DimensionMismatch(
                    f"document {doc_id!r} has dim {emb.dim}, index dim is {dim}", record_id=doc_id
                )
            if self.scorer is Scorer.COSINE and emb.n_vectors != 1:
                raise DimensionMismatch(
                    f"cosine index needs single-vector documents; {doc_id!r} has {emb.n_vectors}",
                    record_id=doc_id,
                )
        self.dim = dim
        self.doc_ids: tuple[str, ...] = tuple(ids)
        self._entries = dict(zip(ids, mats))
        self._row = {doc_id: i for i, doc_id in enumerate(ids)}
        counts = np.array([m.n_vectors for m in mats], dtype=np.int64)
        offsets = np.zeros(len(mats) + 1, dtype=np.int64)
        np.cumsum(counts, out=offsets[1:])
        tokens = np.ascontiguousarray(np.concatenate([m.vectors for m in mats], axis=0))
        norms = np.sqrt(np.einsum("ij,ij->i", tokens, tokens))
        for arr in (tokens, offsets, norms):
            arr.setflags(write=False)
        self.tokens = tokens
        self.offsets = offsets
        self.norms = norms

    def __len__(self) -> int:
        return len(self.doc_ids)

    def __contains__(self, doc_id: object) -> bool:
        return doc_id in self._entries

    def __getitem__(self, doc_id: str) -> EmbeddingMatrix:
        return self._entries[doc_id]

    @property
    def entries(self) -> Mapping[str, EmbeddingMatrix]:
        return dict(self._entries)

    def row(self, doc_id: str) -> int:
        return self._row[doc_id]

    def rows(self, doc_ids: Sequence[str]) -> np.ndarray:
        out = np.empty(len(doc_ids), dtype=np.int64)
        for i, doc_id in enumerate(doc_ids):
            try:
                out[i] = self._row[doc_id]
            except KeyError:
                raise DocumentNotInIndex(doc_id) from None
        return out

    def subset(self, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Packed ``(tokens, offsets, norms)`` for the given document rows, in order."""
        if self.scorer is Scorer.COSINE:
            sel = self.tokens[rows]
            return sel, np.arange(len(rows) + 1, dtype=np.int64), self.norms[rows]
        starts = self.offsets[rows]
        ends = self.offsets[rows + 1]
        lengths = ends - starts
        offsets = np.zeros(len(rows) + 1, dtype=np.int64)
        np.cumsum(lengths, out=offsets[1:])
        if len(rows):
            idx = np.concatenate([np.arange(s, e) for s, e in zip(starts, ends)])
        else:
            idx = np.empty(0, dtype=np.int64)
        return np.ascontiguousarray(self.tokens[idx]), offsets, self.norms[idx]

    def __repr__(self) -> str:
        return f"CorpusIndex(n_docs={len(self)}, dim={self.dim}, scorer={self.scorer.value})"


@dataclass(frozen=True)
class RankedList:
    query_id: str
    items: tuple[tuple[str, float], ...] = ()

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    @property
    def doc_ids(self) -> list[str]:
        return [d for d, _ in self.items]

    @property
    def scores(self) -> list[float]:
        return [s for _, s in self.items]

    def truncate(self, k: int) -> "RankedList":
        return RankedList(self.query_id, self.items[:k])


@dataclass(frozen=True)
class CandidatePool:
    query_id: str
    doc_ids: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.doc_ids)) != len(self.doc_ids):
            dup = next(d for i, d in enumerate(self.doc_ids) if d in self.doc_ids[:i])
            raise DuplicateDocument(dup)

    def __len__(self) -> int:
        return len(self.doc_ids)

    def __iter__(self):
        return iter(self.doc_ids)


@dataclass(frozen=True)
class Qrels:
    """Graded relevance judgments; absent pairs have grade 0."""

    grades: Mapping[str, Mapping[str, int]] = field(default_factory=dict)

    def __post_init__(self):
        frozen = {}
        for qid, docs in self.grades.items():
            row = {}
            for doc_id, grade in docs.items():
                if int(grade) != grade or grade < 0:
                    raise InvalidParameter(f"grade for ({qid}, {doc_id}) must be a non-negative integer")
                row[doc_id] = int(grade)
            frozen[qid] = row
        object.__setattr__(self, "grades", frozen)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str, int]]) -> "Qrels":
        grades: dict[str, dict[str, int]] = {}
        for qid, doc_id, grade in pairs:
            grades.setdefault(qid, {})[doc_id] = grade
        return cls(grades)

    def grade(self, query_id: str, doc_id: str) -> int:
        return self.grades.get(query_id, {}).get(doc_id, 0)

    def for_query(self, query_id: str) -> Mapping[str, int]:
        return self.grades.get(query_id, {})

    def relevant(self, query_id: str) -> set[str]:
        return {d for d, g in self.for_query(query_id).items() if g > 0}

    @property
    def query_ids(self) -> list[str]:
        return sorted(self.grades)


def build_ranked_list(query_id: str, scored: Iterable[tuple[str, float]]) -> RankedList:
    """Sort by score descending, breaking ties by ascending doc id."""
    pairs = []
    seen = set()
    for doc_id, score in scored:
        if doc_id in seen:
            raise DuplicateDocument(doc_id)
        score = float(score)
        if not math.isfinite(score):
            raise NonFiniteScore(f"score for {doc_id!r} is {score}")
        seen.add(doc_id)
        pairs.append((doc_id, score))
    pairs.sort(key=lambda p: (-p[1], p[0]))
    return RankedList(query_id, tuple(pairs))


def union_pool(lists: Sequence[RankedList]) -> CandidatePool:
    """Union of the lists' documents: first list's order, then unseen docs in list order."""
    if not lists:
        raise InvalidParameter("union_pool needs at least one list")
    qid = lists[0].query_id
    order: dict[str, None] = {}
    for rl in lists:
        if rl.query_id != qid:
            raise QueryMismatch(f"cannot pool lists for {qid!r} and {rl.query_id!r}")
        for doc_id, _ in rl.items:
            order.setdefault(doc_id, None)
    return CandidatePool(qid, tuple(order))


def rank_of(ranked: RankedList, doc_id: str, k: int) -> int:
    """1-indexed position of ``doc_id``; ``k + 1`` when absent."""
    if k < 1:
        raise InvalidParameter("K must be >= 1")
    for pos, (d, _) in enumerate(ranked.items, start=1):
        if d == doc_id:
            return pos
    return k + 1


def rank_map(ranked: RankedList) -> dict[str, int]:
    return {d: i for i, (d, _) in enumerate(ranked.items, start=1)}
