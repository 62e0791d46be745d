"""Embedding, qrels and run file formats.

Embeddings (JSON lines)
    One UTF-8 JSON object per line: ``{"id": "doc7", "vectors": [[0.1, ...], ...]}``.
    Blank lines are ignored. The scorer is not part of the file.

Embeddings (binary, ``.ffe``)
    Little endian. Header: magic ``b"FFE1"``, u32 dim, u32 record count.
    Each record: u32 id byte length, UTF-8 id bytes, u32 vector count,
    then ``count * dim`` float32 values, row-major.

Qrels
    ``qid 0 docid grade`` per line, whitespace separated.

Runs
    ``qid Q0 docid rank score tag`` per line; rank is 1-indexed, score has
    six decimals, lines are ordered by (qid, rank).
"""

from __future__ import annotations

import json
import logging
import math
import struct
from collections.abc import Iterable, Mapping
from pathlib import Path

import numpy as np

from .core import CorpusIndex, EmbeddingMatrix, Qrels, RankedList, Scorer
from .errors import DimensionMismatch, DuplicateDocument, InputError, IoError, NonFiniteScore, ParseError

log = logging.getLogger(__name__)

BINARY_MAGIC = b"FFE1"

__all__ = [
    "load_embeddings",
    "read_embedding_records",
    "write_embeddings",
    "load_qrels",
    "write_qrels",
    "load_run",
    "write_run",
]


def _open_text(path, mode="r"):
    try:
        return open(path, mode, encoding="utf-8", newline="\n" if "w" in mode else None)
    except FileNotFoundError:
        raise IoError(f"file not found: {path}") from None
    except OSError as exc:
        raise IoError(f"cannot open {path}: {exc}") from None


def _read_jsonl(path: Path) -> list[tuple[str, EmbeddingMatrix]]:
    records = []
    with _open_text(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", lineno, str(path)) from None
            if not isinstance(obj, dict) or "id" not in obj or "vectors" not in obj:
                raise ParseError('expected an object with "id" and "vectors"', lineno, str(path))
            rec_id, vectors = obj["id"], obj["vectors"]
            if not isinstance(rec_id, str):
                raise ParseError('"id" must be a string', lineno, str(path))
            if (not isinstance(vectors, list) or not vectors
                    or not all(isinstance(v, list) for v in vectors)):
                raise ParseError('"vectors" must be a non-empty list of lists', lineno, str(path))
            dims = {len(v) for v in vectors}
            if len(dims) != 1:
                raise DimensionMismatch(f"{path}:{lineno}: ragged vectors in record {rec_id!r}", record_id=rec_id)
            try:
                emb = EmbeddingMatrix(vectors)
            except (TypeError, ValueError):
                raise ParseError(f"non-numeric vector component in record {rec_id!r}", lineno, str(path)) from None
            except NonFiniteScore:
                raise ParseError(f"non-finite vector component in record {rec_id!r}", lineno, str(path)) from None
            records.append((rec_id, emb))
    return records


def _read_binary(path: Path) -> list[tuple[str, EmbeddingMatrix]]:
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        raise IoError(f"file not found: {path}") from None
    if data[:4] != BINARY_MAGIC:
        raise ParseError("bad magic bytes", path=str(path))
    try:
        dim, count = struct.unpack_from("<II", data, 4)
        pos = 12
        records = []
        for _ in range(count):
            (id_len,) = struct.unpack_from("<I", data, pos)
            pos += 4
            rec_id = data[pos:pos + id_len].decode("utf-8")
            pos += id_len
            (n_vec,) = struct.unpack_from("<I", data, pos)
            pos += 4
            nbytes = 4 * n_vec * dim
            if pos + nbytes > len(data):
                raise ParseError(f"truncated payload for record {rec_id!r}", path=str(path))
            arr = np.frombuffer(data, dtype="<f4", count=n_vec * dim, offset=pos).reshape(n_vec, dim)
            pos += nbytes
            records.append((rec_id, EmbeddingMatrix(arr.astype(np.float64))))
    except struct.error:
        raise ParseError("truncated file", path=str(path)) from None
    if pos != len(data):
        raise ParseError(f"{len(data) - pos} trailing bytes", path=str(path))
    return records


def _is_binary(path: Path) -> bool:
    try:
        with open(path, "rb") as fh:
            return fh.read(4) == BINARY_MAGIC
    except FileNotFoundError:
        raise IoError(f"file not found: {path}") from None


def read_embedding_records(path) -> list[tuple[str, EmbeddingMatrix]]:
    """Records in file order, with per-file dimension and uniqueness checks."""
    path = Path(path)
    records = _read_binary(path) if _is_binary(path) else _read_jsonl(path)
    seen: set[str] = set()
    dim = None
    for rec_id, emb in records:
        if rec_id in seen:
            raise DuplicateDocument(rec_id)
        seen.add(rec_id)
        if dim is None:
            dim = emb.dim
        elif emb.dim != dim:
            raise DimensionMismatch(f"{path}: record {rec_id!r} has dim {emb.dim}, expected {dim}", record_id=rec_id)
    return records


def load_embeddings(path, role: str = "document", scorer: Scorer | str | None = None):
    """Load a query map (``role="query"``) or a :class:`CorpusIndex` (``role="document"``)."""
    records = read_embedding_records(path)
    if role == "query":
        return dict(records)
    if role != "document":
        raise InputError(f"role must be 'query' or 'document', got {role!r}")
    if scorer is None:
        raise InputError("document embeddings need a scorer kind")
    if not records:
        raise InputError(f"{path}: no document records")
    return CorpusIndex(records, scorer)


def write_embeddings(path, records: Mapping[str, EmbeddingMatrix] | Iterable[tuple[str, EmbeddingMatrix]],
                     binary: bool = False) -> None:
    items = list(records.items()) if isinstance(records, Mapping) else list(records)
    path = Path(path)
    if binary:
        dim = items[0][1].dim if items else 0
        chunks = [BINARY_MAGIC, struct.pack("<II", dim, len(items))]
        for rec_id, emb in items:
            raw = rec_id.encode("utf-8")
            chunks.append(struct.pack("<I", len(raw)))
            chunks.append(raw)
            chunks.append(struct.pack("<I", emb.n_vectors))
            chunks.append(np.asarray(emb.vectors, dtype="<f4").tobytes())
        path.write_bytes(b"".join(chunks))
        return
    with _open_text(path, "w") as fh:
        for rec_id, emb in items:
            fh.write(json.dumps({"id": rec_id, "vectors": emb.vectors.tolist()}) + "\n")


def load_qrels(path) -> Qrels:
    grades: dict[str, dict[str, int]] = {}
    with _open_text(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise ParseError(f"expected 4 fields, got {len(parts)}", lineno, str(path))
            qid, _, doc_id, raw = parts
            try:
                grade = int(raw)
            except ValueError:
                raise ParseError(f"grade {raw!r} is not an integer", lineno, str(path)) from None
            if grade < 0:
                raise ParseError(f"negative grade {grade}", lineno, str(path))
            row = grades.setdefault(qid, {})
            if doc_id in row:
                log.warning("%s:%d: duplicate judgment for (%s, %s); keeping grade %d", path, lineno, qid, doc_id, grade)
            row[doc_id] = grade
    return Qrels(grades)


def write_qrels(path, qrels: Qrels) -> None:
    with _open_text(path, "w") as fh:
        for qid in sorted(qrels.grades):
            for doc_id, grade in sorted(qrels.grades[qid].items()):
                fh.write(f"{qid} 0 {doc_id} {grade}\n")


def write_run(path, runs: Iterable[RankedList], tag: str = "fusion_forge") -> None:
    ordered = sorted(runs, key=lambda r: r.query_id)
    try:
        with _open_text(path, "w") as fh:
            for run in ordered:
                for rank, (doc_id, score) in enumerate(run.items, start=1):
                    fh.write(f"{run.query_id} Q0 {doc_id} {rank} {score:.6f} {tag}\n")
    except OSError as exc:
        if isinstance(exc, IoError):
            raise
        raise IoError(f"cannot write {path}: {exc}") from None


def load_run(path) -> dict[str, RankedList]:
    """Read a run file back; items keep file rank order."""
    rows: dict[str, list[tuple[int, str, float]]] = {}
    with _open_text(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 6:
                raise ParseError(f"expected 6 fields, got {len(parts)}", lineno, str(path))
            qid, _, doc_id, rank, score, _tag = parts
            try:
                r, s = int(rank), float(score)
            except ValueError:
                raise ParseError("rank must be an integer and score a number", lineno, str(path)) from None
            if not math.isfinite(s):
                raise ParseError("non-finite score", lineno, str(path))
            rows.setdefault(qid, []).append((r, doc_id, s))
    out = {}
    for qid, entries in rows.items():
        entries.sort(key=lambda e: e[0])
        ids = [d for _, d, _ in entries]
        if len(set(ids)) != len(ids):
            raise ParseError(f"duplicate document in run for query {qid!r}", path=str(path))
        out[qid] = RankedList(qid, tuple((d, s) for _, d, s in entries))
    return out
