import logging
import struct

import numpy as np
import pytest

from fusion_forge.core import CorpusIndex, EmbeddingMatrix, Qrels, build_ranked_list
from fusion_forge.errors import DimensionMismatch, DuplicateDocument, InputError, IoError, ParseError
from fusion_forge.io import (
    BINARY_MAGIC,
    load_embeddings,
    load_qrels,
    load_run,
    read_embedding_records,
    write_embeddings,
    write_qrels,
    write_run,
)


def test_jsonl_round_trip(tmp_path, rng):
    recs = {f"d{i}": EmbeddingMatrix(rng.normal(size=(int(rng.integers(1, 4)), 5))) for i in range(6)}
    p = tmp_path / "e.jsonl"
    write_embeddings(p, recs)
    back = dict(read_embedding_records(p))
    assert back == recs


def test_binary_round_trip_is_float32_exact(tmp_path, rng):
    recs = {f"doc-é{i}": EmbeddingMatrix(rng.normal(size=(2, 7)).astype(np.float32)) for i in range(4)}
    p = tmp_path / "e.ffe"
    write_embeddings(p, recs, binary=True)
    assert p.read_bytes()[:4] == BINARY_MAGIC
    assert dict(read_embedding_records(p)) == recs


def test_binary_layout(tmp_path):
    p = tmp_path / "e.ffe"
    write_embeddings(p, {"ab": EmbeddingMatrix([[1.0, 2.0]])}, binary=True)
    want = BINARY_MAGIC + struct.pack("<II", 2, 1) + struct.pack("<I", 2) + b"ab" + struct.pack("<I", 1)
    want += struct.pack("<2f", 1.0, 2.0)
    assert p.read_bytes() == want


def test_truncated_binary(tmp_path):
    p = tmp_path / "e.ffe"
    write_embeddings(p, {"a": EmbeddingMatrix([[1.0, 2.0]])}, binary=True)
    p.write_bytes(p.read_bytes()[:-3])
    with pytest.raises(ParseError):
        read_embedding_records(p)


def test_load_documents_and_queries(tmp_path):
    p = tmp_path / "d.jsonl"
    p.write_text('{"id": "a", "vectors": [[1, 0]]}\n\n{"id": "b", "vectors": [[0, 1]]}\n')
    index = load_embeddings(p, "document", "cosine")
    assert isinstance(index, CorpusIndex) and index.doc_ids == ("a", "b")
    assert set(load_embeddings(p, "query")) == {"a", "b"}
    with pytest.raises(InputError):
        load_embeddings(p, "document")


@pytest.mark.parametrize(
    "body, exc, line",
    [
        ('{"id": "a", "vectors": [[1, 0]]}\n{"id": "b", "vectors": [[1, 0]\n', ParseError, 2),
        ('{"id": 3, "vectors": [[1, 0]]}\n', ParseError, 1),
        ('{"id": "a", "vectors": [[1, "x"]]}\n', ParseError, 1),
        ('{"id": "a", "vectors": []}\n', ParseError, 1),
        ('{"id": "a"}\n', ParseError, 1),
    ],
)
def test_malformed_jsonl_reports_line(tmp_path, body, exc, line):
    p = tmp_path / "bad.jsonl"
    p.write_text(body)
    with pytest.raises(exc) as info:
        read_embedding_records(p)
    assert info.value.line == line
    assert str(p) in str(info.value)


def test_duplicate_and_dimension_errors(tmp_path):
    p = tmp_path / "d.jsonl"
    p.write_text('{"id": "a", "vectors": [[1, 0]]}\n{"id": "a", "vectors": [[0, 1]]}\n')
    with pytest.raises(DuplicateDocument):
        read_embedding_records(p)
    p.write_text('{"id": "a", "vectors": [[1, 0]]}\n{"id": "b", "vectors": [[0, 1, 2]]}\n')
    with pytest.raises(DimensionMismatch) as info:
        read_embedding_records(p)
    assert info.value.record_id == "b"


def test_missing_file_names_the_path(tmp_path):
    missing = tmp_path / "nope.jsonl"
    for fn in (read_embedding_records, load_qrels, load_run):
        with pytest.raises(IoError) as info:
            fn(missing)
        assert str(missing) in str(info.value)


def test_qrels_round_trip_and_duplicates(tmp_path, caplog):
    p = tmp_path / "q.txt"
    p.write_text("q1 0 a 1\nq1 0 b 0\nq2 0 c 2\nq1 0 a 3\n")
    with caplog.at_level(logging.WARNING, logger="fusion_forge"):
        qrels = load_qrels(p)
    assert "duplicate judgment" in caplog.text
    assert qrels.grade("q1", "a") == 3 and qrels.grade("q2", "c") == 2
    out = tmp_path / "q2.txt"
    write_qrels(out, qrels)
    assert load_qrels(out) == qrels


@pytest.mark.parametrize("line", ["q1 0 a", "q1 0 a x", "q1 0 a -1"])
def test_bad_qrels_lines(tmp_path, line):
    p = tmp_path / "q.txt"
    p.write_text("q0 0 z 1\n" + line + "\n")
    with pytest.raises(ParseError) as info:
        load_qrels(p)
    assert info.value.line == 2


def test_run_round_trip(tmp_path):
    runs = [
        build_ranked_list("q2", [("x", 0.5), ("y", 0.25)]),
        build_ranked_list("q1", [("a", 1.0 / 3.0)]),
    ]
    p = tmp_path / "r.run"
    write_run(p, runs, tag="t")
    assert p.read_text() == "q1 Q0 a 1 0.333333 t\nq2 Q0 x 1 0.500000 t\nq2 Q0 y 2 0.250000 t\n"
    back = load_run(p)
    assert back["q2"].doc_ids == ["x", "y"] and back["q1"].scores == [0.333333]


def test_bad_run_lines(tmp_path):
    p = tmp_path / "r.run"
    p.write_text("q1 Q0 a 1 nan t\n")
    with pytest.raises(ParseError):
        load_run(p)
    p.write_text("q1 Q0 a 1 0.5 t\nq1 Q0 a 2 0.4 t\n")
    with pytest.raises(ParseError):
        load_run(p)
    p.write_text("q1 Q0 a 1\n")
    with pytest.raises(ParseError) as info:
        load_run(p)
    assert info.value.line == 1
