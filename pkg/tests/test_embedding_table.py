"""Tests for the embedding interchange table."""
import json

import numpy as np
import pytest

from app.errors import EmbeddingTableError
from app.services.embedding_table import (
    ANSWER,
    QUESTION,
    EmbeddingTable,
    read_embedding_table,
    write_embedding_table,
)


@pytest.fixture
def table():
    t = EmbeddingTable()
    t.add("p1", QUESTION, 0, [1.0, 0.0, 0.5])
    t.add("p1", ANSWER, 0, [0.25, 1.0, 0.0])
    t.add("p0", QUESTION, 1, [0.0, 0.0, 1.0])
    return t


class TestEmbeddingTable:
    def test_dimension_fixed_by_first_vector(self, table):
        assert table.dim == 3
        with pytest.raises(EmbeddingTableError, match="dimension 2 != table dimension 3"):
            table.add("p2", QUESTION, 0, [1.0, 2.0])

    def test_missing_key_named(self, table):
        with pytest.raises(EmbeddingTableError, match=r"\(p1, answer, 7\)"):
            table.get("p1", ANSWER, 7)

    def test_rejects_unknown_role_and_bad_values(self, table):
        with pytest.raises(EmbeddingTableError):
            table.add("p1", "title", 0, [0.0, 0.0, 0.0])
        with pytest.raises(EmbeddingTableError):
            table.add("p1", QUESTION, 3, [np.nan, 0.0, 0.0])
        with pytest.raises(EmbeddingTableError):
            table.add("p1", QUESTION, 3, [[1.0, 0.0, 0.0]])

    def test_keys_sorted(self, table):
        assert list(table.keys()) == [("p0", QUESTION, 1), ("p1", ANSWER, 0), ("p1", QUESTION, 0)]

    def test_matrix_stacks_indices(self, table):
        table.add("p1", ANSWER, 1, [1.0, 1.0, 1.0])
        m = table.matrix("p1", ANSWER, 2)
        assert m.shape == (2, 3)
        assert m[1].tolist() == [1.0, 1.0, 1.0]

    def test_vectors_stored_as_float32(self, table):
        assert table.get("p1", QUESTION, 0).dtype == np.float32


class TestEmbeddingFile:
    def test_round_trip(self, table, tmp_path):
        path = tmp_path / "emb.jsonl"
        write_embedding_table(table, path)
        again = read_embedding_table(path)
        assert list(again.keys()) == list(table.keys())
        for key in table.keys():
            assert np.array_equal(again.get(*key), table.get(*key))

    def test_written_in_key_order(self, table, tmp_path):
        path = tmp_path / "emb.jsonl"
        write_embedding_table(table, path)
        rows = [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines()]
        assert [(r["page"], r["role"], r["index"]) for r in rows] == list(table.keys())

    def test_malformed_line_named(self, tmp_path):
        path = tmp_path / "emb.jsonl"
        path.write_text(
            json.dumps({"page": "p", "role": "question", "index": 0, "vector": [1.0]}) + "\n"
            + json.dumps({"page": "p", "role": "answer", "index": -1, "vector": [1.0]}) + "\n",
            encoding="utf-8",
        )
        with pytest.raises(EmbeddingTableError, match=":2:"):
            read_embedding_table(path)

    def test_dimension_mismatch_in_file(self, tmp_path):
        path = tmp_path / "emb.jsonl"
        path.write_text(
            json.dumps({"page": "p", "role": "question", "index": 0, "vector": [1.0, 2.0]}) + "\n"
            + json.dumps({"page": "p", "role": "answer", "index": 0, "vector": [1.0]}) + "\n",
            encoding="utf-8",
        )
        with pytest.raises(EmbeddingTableError, match=":2:"):
            read_embedding_table(path)
