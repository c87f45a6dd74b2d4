"""Tests for monolingual page-grouped training batches."""
import json

import pytest
from hypothesis import given, settings, strategies as st

from app.errors import ConfigurationError, DataError
from app.services.batch_builder import (
    ANSWER_MARKER,
    QUESTION_MARKER,
    build_batches,
    meta_path_for,
    read_batches,
    render_entry,
    unrender_entry,
    write_batches,
)
from app.services.corpus import build_page


def _pages(sizes, language="en"):
    return [
        build_page(f"https://www.site{i}.com/faq", language, [(f"Q{i}.{k}?", f"A{i}.{k}") for k in range(n)])
        for i, n in enumerate(sizes)
    ]


class TestRendering:
    def test_markers(self):
        assert render_entry("Why?", "Because.") == (f"{QUESTION_MARKER} Why?", f"{ANSWER_MARKER} Because.")

    def test_render_twice_rejected(self):
        with pytest.raises(ValueError):
            render_entry(*render_entry("Why?", "Because."))

    def test_unrender_inverts(self):
        assert unrender_entry(*render_entry("Why?", "Because.")) == ("Why?", "Because.")

    def test_unrender_requires_markers(self):
        with pytest.raises(ValueError):
            unrender_entry("Why?", "Because.")


class TestBuildBatches:
    """Packing rules."""

    def test_pages_stay_together(self, separable):
        batches = build_batches(separable.pages, capacity=10)
        for batch in batches:
            for page_id in batch.page_ids():
                assert sum(1 for e in batch.entries if e.page_id == page_id) == 6

    def test_one_page_per_batch_at_page_capacity(self, separable):
        batches = build_batches(separable.pages, capacity=6)
        assert len(batches) == 20
        assert all(len(b) == 6 and not b.partial for b in batches)

    def test_single_batch_is_partial(self, separable):
        (batch,) = build_batches(separable.pages, capacity=800)
        assert len(batch) == 120
        assert batch.partial

    def test_oversized_page_split(self, expedia):
        en = [p for p in expedia.pages if p.language == "en"]
        batches = build_batches(en, capacity=5)
        assert [len(b) for b in batches] == [4, 5, 5, 3]
        assert [b.partial for b in batches] == [False, False, False, True]
        split_page = batches[2].page_ids()[0]
        assert batches[3].page_ids()[0] == split_page

    def test_monolingual_and_sorted(self, expedia):
        batches = build_batches(expedia.pages, capacity=8)
        languages = [b.language for b in batches]
        assert languages == sorted(languages)
        by_id = expedia.by_id()
        for batch in batches:
            assert {by_id[e.page_id].language for e in batch.entries} == {batch.language}

    def test_only_trailing_batch_partial(self, expedia):
        batches = build_batches(expedia.pages, capacity=8)
        for i, batch in enumerate(batches):
            last = i + 1 == len(batches) or batches[i + 1].language != batch.language
            if not last:
                assert not batch.partial

    def test_identity_order_without_seed(self, separable):
        batches = build_batches(separable.pages, capacity=6)
        assert [b.page_ids()[0] for b in batches] == [p.page_id for p in separable.pages]

    def test_seeded_shuffle(self, separable):
        first = [b.page_ids()[0] for b in build_batches(separable.pages, capacity=6, seed=1)]
        again = [b.page_ids()[0] for b in build_batches(separable.pages, capacity=6, seed=1)]
        other = [b.page_ids()[0] for b in build_batches(separable.pages, capacity=6, seed=2)]
        assert first == again
        assert first != other
        assert sorted(first) == sorted(other)

    def test_capacity_floor(self, separable):
        with pytest.raises(ConfigurationError):
            build_batches(separable.pages, capacity=1)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.integers(1, 15), min_size=1, max_size=25), st.integers(2, 20))
    def test_every_pair_exactly_once(self, sizes, capacity):
        pages = _pages(sizes)
        batches = build_batches(pages, capacity=capacity, seed=3)
        seen = [(e.page_id, e.pair_index) for b in batches for e in b.entries]
        expected = [(p.page_id, i) for p in pages for i in range(p.size)]
        assert sorted(seen) == sorted(expected)
        assert all(len(b) <= capacity for b in batches)


class TestBatchFile:
    """JSON Lines export with a meta sidecar."""

    def test_round_trip(self, expedia, tmp_path):
        path = tmp_path / "batches.jsonl"
        batches = build_batches(expedia.pages, capacity=5, seed=800)
        write_batches(batches, path, seed=800)
        again = read_batches(path)
        assert [b.entries for b in again] == [b.entries for b in batches]
        assert [b.partial for b in again] == [b.partial for b in batches]
        assert all(b.capacity == 5 for b in again)

    def test_rendered_on_disk(self, separable, tmp_path):
        path = tmp_path / "batches.jsonl"
        write_batches(build_batches(separable.pages, capacity=6), path)
        row = json.loads(path.read_text(encoding="utf-8").splitlines()[0])
        assert row["language"] == "en"
        assert row["entries"][0]["q"].startswith(QUESTION_MARKER)
        assert row["entries"][0]["a"].startswith(ANSWER_MARKER)

    def test_meta_sidecar(self, separable, tmp_path):
        path = tmp_path / "batches.jsonl"
        write_batches(build_batches(separable.pages, capacity=6, seed=9), path, seed=9)
        meta = json.loads(meta_path_for(path).read_text(encoding="utf-8"))
        assert meta_path_for(path).name == "batches.meta.json"
        assert meta == {
            "seed": 9, "capacity": 6, "batches": 20, "entries": 120,
            "partial_batches": 0, "languages": ["en"],
        }

    def test_malformed_line(self, tmp_path):
        path = tmp_path / "batches.jsonl"
        path.write_text("{\"language\": \"en\"}\n", encoding="utf-8")
        with pytest.raises(DataError, match=":1:"):
            read_batches(path)

    def test_missing_markers(self, tmp_path):
        path = tmp_path / "batches.jsonl"
        path.write_text(json.dumps({"language": "en", "entries": [{"page": "p", "q": "Q?", "a": "A"}]}) + "\n",
                        encoding="utf-8")
        with pytest.raises(DataError, match="role markers"):
            read_batches(path)
