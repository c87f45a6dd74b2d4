"""Tests for the synthetic fixture generator."""
import json

from app.scripts.generate_fixtures import main
from app.services.corpus import read_corpus
from app.services.faq_extraction import extract_corpus
from app.services.fixtures import HOTEL_NAMES, generate_fixtures
from app.services.language_id import PassThroughClassifier, load_language_map


def _tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


class TestGenerateFixtures:
    def test_same_seed_is_byte_identical(self, tmp_path):
        a = generate_fixtures(tmp_path / "a", seed=5)
        b = generate_fixtures(tmp_path / "b", seed=5)
        assert _tree(a.root) == _tree(b.root)

    def test_seed_changes_separable_corpus(self, tmp_path):
        a = generate_fixtures(tmp_path / "a", seed=5)
        b = generate_fixtures(tmp_path / "b", seed=6)
        assert a["separable"].read_bytes() != b["separable"].read_bytes()
        assert a["faq"].read_bytes() == b["faq"].read_bytes()

    def test_layout(self, fixture_tree):
        root = fixture_tree.root
        for rel in ("warc/faq.warc", "warc/faq.warc.gz", "warc/truncated.warc", "warc/separable.warc", "corpus/hotels.jsonl",
                    "language/map.jsonl", "oracles/extraction.json", "faqkit.env"):
            assert (root / rel).is_file(), rel

    def test_hotel_corpus(self, fixture_tree, oracle):
        hotels = read_corpus(fixture_tree["hotels"])
        assert len(hotels) == len(HOTEL_NAMES) + 1
        assert oracle("dedup_hotels")["pages_before"] == len(hotels)
        assert oracle("dedup_hotels")["component_sizes"] == [1, len(HOTEL_NAMES)]

    def test_separable_tokens_private(self, fixture_tree):
        corpus = read_corpus(fixture_tree["separable"])
        seen = {}
        for page in corpus.pages:
            for i, pair in enumerate(page.pairs):
                tokens = pair.answer.split()[:2]
                assert all(t in pair.question for t in tokens)
                for t in tokens:
                    assert t not in seen
                    seen[t] = (page.page_id, i)

    def test_separable_warc_extracts_to_separable_corpus(self, fixture_tree):
        classifier = PassThroughClassifier(load_language_map(fixture_tree["language_map"]))
        corpus, stats = extract_corpus([fixture_tree["separable_warc"]], classifier, language_floor=1)
        assert corpus.pages == read_corpus(fixture_tree["separable"]).pages
        assert stats.rejected == {}

    def test_oracles_are_json(self, fixture_tree):
        for path in (fixture_tree.root / "oracles").glob("*.json"):
            assert isinstance(json.loads(path.read_text(encoding="utf-8")), dict)


class TestScript:
    def test_main_lists_files(self, tmp_path, capsys):
        assert main(["--out", str(tmp_path / "fx"), "--seed", "2"]) == 0
        out = capsys.readouterr().out
        assert "faq" in out
        assert (tmp_path / "fx" / "corpus" / "separable.jsonl").exists()
