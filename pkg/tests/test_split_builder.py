"""Tests for the domain-disjoint train/validation split."""
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from app.errors import ConfigurationError
from app.services.corpus import Corpus, build_page
from app.services.oracles import split_violations
from app.services.split_builder import (
    SplitConfig,
    build_split,
    histogram_bins,
    pairs_per_page_histogram,
    split_histograms,
)

DOMAINS = ["alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel"]
TLDS = ["com", "fr", "de"]
LANGS = ["en", "fr", "de"]

page_specs = st.lists(
    st.tuples(
        st.integers(0, len(DOMAINS) - 1),
        st.sampled_from(TLDS),
        st.sampled_from(LANGS),
        st.integers(1, 12),
    ),
    min_size=1,
    max_size=40,
)


def _corpus(specs):
    pages = []
    for i, (d, tld, lang, size) in enumerate(specs):
        url = f"https://www.{DOMAINS[d]}.{tld}/faq/{i}"
        pages.append(build_page(url, lang, [(f"Question {i} {k}?", f"Answer {i} {k}.") for k in range(size)]))
    return Corpus(tuple(pages))


def _by_url(corpus, manifest, which):
    by_id = corpus.by_id()
    return sorted(by_id[i].url for i in manifest.page_ids(which))


class TestSplitConfig:
    @pytest.mark.parametrize("fraction", [0.0, 1.0, -0.1])
    def test_fraction_bounds(self, fraction):
        with pytest.raises(ConfigurationError):
            SplitConfig(validation_fraction=fraction)

    def test_cap_positive(self):
        with pytest.raises(ConfigurationError):
            SplitConfig(max_pages_per_domain=0)


class TestExpediaFamily:
    """Multi-language domains never reach validation."""

    def test_assignment(self, expedia):
        manifest = build_split(expedia)
        assert _by_url(expedia, manifest, "validation") == [
            "https://help.domain.com/faq",
            "https://www.monvoyage.fr/faq",
            "https://www.viajes.es/faq",
        ]
        assert _by_url(expedia, manifest, "training") == [
            "https://www.expedia.com/help",
            "https://www.expedia.es/ayuda",
            "https://www.expedia.fr/aide",
            "https://www.travelguide.com/faq",
        ]
        assert _by_url(expedia, manifest, "excluded") == ["https://www.domain.co.uk/faq"]

    def test_per_language_rows(self, expedia):
        manifest = build_split(expedia)
        en = manifest.per_language["en"]
        assert en.target_pairs == pytest.approx(1.7)
        assert en.achieved_pairs == 6
        assert en.validation_pages == 1
        assert en.training_pages == 2
        assert en.warning is None

    def test_seed_and_config_echoed(self, expedia):
        manifest = build_split(expedia, seed=123)
        assert manifest.config["seed"] == 123
        assert manifest.config["max_pages_per_domain"] == 3

    def test_domain_share(self, expedia):
        manifest = build_split(expedia)
        assert manifest.domain_share["training"].domain == "expedia"
        assert manifest.domain_share["training"].share == pytest.approx(0.75)

    def test_all_training_pages_option(self, expedia):
        manifest = build_split(expedia, SplitConfig(one_page_per_domain_training=False))
        assert len(manifest.training) == 4
        assert manifest.excluded == [p.page_id for p in expedia.pages if "domain.co.uk" in p.url]

    def test_no_candidates_warns(self):
        corpus = Corpus((
            build_page("https://www.shared.com/en", "en", [("Q?", "A")]),
            build_page("https://www.shared.com/fr", "fr", [("Q ?", "R")]),
        ))
        manifest = build_split(corpus)
        assert manifest.validation == []
        assert manifest.per_language["en"].warning is not None


class TestSplitProperties:
    """Invariants over random corpora."""

    @settings(max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])
    @given(page_specs, st.sampled_from([0.1, 0.25, 0.5]))
    def test_invariants(self, specs, fraction):
        corpus = _corpus(specs)
        cfg = SplitConfig(validation_fraction=fraction)
        manifest = build_split(corpus, cfg)

        assert split_violations(corpus.pages, manifest.validation, manifest.training, cap=3) == []
        ids = manifest.validation + manifest.training + manifest.excluded
        assert sorted(ids) == sorted(p.page_id for p in corpus.pages)

        by_id = corpus.by_id()
        for language, row in manifest.per_language.items():
            pages = [p for p in corpus.pages if p.language == language]
            total = sum(p.size for p in pages)
            chosen = [by_id[i] for i in manifest.validation if by_id[i].language == language]
            achieved = sum(p.size for p in chosen)
            assert achieved == row.achieved_pairs
            if chosen:
                assert achieved <= row.target_pairs + max(p.size for p in pages)
            if achieved < row.target_pairs:
                # Every unchosen candidate must be blocked by the domain cap.
                langs_of = {}
                for p in corpus.pages:
                    langs_of.setdefault(p.root_domain, set()).add(p.language)
                picked = {}
                for p in chosen:
                    picked[p.root_domain] = picked.get(p.root_domain, 0) + 1
                for p in pages:
                    if p.page_id in manifest.validation or len(langs_of[p.root_domain]) > 1:
                        continue
                    assert picked.get(p.root_domain, 0) >= 3
            assert total * fraction == pytest.approx(row.target_pairs)

    @settings(max_examples=50, deadline=None)
    @given(page_specs)
    def test_one_page_per_domain_language_in_training(self, specs):
        corpus = _corpus(specs)
        manifest = build_split(corpus)
        by_id = corpus.by_id()
        keys = [(by_id[i].root_domain, by_id[i].language) for i in manifest.training]
        assert len(keys) == len(set(keys))

    @settings(max_examples=50, deadline=None)
    @given(page_specs)
    def test_deterministic(self, specs):
        corpus = _corpus(specs)
        assert build_split(corpus) == build_split(corpus)


class TestHistograms:
    def test_bins(self):
        assert histogram_bins() == ["5", "10", "15", "20", "25", "30", "30+"]

    def test_percentages(self):
        pages = [build_page(f"https://www.h{i}.com/", "en", [(f"Q{k}?", "A") for k in range(size)])
                 for i, size in enumerate([1, 5, 6, 31])]
        hist = pairs_per_page_histogram(pages)
        assert hist["5"] == 50.0
        assert hist["10"] == 25.0
        assert hist["30+"] == 25.0
        assert sum(hist.values()) == pytest.approx(100.0)

    def test_empty(self):
        assert pairs_per_page_histogram([]) == {}

    def test_split_histograms(self, expedia):
        hist = split_histograms(expedia, build_split(expedia))
        assert set(hist) == {"training", "validation"}
        assert hist["validation"]["5"] == pytest.approx(100.0 * 2 / 3)
