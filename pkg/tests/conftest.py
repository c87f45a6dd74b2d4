"""Shared fixtures: one generated fixture tree per session plus small corpora."""
import json

import pytest

from app.services.corpus import build_page, read_corpus
from app.services.fixtures import generate_fixtures


@pytest.fixture(scope="session")
def fixture_tree(tmp_path_factory):
    return generate_fixtures(tmp_path_factory.mktemp("fixtures"), seed=1)


@pytest.fixture(scope="session")
def oracle(fixture_tree):
    def load(name):
        return json.loads((fixture_tree.root / "oracles" / f"{name}.json").read_text(encoding="utf-8"))
    return load


@pytest.fixture
def hotels(fixture_tree):
    return read_corpus(fixture_tree["hotels"])


@pytest.fixture
def expedia(fixture_tree):
    return read_corpus(fixture_tree["expedia"])


@pytest.fixture
def separable(fixture_tree):
    return read_corpus(fixture_tree["separable"])


@pytest.fixture
def small_page():
    return build_page("https://www.example.com/faq", "en", [
        ("Does the hotel have an airport shuttle?", "The shuttle leaves every hour from the main entrance."),
        ("Is breakfast included?", "Breakfast is served every morning in the restaurant."),
        ("Can I bring my dog?", "Dogs are welcome for a small cleaning fee."),
    ])
