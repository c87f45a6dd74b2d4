"""
Per-pair language identification.

Two interchangeable classifiers:

- NgramLanguageClassifier: rank-order character n-gram profiles (n = 1..4,
  top 300 per language) compared by out-of-place distance. Profiles are
  built from the sample texts in app/data/language_samples/<code>.txt.
- PassThroughClassifier: tags supplied by an external tool, keyed by
  (url, pair_index), read from a JSON Lines language map.

Both answer "und" when they cannot decide.
"""
import json
import logging
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple, Union

from pydantic import ValidationError

from app.errors import ConfigurationError, DataError
from app.schemas.interchange import LanguageMapRow

logger = logging.getLogger(__name__)

UNDETERMINED = "und"
MAX_NGRAM = 4
PROFILE_SIZE = 300
DEFAULT_THRESHOLD = 0.5
SAMPLES_DIR = Path(__file__).resolve().parent.parent / "data" / "language_samples"

# Letters only: digits, punctuation and symbols carry no language signal.
_WORD_RE = re.compile(r"[^\W\d_]+", re.UNICODE)


@dataclass(frozen=True)
class LanguageTag:
    code: str
    confidence: float


def ngram_counts(text: str, max_n: int = MAX_NGRAM) -> Counter:
    counts: Counter = Counter()
    for word in _WORD_RE.findall(text.lower()):
        padded = f"_{word}_"
        for n in range(1, max_n + 1):
            for i in range(len(padded) - n + 1):
                counts[padded[i:i + n]] += 1
    return counts


def build_profile(text: str, size: int = PROFILE_SIZE, max_n: int = MAX_NGRAM) -> List[str]:
    """N-grams ranked by frequency, ties alphabetical, truncated to `size`."""
    ranked = sorted(ngram_counts(text, max_n).items(), key=lambda kv: (-kv[1], kv[0]))
    return [gram for gram, _ in ranked[:size]]


def out_of_place_distance(doc_profile: List[str], lang_ranks: Mapping[str, int], penalty: int = PROFILE_SIZE) -> int:
    distance = 0
    for rank, gram in enumerate(doc_profile):
        other = lang_ranks.get(gram)
        distance += penalty if other is None else abs(rank - other)
    return distance


class NgramLanguageClassifier:
    """Rank-order n-gram classifier over a fixed set of language profiles."""

    kind = "ngram"

    def __init__(self, profiles: Mapping[str, List[str]], threshold: float = DEFAULT_THRESHOLD):
        if not profiles:
            raise ConfigurationError("no language profiles loaded and no language map supplied")
        self.threshold = threshold
        self._ranks: Dict[str, Dict[str, int]] = {
            code: {gram: i for i, gram in enumerate(profile)}
            for code, profile in sorted(profiles.items())
        }

    @property
    def languages(self) -> List[str]:
        return list(self._ranks)

    @classmethod
    def from_texts(cls, texts: Mapping[str, str], threshold: float = DEFAULT_THRESHOLD) -> "NgramLanguageClassifier":
        return cls({code: build_profile(text) for code, text in texts.items()}, threshold)

    @classmethod
    def from_directory(cls, path: Union[str, Path] = SAMPLES_DIR, threshold: float = DEFAULT_THRESHOLD) -> "NgramLanguageClassifier":
        path = Path(path)
        texts = {f.stem: f.read_text(encoding="utf-8") for f in sorted(path.glob("*.txt"))} if path.is_dir() else {}
        if not texts:
            raise ConfigurationError(f"no language sample texts found in {path}")
        logger.info(f"Built {len(texts)} language profiles from {path}")
        return cls.from_texts(texts, threshold)

    def distances(self, text: str) -> List[Tuple[str, int]]:
        """(code, distance) for every profile, closest first."""
        doc = build_profile(text)
        scored = [(code, out_of_place_distance(doc, ranks)) for code, ranks in self._ranks.items()]
        return sorted(scored, key=lambda cd: (cd[1], cd[0]))

    def classify(self, text: str, url: Optional[str] = None, pair_index: Optional[int] = None) -> LanguageTag:
        doc = build_profile(text)
        if not doc:
            return LanguageTag(UNDETERMINED, 0.0)
        code, distance = self.distances(text)[0]
        confidence = 1.0 - distance / (len(doc) * PROFILE_SIZE)
        if confidence < self.threshold:
            return LanguageTag(UNDETERMINED, confidence)
        return LanguageTag(code, confidence)


class PassThroughClassifier:
    """Tags supplied externally; unknown (url, pair_index) keys are 'und'."""

    kind = "pass-through"

    def __init__(self, tags: Mapping[Tuple[str, int], str]):
        self._tags = dict(tags)
        self.misses = 0

    def __len__(self) -> int:
        return len(self._tags)

    def classify(self, text: str, url: Optional[str] = None, pair_index: Optional[int] = None) -> LanguageTag:
        code = self._tags.get((url, pair_index))
        if code is None:
            self.misses += 1
            return LanguageTag(UNDETERMINED, 0.0)
        return LanguageTag(code, 1.0)


LanguageClassifier = Union[NgramLanguageClassifier, PassThroughClassifier]


def load_language_map(path: Union[str, Path]) -> Dict[Tuple[str, int], str]:
    tags: Dict[Tuple[str, int], str] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line_no, raw in enumerate(f, 1):
            if not raw.strip():
                continue
            try:
                row = LanguageMapRow.model_validate(json.loads(raw))
            except (json.JSONDecodeError, ValidationError) as e:
                raise DataError(f"{path}:{line_no}: malformed language map line: {e}") from e
            tags[(row.url, row.pair_index)] = row.language
    logger.info(f"Loaded {len(tags)} language tags from {path}")
    return tags


def load_classifier(
    language_map_path: Optional[Union[str, Path]] = None,
    samples_dir: Optional[Union[str, Path]] = SAMPLES_DIR,
    threshold: float = DEFAULT_THRESHOLD,
) -> LanguageClassifier:
    """Pass-through when a map is given, else the built-in profiles."""
    if language_map_path:
        return PassThroughClassifier(load_language_map(language_map_path))
    if samples_dir is None:
        raise ConfigurationError("no language profiles loaded and no language map supplied")
    return NgramLanguageClassifier.from_directory(samples_dir, threshold)


_default_classifier: Optional[NgramLanguageClassifier] = None


def classify_language(text: str, classifier: Optional[LanguageClassifier] = None) -> LanguageTag:
    """Classify `text` (question + " " + answer) with the given or built-in classifier."""
    global _default_classifier
    if classifier is None:
        if _default_classifier is None:
            _default_classifier = NgramLanguageClassifier.from_directory()
        classifier = _default_classifier
    return classifier.classify(text)
