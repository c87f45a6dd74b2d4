"""
FAQ extraction from HTML pages.

JSON-LD FAQPage markup -> RawFaqItem -> noise filters -> per-pair language
tag -> FaqPages grouped by (url, language).

Accepted JSON-LD shapes: a top-level object, a top-level array, and
`@graph` containers; `@type` may be a string or a list. Anything else is
skipped rather than guessed at.
"""
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

from bs4 import BeautifulSoup, SoupStrainer

from app.errors import InvalidUrlError
from app.schemas.corpus import FaqPage
from app.services.corpus import CODE_PREFIXES, QUESTION_MARKS, Corpus, build_page
from app.services.domains import resolve_root_domain
from app.services.language_id import UNDETERMINED, LanguageClassifier, LanguageTag
from app.services.parallel import ordered_map
from app.services.stage_log import StageSummary
from app.services.warc_reader import IngestStats, WarcReader, html_responses
from app.utils.text import normalize_text

logger = logging.getLogger(__name__)

DEFAULT_LANGUAGE_FLOOR = 250

# Reject reason codes
NO_QUESTION_MARK = "no_question_mark"
CODE_LIKE_PREFIX = "code_like_prefix"
EMPTY_TEXT = "empty_text"

HTML_PARSER = "html.parser"
LD_JSON_TYPE = "application/ld+json"
_NON_TEXT_TAGS = ["script", "style", "noscript", "template"]


@dataclass(frozen=True)
class RawFaqItem:
    question_text: str
    answer_text: str
    source_url: str
    item_index: int = 0  # position among the page's extracted items


@dataclass(frozen=True)
class FilterDecision:
    accepted: bool
    reason: Optional[str] = None


@dataclass
class ExtractionStats:
    """Counters for the extract stage."""
    html_pages: int = 0
    duplicate_urls: int = 0
    bad_urls: int = 0
    json_blocks: int = 0
    json_blocks_skipped: int = 0
    items: int = 0
    accepted: int = 0
    rejected: Counter = field(default_factory=Counter)
    und_pairs: int = 0
    below_floor_pairs: int = 0
    dropped_languages: List[str] = field(default_factory=list)
    pages: int = 0
    ingest: IngestStats = field(default_factory=IngestStats)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "warc_records": self.ingest.records,
            "warc_skipped": self.ingest.skipped,
            "unsupported_encoding": self.ingest.unsupported_encoding,
            "non_html": self.ingest.non_html,
            "html_pages": self.html_pages,
            "duplicate_urls": self.duplicate_urls,
            "bad_urls": self.bad_urls,
            "json_blocks": self.json_blocks,
            "json_blocks_skipped": self.json_blocks_skipped,
            "items": self.items,
            "accepted": self.accepted,
            "rejected": dict(sorted(self.rejected.items())),
            "und_pairs": self.und_pairs,
            "below_floor_pairs": self.below_floor_pairs,
            "dropped_languages": self.dropped_languages,
            "pages": self.pages,
        }


# ═══════════════════════════════════════════════════════════════════════════
# JSON-LD
# ═══════════════════════════════════════════════════════════════════════════

def strip_html(text: str) -> str:
    """Drop script/style elements, join the remaining text nodes with spaces, decode entities, normalize."""
    if "<" not in text and "&" not in text:
        return normalize_text(text)
    soup = BeautifulSoup(text, HTML_PARSER)
    for tag in soup(_NON_TEXT_TAGS):
        tag.decompose()
    return normalize_text(soup.get_text(" "))


def _is_ld_json(value: Optional[str]) -> bool:
    return value is not None and value.strip().lower() == LD_JSON_TYPE


def ld_json_blocks(html: str) -> List[str]:
    """Bodies of the page's `<script type="application/ld+json">` elements, in document order."""
    soup = BeautifulSoup(html, HTML_PARSER, parse_only=SoupStrainer("script", type=_is_ld_json))
    return [script.string or "" for script in soup.find_all("script")]


def _has_type(node: Dict[str, Any], wanted: str) -> bool:
    t = node.get("@type")
    if isinstance(t, str):
        return t == wanted
    if isinstance(t, list):
        return wanted in t
    return False


def _faq_pages(node: Any) -> Iterator[Dict[str, Any]]:
    if isinstance(node, list):
        for child in node:
            yield from _faq_pages(child)
    elif isinstance(node, dict):
        if _has_type(node, "FAQPage"):
            yield node
        graph = node.get("@graph")
        if isinstance(graph, list):
            for child in graph:
                yield from _faq_pages(child)


def _answer_text(question: Dict[str, Any]) -> Optional[str]:
    answer = question.get("acceptedAnswer")
    if answer is None:
        answer = question.get("suggestedAnswer")
    if isinstance(answer, list):
        answer = answer[0] if answer else None
    if isinstance(answer, dict):
        text = answer.get("text")
        return text if isinstance(text, str) else None
    return None


def extract_jsonld_faq(html: str, url: str, stats: Optional[ExtractionStats] = None) -> List[RawFaqItem]:
    """Every Question of every FAQPage in the page's JSON-LD blocks, in markup order."""
    stats = stats if stats is not None else ExtractionStats()
    items: List[RawFaqItem] = []
    for block in ld_json_blocks(html):
        stats.json_blocks += 1
        try:
            data = json.loads(block.strip())
        except json.JSONDecodeError as e:
            stats.json_blocks_skipped += 1
            logger.debug(f"{url}: skipping unparseable JSON-LD block: {e}")
            continue

        for faq in _faq_pages(data):
            entities = faq.get("mainEntity")
            if isinstance(entities, dict):
                entities = [entities]
            if not isinstance(entities, list):
                continue
            for entity in entities:
                if not isinstance(entity, dict) or not _has_type(entity, "Question"):
                    continue
                name = entity.get("name")
                answer = _answer_text(entity)
                if not isinstance(name, str) or answer is None:
                    continue
                question_text, answer_text = strip_html(name), strip_html(answer)
                if not question_text or not answer_text:
                    stats.rejected[EMPTY_TEXT] += 1
                    continue
                items.append(RawFaqItem(question_text, answer_text, url, item_index=len(items)))
    stats.items += len(items)
    return items


# ═══════════════════════════════════════════════════════════════════════════
# FILTERS AND GROUPING
# ═══════════════════════════════════════════════════════════════════════════

def filter_pair(item: RawFaqItem) -> FilterDecision:
    """Question-mark rule then code-like-prefix rule."""
    if not item.question_text or not item.answer_text:
        return FilterDecision(False, EMPTY_TEXT)
    if not any(mark in item.question_text for mark in QUESTION_MARKS):
        return FilterDecision(False, NO_QUESTION_MARK)
    if item.question_text.startswith(CODE_PREFIXES) or item.answer_text.startswith(CODE_PREFIXES):
        return FilterDecision(False, CODE_LIKE_PREFIX)
    return FilterDecision(True)


def assemble_pages(
    items: Sequence[Tuple[RawFaqItem, LanguageTag]],
    language_floor: int = DEFAULT_LANGUAGE_FLOOR,
    stats: Optional[ExtractionStats] = None,
) -> List[FaqPage]:
    """Group tagged items by (url, language); result sorted by (url, language)."""
    stats = stats if stats is not None else ExtractionStats()
    tagged = []
    for item, tag in items:
        if tag.code == UNDETERMINED:
            stats.und_pairs += 1
            continue
        tagged.append((item, tag.code))

    per_language = Counter(code for _, code in tagged)
    kept_languages = {code for code, n in per_language.items() if n >= language_floor}
    for code in sorted(set(per_language) - kept_languages):
        logger.warning(f"Dropping language '{code}': {per_language[code]} pairs < floor {language_floor}")
        stats.dropped_languages.append(code)
        stats.below_floor_pairs += per_language[code]

    groups: Dict[Tuple[str, str], List[Tuple[str, str]]] = {}
    for item, code in tagged:
        if code in kept_languages:
            groups.setdefault((item.source_url, code), []).append((item.question_text, item.answer_text))

    pages = [build_page(url, code, pairs) for (url, code), pairs in sorted(groups.items())]
    stats.pages = len(pages)
    return pages


# ═══════════════════════════════════════════════════════════════════════════
# STAGE
# ═══════════════════════════════════════════════════════════════════════════

@dataclass
class _PageResult:
    items: List[Tuple[RawFaqItem, LanguageTag]]
    stats: ExtractionStats


def _process_page(url: str, html: str, classifier: LanguageClassifier) -> _PageResult:
    local = ExtractionStats()
    kept = []
    for item in extract_jsonld_faq(html, url, local):
        decision = filter_pair(item)
        if not decision.accepted:
            local.rejected[decision.reason] += 1
            continue
        local.accepted += 1
        tag = classifier.classify(
            f"{item.question_text} {item.answer_text}", url=url, pair_index=item.item_index
        )
        kept.append((item, tag))
    return _PageResult(kept, local)


def _merge(total: ExtractionStats, part: ExtractionStats) -> None:
    total.json_blocks += part.json_blocks
    total.json_blocks_skipped += part.json_blocks_skipped
    total.items += part.items
    total.accepted += part.accepted
    total.rejected.update(part.rejected)


def _unique_pages(paths: Iterable[Union[str, Path]], stats: ExtractionStats) -> Iterator[Tuple[str, str]]:
    seen = set()
    for path in paths:
        reader = WarcReader(path)
        reader.stats = stats.ingest
        for url, html in html_responses(reader, stats.ingest):
            if url in seen:
                stats.duplicate_urls += 1
                logger.warning(f"Skipping repeated capture of {url}")
                continue
            seen.add(url)
            try:
                resolve_root_domain(url)
            except InvalidUrlError as e:
                stats.bad_urls += 1
                logger.warning(f"Skipping page: {e}")
                continue
            stats.html_pages += 1
            yield url, html


def extract_corpus(
    warc_paths: Sequence[Union[str, Path]],
    classifier: LanguageClassifier,
    language_floor: int = DEFAULT_LANGUAGE_FLOOR,
    threads: int = 1,
    chunk_size: int = 256,
) -> Tuple[Corpus, ExtractionStats]:
    """Run the extract stage over WARC files; deterministic for any thread count."""
    summary = StageSummary("extract")
    stats = ExtractionStats()
    tagged: List[Tuple[RawFaqItem, LanguageTag]] = []

    chunk: List[Tuple[str, str]] = []

    def flush():
        results = ordered_map(lambda page: _process_page(page[0], page[1], classifier), chunk, threads)
        for result in results:
            _merge(stats, result.stats)
            tagged.extend(result.items)
        chunk.clear()

    for page in _unique_pages(warc_paths, stats):
        chunk.append(page)
        if len(chunk) >= chunk_size:
            flush()
    flush()

    pages = assemble_pages(tagged, language_floor, stats)
    corpus = Corpus(tuple(pages))
    summary.update(**stats.to_dict(), pairs=corpus.total_pairs)
    summary.log()
    return corpus, stats
