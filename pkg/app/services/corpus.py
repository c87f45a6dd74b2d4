"""
Canonical corpus model and the JSON Lines corpus format.

Every stage reads and writes pages through this module. A corpus file holds
one FaqPage per line (see app.schemas.corpus); line order is page order and
pair order within a page is the source order, never sorted.
"""
import json
import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple, Union

from pydantic import ValidationError

from app.errors import CorpusFormatError, DuplicatePageError, InvalidUrlError
from app.schemas.corpus import FaqPage, FaqPair
from app.services.domains import root_domain_of
from app.utils.hashing import fnv1a_64_text
from app.utils.text import normalize_text

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

QUESTION_MARKS = ("?", "؟")
CODE_PREFIXES = ("<", "{", "[")

LANGUAGE_NAMES: Dict[str, str] = {
    "en": "English",
    "de": "German",
    "es": "Spanish",
    "fr": "French",
    "it": "Italian",
    "nl": "Dutch",
    "pt": "Portuguese",
    "tr": "Turkish",
    "ru": "Russian",
    "pl": "Polish",
    "id": "Indonesian",
    "no": "Norwegian",
    "sv": "Swedish",
    "da": "Danish",
    "vi": "Vietnamese",
    "fi": "Finnish",
    "ro": "Romanian",
    "cs": "Czech",
    "he": "Hebrew",
    "hu": "Hungarian",
    "hr": "Croatian",
}


def page_id_for(url: str, language: str) -> str:
    """Lowercase hex FNV-1a-64 of url + "\\n" + language."""
    return f"{fnv1a_64_text(url + chr(10) + language):016x}"


def build_page(url: str, language: str, pairs: Iterable[Tuple[str, str]]) -> FaqPage:
    """Construct a page with derived id and root domain; texts normalized."""
    return FaqPage(
        page_id=page_id_for(url, language),
        url=url,
        root_domain=root_domain_of(url),
        language=language,
        pairs=[FaqPair(question=normalize_text(q), answer=normalize_text(a)) for q, a in pairs],
    )


@dataclass(frozen=True)
class LanguageTally:
    pairs: int = 0
    pages: int = 0
    domains: int = 0


@dataclass(frozen=True)
class Corpus:
    """Immutable ordered collection of FaqPages with derived tallies."""
    pages: Tuple[FaqPage, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "pages", tuple(self.pages))

    def __len__(self) -> int:
        return len(self.pages)

    def __iter__(self):
        return iter(self.pages)

    @cached_property
    def tallies(self) -> Dict[str, LanguageTally]:
        pairs: Dict[str, int] = {}
        pages: Dict[str, int] = {}
        domains: Dict[str, Set[str]] = {}
        for page in self.pages:
            pairs[page.language] = pairs.get(page.language, 0) + page.size
            pages[page.language] = pages.get(page.language, 0) + 1
            domains.setdefault(page.language, set()).add(page.root_domain)
        return {
            lang: LanguageTally(pairs=pairs[lang], pages=pages[lang], domains=len(domains[lang]))
            for lang in sorted(pairs)
        }

    @property
    def total_pairs(self) -> int:
        return sum(page.size for page in self.pages)

    def languages(self) -> List[str]:
        return sorted({page.language for page in self.pages})

    def by_id(self) -> Dict[str, FaqPage]:
        return {page.page_id: page for page in self.pages}

    def filter(self, page_ids: Iterable[str]) -> "Corpus":
        """Sub-corpus of the given ids, keeping corpus order."""
        wanted = set(page_ids)
        return Corpus(tuple(p for p in self.pages if p.page_id in wanted))


# ═══════════════════════════════════════════════════════════════════════════
# JSON LINES I/O
# ═══════════════════════════════════════════════════════════════════════════

def _parse_line(raw: str, line_no: int, path: PathLike) -> FaqPage:
    try:
        page = FaqPage.model_validate(json.loads(raw))
    except (json.JSONDecodeError, ValidationError) as e:
        raise CorpusFormatError(f"{path}:{line_no}: malformed corpus line: {e}") from e
    expected_id = page_id_for(page.url, page.language)
    if page.page_id != expected_id:
        raise CorpusFormatError(
            f"{path}:{line_no}: id {page.page_id} does not match url/language (expected {expected_id})"
        )
    try:
        expected_domain = root_domain_of(page.url)
    except InvalidUrlError as e:
        raise CorpusFormatError(f"{path}:{line_no}: {e}") from e
    if page.root_domain != expected_domain:
        raise CorpusFormatError(
            f"{path}:{line_no}: domain '{page.root_domain}' does not match url (expected '{expected_domain}')"
        )
    for i, pair in enumerate(page.pairs):
        problem = pair_problem(pair)
        if problem:
            raise CorpusFormatError(f"{path}:{line_no}: pair {i}: {problem}")
    return page


def pair_problem(pair: FaqPair) -> Optional[str]:
    """Why a stored pair breaks the corpus rules, or None."""
    for role, text in (("question", pair.question), ("answer", pair.answer)):
        if not text:
            return f"empty {role}"
        if normalize_text(text) != text:
            return f"{role} is not normalized: {text[:40]!r}"
        if text.startswith(CODE_PREFIXES):
            return f"{role} starts with {text[0]!r}"
    if not any(mark in pair.question for mark in QUESTION_MARKS):
        return f"question has no question mark: {pair.question[:40]!r}"
    return None


def read_corpus(path: PathLike) -> Corpus:
    """Read a corpus JSON Lines file; errors name the offending line."""
    pages: List[FaqPage] = []
    seen: Dict[Tuple[str, str], int] = {}
    with open(path, "r", encoding="utf-8", newline="\n") as f:
        for line_no, raw in enumerate(f, 1):
            if not raw.strip():
                continue
            page = _parse_line(raw, line_no, path)
            key = (page.url, page.language)
            if key in seen:
                raise DuplicatePageError(
                    f"{path}: lines {seen[key]} and {line_no} share url={page.url!r} language={page.language!r}"
                )
            seen[key] = line_no
            pages.append(page)
    corpus = Corpus(tuple(pages))
    logger.info(f"Read {len(corpus)} pages ({corpus.total_pairs} pairs) from {path}")
    return corpus


def write_corpus(corpus: Union[Corpus, Sequence[FaqPage]], path: PathLike) -> None:
    """Write one page per line, UTF-8, LF line endings."""
    pages = corpus.pages if isinstance(corpus, Corpus) else tuple(corpus)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for page in pages:
            f.write(json.dumps(page.to_record(), ensure_ascii=False) + "\n")
    logger.info(f"Wrote {len(pages)} pages to {path}")


# ═══════════════════════════════════════════════════════════════════════════
# SUMMARY STATISTICS
# ═══════════════════════════════════════════════════════════════════════════

@dataclass
class StatisticsRow:
    language: str
    name: str
    pairs: int
    pages: int
    domains: int
    pair_share: float


@dataclass
class CorpusStatistics:
    rows: List[StatisticsRow]
    total: StatisticsRow
    small_page_share: float  # share of pages with <= 5 pairs

    def to_dict(self) -> dict:
        return {
            "languages": [row.__dict__ for row in self.rows],
            "total": self.total.__dict__,
            "small_page_share": self.small_page_share,
        }


def corpus_statistics(corpus: Corpus) -> CorpusStatistics:
    """Per-language Pairs/Pages/Domains, largest language first."""
    total_pairs = corpus.total_pairs
    rows = [
        StatisticsRow(
            language=lang,
            name=LANGUAGE_NAMES.get(lang, lang),
            pairs=t.pairs,
            pages=t.pages,
            domains=t.domains,
            pair_share=t.pairs / total_pairs if total_pairs else 0.0,
        )
        for lang, t in corpus.tallies.items()
    ]
    rows.sort(key=lambda r: (-r.pairs, r.language))
    total = StatisticsRow(
        language="total",
        name="Total",
        pairs=total_pairs,
        pages=len(corpus),
        domains=len({p.root_domain for p in corpus.pages}),
        pair_share=1.0 if total_pairs else 0.0,
    )
    small = sum(1 for p in corpus.pages if p.size <= 5)
    return CorpusStatistics(
        rows=rows,
        total=total,
        small_page_share=small / len(corpus) if len(corpus) else 0.0,
    )


def format_statistics(stats: CorpusStatistics) -> str:
    """Plain-text table in the Lang./Pairs/Pages/Domains layout."""
    lines = [f"{'Lang.':<14}{'Pairs':>12}{'Pages':>12}{'Domains':>10}", "-" * 48]
    for row in stats.rows + [stats.total]:
        if row is stats.total:
            lines.append("-" * 48)
        lines.append(f"{row.name:<14}{row.pairs:>12,}{row.pages:>12,}{row.domains:>10,}")
    lines.append(f"\nPages with <= 5 pairs: {stats.small_page_share:.1%}")
    return "\n".join(lines)
