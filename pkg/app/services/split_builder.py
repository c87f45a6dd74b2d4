"""
Train/validation split construction.

Per language, in sorted language order:
  1. candidates: pages whose root domain is seen with exactly one language
     anywhere in the corpus
  2. candidates sorted by pair count descending, ties by page_id
  3. greedy fill of validation, skipping pages whose domain already holds
     `max_pages_per_domain` validation pages, stopping after the page that
     reaches validation_fraction x the language's pair total
  4. every page of a validation domain is barred from training
  5. optionally keep only the largest page per (domain, language) in training

Pages that end up in neither split are listed under `excluded` so the three
lists always partition the corpus.
"""
import logging
from collections import Counter
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Set

from app.config import DEFAULT_SPLIT_SEED
from app.errors import ConfigurationError
from app.schemas.corpus import FaqPage
from app.schemas.reports import DomainShare, LanguageSplit, SplitManifest
from app.services.corpus import Corpus
from app.services.domains import root_domain_of
from app.services.stage_log import StageSummary

logger = logging.getLogger(__name__)

__all__ = [
    "SplitConfig",
    "build_split",
    "pairs_per_page_histogram",
    "split_histograms",
    "root_domain_of",
]

HISTOGRAM_BIN_WIDTH = 5
HISTOGRAM_LAST_BIN = 30
MIN_TARGET_SHARE = 0.01


@dataclass(frozen=True)
class SplitConfig:
    validation_fraction: float = 0.10
    max_pages_per_domain: int = 3
    one_page_per_domain_training: bool = True

    def __post_init__(self):
        if not 0.0 < self.validation_fraction < 1.0:
            raise ConfigurationError("validation_fraction must be in (0, 1)")
        if self.max_pages_per_domain < 1:
            raise ConfigurationError("max_pages_per_domain must be >= 1")


def _domain_languages(pages: Iterable[FaqPage]) -> Dict[str, Set[str]]:
    languages: Dict[str, Set[str]] = {}
    for page in pages:
        languages.setdefault(page.root_domain, set()).add(page.language)
    return languages


def _select_validation(
    pages: Sequence[FaqPage],
    single_language_domains: Set[str],
    target: float,
    cap: int,
) -> List[FaqPage]:
    candidates = sorted(
        (p for p in pages if p.root_domain in single_language_domains),
        key=lambda p: (-p.size, p.page_id),
    )
    chosen: List[FaqPage] = []
    per_domain: Counter = Counter()
    achieved = 0
    for page in candidates:
        if achieved >= target:
            break
        if per_domain[page.root_domain] >= cap:
            continue
        chosen.append(page)
        per_domain[page.root_domain] += 1
        achieved += page.size
    return chosen


def _largest_per_domain(pages: Iterable[FaqPage]) -> Set[str]:
    best: Dict[tuple, FaqPage] = {}
    for page in pages:
        key = (page.root_domain, page.language)
        current = best.get(key)
        if current is None or (-page.size, page.page_id) < (-current.size, current.page_id):
            best[key] = page
    return {p.page_id for p in best.values()}


def _largest_domain_share(pages: Sequence[FaqPage]) -> DomainShare:
    if not pages:
        return DomainShare()
    counts = Counter(p.root_domain for p in pages)
    domain, count = min(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return DomainShare(domain=domain, share=count / len(pages))


def build_split(
    corpus: Corpus,
    cfg: Optional[SplitConfig] = None,
    seed: int = DEFAULT_SPLIT_SEED,
) -> SplitManifest:
    """
    Assign every page to validation, training or excluded.

    Selection is fully determined by the sort order above; `seed` is echoed
    into the manifest so every artifact records the run's seeds.
    """
    cfg = cfg or SplitConfig()
    summary = StageSummary("split")
    domain_langs = _domain_languages(corpus.pages)
    single_language = {d for d, langs in domain_langs.items() if len(langs) == 1}

    by_language: Dict[str, List[FaqPage]] = {}
    for page in corpus.pages:
        by_language.setdefault(page.language, []).append(page)

    validation: List[FaqPage] = []
    per_language: Dict[str, LanguageSplit] = {}
    for language in sorted(by_language):
        pages = by_language[language]
        total = sum(p.size for p in pages)
        target = cfg.validation_fraction * total
        chosen = _select_validation(pages, single_language, target, cfg.max_pages_per_domain)
        achieved = sum(p.size for p in chosen)
        warning = None
        if achieved < MIN_TARGET_SHARE * target:
            warning = (
                f"validation candidates reach {achieved} pairs, below 1% of the "
                f"{target:.1f}-pair target"
            )
            logger.warning(f"Split '{language}': {warning}")
        validation.extend(chosen)
        per_language[language] = LanguageSplit(
            target_pairs=target,
            achieved_pairs=achieved,
            validation_pages=len(chosen),
            warning=warning,
        )

    validation_ids = {p.page_id for p in validation}
    validation_domains = {p.root_domain for p in validation}
    training_pool = [p for p in corpus.pages if p.root_domain not in validation_domains]
    if cfg.one_page_per_domain_training:
        keep = _largest_per_domain(training_pool)
        training = [p for p in training_pool if p.page_id in keep]
    else:
        training = training_pool
    training_ids = {p.page_id for p in training}
    excluded = [p for p in corpus.pages if p.page_id not in validation_ids and p.page_id not in training_ids]

    for language, row in per_language.items():
        row.training_pages = sum(1 for p in training if p.language == language)

    manifest = SplitManifest(
        config={
            "validation_fraction": cfg.validation_fraction,
            "max_pages_per_domain": cfg.max_pages_per_domain,
            "one_page_per_domain_training": cfg.one_page_per_domain_training,
            "seed": seed,
        },
        validation=[p.page_id for p in validation],
        training=[p.page_id for p in training],
        excluded=[p.page_id for p in excluded],
        per_language=per_language,
        domain_share={
            "training": _largest_domain_share(training),
            "validation": _largest_domain_share(validation),
        },
    )
    summary.update(
        validation_pages=len(validation),
        training_pages=len(training),
        excluded_pages=len(excluded),
        languages=len(per_language),
    )
    summary.log()
    return manifest


# ═══════════════════════════════════════════════════════════════════════════
# PAIRS-PER-PAGE HISTOGRAM
# ═══════════════════════════════════════════════════════════════════════════

def histogram_bins(bin_width: int = HISTOGRAM_BIN_WIDTH, last_bin: int = HISTOGRAM_LAST_BIN) -> List[str]:
    return [str(upper) for upper in range(bin_width, last_bin + 1, bin_width)] + [f"{last_bin}+"]


def _bin_of(size: int, bin_width: int, last_bin: int) -> str:
    if size > last_bin:
        return f"{last_bin}+"
    upper = -(-size // bin_width) * bin_width
    return str(max(upper, bin_width))


def pairs_per_page_histogram(
    pages: Sequence[FaqPage],
    bin_width: int = HISTOGRAM_BIN_WIDTH,
    last_bin: int = HISTOGRAM_LAST_BIN,
) -> Dict[str, float]:
    """Percentage of pages per size bin ("5" = 1..5 pairs, ..., "30+")."""
    if not pages:
        return {}
    counts = Counter(_bin_of(p.size, bin_width, last_bin) for p in pages)
    return {b: 100.0 * counts.get(b, 0) / len(pages) for b in histogram_bins(bin_width, last_bin)}


def split_histograms(corpus: Corpus, manifest: SplitManifest) -> Dict[str, Dict[str, float]]:
    by_id = corpus.by_id()
    return {
        which: pairs_per_page_histogram([by_id[i] for i in manifest.page_ids(which) if i in by_id])
        for which in ("training", "validation")
    }
