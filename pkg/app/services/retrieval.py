"""
Per-page FAQ retrieval scoring and evaluation.

The candidate set for a query is always the answers of the query's own page.
Every scorer returns a (queries x answers) matrix of finite reals; the gold
answer of question i is answer i.

Rank of the gold answer g in row s:
    1 + #{j : s_j > s_g} + #{j < g : s_j == s_g}
so ties go against later gold indices.
"""
import json
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import ValidationError
from sklearn.feature_extraction.text import TfidfVectorizer

from app.config import DEFAULT_EVAL_SEED
from app.errors import DataError, ScoringError
from app.schemas.corpus import FaqPage, FaqPair
from app.schemas.interchange import QueryMapRow
from app.schemas.reports import EvalReport, MetricRow, PageDiagnostics
from app.services.embedding_table import ANSWER, QUESTION, EmbeddingTable
from app.services.parallel import ordered_map
from app.services.stage_log import StageSummary
from app.services.toy_trainer import LinearBiEncoder
from app.utils.text import normalize_text

logger = logging.getLogger(__name__)

TFIDF_NGRAM_RANGE = (1, 3)

QueryMap = Mapping[Tuple[str, int], str]


# ═══════════════════════════════════════════════════════════════════════════
# SCORERS
# ═══════════════════════════════════════════════════════════════════════════

class Scorer(ABC):
    """h(q_i, a_j) over one page's answers."""

    kind: str = ""

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind}

    def score_page(self, page: FaqPage) -> np.ndarray:
        """Matrix for the page's own questions."""
        return self.score_queries(page, page.questions)

    @abstractmethod
    def score_queries(self, page: FaqPage, queries: Sequence[str]) -> np.ndarray:
        """Matrix for arbitrary query texts against the page's answers."""


class TfidfScorer(Scorer):
    """One tf-idf model per page fitted on its answers (word 1-3 grams, smooth idf, L2)."""

    kind = "tfidf"

    def score_queries(self, page: FaqPage, queries: Sequence[str]) -> np.ndarray:
        vectorizer = TfidfVectorizer(ngram_range=TFIDF_NGRAM_RANGE)
        try:
            answers = vectorizer.fit_transform(page.answers)
        except ValueError:
            # Answers without a single word token: nothing to match on.
            return np.zeros((len(queries), page.size))
        return (vectorizer.transform(queries) @ answers.T).toarray()


class EmbeddingScorer(Scorer):
    """
    Dot products against precomputed answer vectors.

    With an encoder, query vectors are computed from the query texts, so a
    page whose questions were substituted is scored on the new texts. Without
    one, only the page's stored questions can be scored.
    """

    kind = "embedding"

    def __init__(self, table: EmbeddingTable, encoder: Optional[LinearBiEncoder] = None):
        self.table = table
        self.encoder = encoder

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind, "dim": self.table.dim, "encoder": self.encoder is not None}

    def _answers(self, page: FaqPage) -> np.ndarray:
        return self.table.matrix(page.page_id, ANSWER, page.size).astype(np.float64)

    def score_queries(self, page: FaqPage, queries: Sequence[str]) -> np.ndarray:
        if self.encoder is not None:
            return self.encoder.encode_questions(queries) @ self._answers(page).T
        if list(queries) != page.questions:
            raise ScoringError("embedding scorer needs an encoder to score free-text queries")
        questions = self.table.matrix(page.page_id, QUESTION, page.size).astype(np.float64)
        return questions @ self._answers(page).T


class ModelScorer(Scorer):
    """Scores with a toy bi-encoder directly."""

    kind = "model"

    def __init__(self, model: LinearBiEncoder):
        self.model = model

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind, "dim": self.model.dim, "features": self.model.featurizer.dim}

    def score_queries(self, page: FaqPage, queries: Sequence[str]) -> np.ndarray:
        return self.model.encode_questions(queries) @ self.model.encode_answers(page.answers).T


class RandomScorer(Scorer):
    """Uniform scores seeded per (seed, page), independent of query text."""

    kind = "random"

    def __init__(self, seed: int = DEFAULT_EVAL_SEED):
        self.seed = seed

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind, "seed": self.seed}

    def score_queries(self, page: FaqPage, queries: Sequence[str]) -> np.ndarray:
        rng = np.random.default_rng([self.seed, int(page.page_id, 16)])
        return rng.random((len(queries), page.size))


def tfidf_score_page(page: FaqPage) -> np.ndarray:
    return TfidfScorer().score_page(page)


def embedding_score_page(page: FaqPage, table: EmbeddingTable) -> np.ndarray:
    return EmbeddingScorer(table).score_page(page)


# ═══════════════════════════════════════════════════════════════════════════
# RANKS AND METRICS
# ═══════════════════════════════════════════════════════════════════════════

@dataclass
class RankResult:
    ranks: np.ndarray
    ties: int  # queries whose gold score equals another candidate's


def rank_and_score(matrix: np.ndarray, gold: Optional[Sequence[int]] = None) -> RankResult:
    """Rank of the gold answer per row; gold defaults to the diagonal."""
    scores = np.asarray(matrix, dtype=np.float64)
    if scores.ndim != 2:
        raise ScoringError(f"score matrix must be 2-D, got shape {scores.shape}")
    if not np.all(np.isfinite(scores)):
        raise ScoringError("score matrix contains NaN or inf")
    n_rows, n_cols = scores.shape
    gold_idx = np.arange(n_rows) if gold is None else np.asarray(gold, dtype=np.int64)
    if gold_idx.shape != (n_rows,) or (n_rows and (gold_idx.min() < 0 or gold_idx.max() >= n_cols)):
        raise ScoringError("gold index out of range")

    gold_scores = scores[np.arange(n_rows), gold_idx][:, None]
    columns = np.arange(n_cols)[None, :]
    higher = (scores > gold_scores).sum(axis=1)
    equal = scores == gold_scores
    equal_before = (equal & (columns < gold_idx[:, None])).sum(axis=1)
    ranks = 1 + higher + equal_before
    ties = int(((equal.sum(axis=1) - 1) > 0).sum())
    return RankResult(ranks=ranks.astype(np.int64), ties=ties)


def compute_metrics(ranks: Sequence[int], pages: int = 0) -> MetricRow:
    """Micro-averaged P@1, MRR and R@5 over all given query ranks."""
    r = np.asarray(ranks, dtype=np.float64)
    if r.size == 0:
        raise ScoringError("cannot compute metrics over an empty rank list")
    if np.any(r < 1):
        raise ScoringError("ranks must be >= 1")
    return MetricRow(
        p_at_1=float(np.mean(r == 1)),
        mrr=float(np.mean(1.0 / r)),
        r_at_5=float(np.mean(r <= 5)),
        queries=int(r.size),
        pages=pages,
    )


def expected_random_mrr(n: int) -> float:
    """H_n / n: expected reciprocal rank of one gold among n uniformly ranked candidates."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return sum(1.0 / k for k in range(1, n + 1)) / n


# ═══════════════════════════════════════════════════════════════════════════
# EVALUATION
# ═══════════════════════════════════════════════════════════════════════════

def _evaluate_page(page: FaqPage, scorer: Scorer) -> Tuple[FaqPage, RankResult]:
    return page, rank_and_score(scorer.score_page(page))


def evaluate(
    pages: Sequence[FaqPage],
    scorer: Scorer,
    threads: int = 1,
    config: Optional[Dict[str, Any]] = None,
) -> EvalReport:
    """Score every page, reduce in page_id order, report per language and overall."""
    ordered = sorted(pages, key=lambda p: p.page_id)
    if not ordered:
        raise ScoringError("no pages to evaluate")
    summary = StageSummary("eval")
    results = ordered_map(lambda p: _evaluate_page(p, scorer), ordered, threads)

    per_language_ranks: Dict[str, List[int]] = {}
    per_language_pages: Dict[str, int] = {}
    all_ranks: List[int] = []
    diagnostics: List[PageDiagnostics] = []
    ties = 0
    for page, result in results:
        ranks = [int(r) for r in result.ranks]
        per_language_ranks.setdefault(page.language, []).extend(ranks)
        per_language_pages[page.language] = per_language_pages.get(page.language, 0) + 1
        all_ranks.extend(ranks)
        ties += result.ties
        page_row = compute_metrics(ranks)
        diagnostics.append(PageDiagnostics(
            page=page.page_id,
            language=page.language,
            queries=len(ranks),
            p_at_1=page_row.p_at_1,
            mrr=page_row.mrr,
            ties=result.ties,
        ))

    report = EvalReport(
        scorer=scorer.kind,
        config={**scorer.describe(), **(config or {})},
        overall=compute_metrics(all_ranks, pages=len(ordered)),
        per_language={
            lang: compute_metrics(per_language_ranks[lang], pages=per_language_pages[lang])
            for lang in sorted(per_language_ranks)
        },
        pages=diagnostics,
        ties=ties,
    )
    summary.update(
        scorer=scorer.kind,
        pages=len(ordered),
        queries=report.overall.queries,
        p_at_1=round(report.overall.p_at_1, 4),
        mrr=round(report.overall.mrr, 4),
        r_at_5=round(report.overall.r_at_5, 4),
        ties=ties,
    )
    summary.log()
    return report


def random_baseline(pages: Sequence[FaqPage], seed: int = DEFAULT_EVAL_SEED, threads: int = 1) -> EvalReport:
    return evaluate(pages, RandomScorer(seed), threads=threads)


def compare_reports(base: EvalReport, other: EvalReport) -> Dict[str, Dict[str, float]]:
    """MRR per language (and overall) of both reports with the delta other - base."""
    rows: Dict[str, Dict[str, float]] = {}
    for lang in sorted(set(base.per_language) & set(other.per_language)):
        b, o = base.per_language[lang].mrr, other.per_language[lang].mrr
        rows[lang] = {"base_mrr": b, "other_mrr": o, "delta": o - b}
    rows["overall"] = {
        "base_mrr": base.overall.mrr,
        "other_mrr": other.overall.mrr,
        "delta": other.overall.mrr - base.overall.mrr,
    }
    return rows


# ═══════════════════════════════════════════════════════════════════════════
# QUERY SUBSTITUTION AND AD-HOC RANKING
# ═══════════════════════════════════════════════════════════════════════════

def load_query_map(path: Union[str, Path]) -> Dict[Tuple[str, int], str]:
    queries: Dict[Tuple[str, int], str] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line_no, raw in enumerate(f, 1):
            if not raw.strip():
                continue
            try:
                row = QueryMapRow.model_validate(json.loads(raw))
            except (json.JSONDecodeError, ValidationError) as e:
                raise DataError(f"{path}:{line_no}: malformed query map line: {e}") from e
            queries[(row.page, row.index)] = row.text
    logger.info(f"Loaded {len(queries)} substitute queries from {path}")
    return queries


def substitute_queries(pages: Sequence[FaqPage], query_map: QueryMap, strict: bool = True) -> List[FaqPage]:
    """Replace question texts, keeping answers and candidate sets untouched."""
    result: List[FaqPage] = []
    for page in pages:
        pairs = []
        for i, pair in enumerate(page.pairs):
            text = query_map.get((page.page_id, i))
            if text is None:
                if strict:
                    raise DataError(f"no substitute query for page {page.page_id} pair {i}")
                text = pair.question
            pairs.append(FaqPair(question=normalize_text(text), answer=pair.answer))
        result.append(page.model_copy(update={"pairs": pairs}))
    return result


@dataclass(frozen=True)
class RankedAnswer:
    index: int
    answer: str
    score: float


def rank_answers(query: str, page: FaqPage, scorer: Scorer) -> List[RankedAnswer]:
    """The page's answers by descending score; ties keep answer order."""
    scores = np.asarray(scorer.score_queries(page, [query]), dtype=np.float64)[0]
    if not np.all(np.isfinite(scores)):
        raise ScoringError("score vector contains NaN or inf")
    order = sorted(range(page.size), key=lambda j: (-scores[j], j))
    return [RankedAnswer(index=j, answer=page.answers[j], score=float(scores[j])) for j in order]
