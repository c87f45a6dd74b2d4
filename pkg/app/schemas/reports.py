"""Pydantic models for the stage artifacts (reports and manifests)."""
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field


class DedupReport(BaseModel):
    """Outcome of near-duplicate elimination."""
    pages_before: int
    pages_after: int
    components: int
    size_histogram: Dict[str, int] = Field(default_factory=dict)
    candidate_pairs: int = 0
    verified_edges: int = 0
    config: Dict[str, Any] = Field(default_factory=dict)


class LanguageSplit(BaseModel):
    target_pairs: float
    achieved_pairs: int
    validation_pages: int = 0
    training_pages: int = 0
    warning: Optional[str] = None


class DomainShare(BaseModel):
    """Share of pages held by the single largest root domain."""
    domain: Optional[str] = None
    share: float = 0.0


class SplitManifest(BaseModel):
    """Train/validation assignment of page ids."""
    config: Dict[str, Any] = Field(default_factory=dict)
    validation: List[str] = Field(default_factory=list)
    training: List[str] = Field(default_factory=list)
    excluded: List[str] = Field(default_factory=list)
    per_language: Dict[str, LanguageSplit] = Field(default_factory=dict)
    domain_share: Dict[str, DomainShare] = Field(default_factory=dict)

    def page_ids(self, which: str) -> List[str]:
        if which not in ("validation", "training", "excluded"):
            raise ValueError(f"unknown split '{which}'")
        return list(getattr(self, which))


class MetricRow(BaseModel):
    """Micro-averaged metrics over every query of a group."""
    p_at_1: float
    mrr: float
    r_at_5: float
    queries: int
    pages: int = 0


class PageDiagnostics(BaseModel):
    page: str
    language: str
    queries: int
    p_at_1: float
    mrr: float
    ties: int = 0


class EvalReport(BaseModel):
    """Retrieval evaluation report."""
    scorer: str
    config: Dict[str, Any] = Field(default_factory=dict)
    overall: MetricRow
    per_language: Dict[str, MetricRow] = Field(default_factory=dict)
    pages: List[PageDiagnostics] = Field(default_factory=list)
    ties: int = 0
