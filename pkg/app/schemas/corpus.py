"""
Corpus interchange models.

One FaqPage per JSON Lines row:
  {"id": "<hex>", "url": "...", "domain": "<root domain>", "language": "<tag>",
   "pairs": [{"question": "...", "answer": "..."}]}
"""
from typing import List

from pydantic import BaseModel, ConfigDict, Field, field_validator


class FaqPair(BaseModel):
    """One question/answer pair, the atomic corpus unit."""
    model_config = ConfigDict(frozen=True)

    question: str
    answer: str


class FaqPage(BaseModel):
    """All pairs sharing a (source URL, language)."""
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    page_id: str = Field(..., alias="id")
    url: str
    root_domain: str = Field(..., alias="domain")
    language: str
    pairs: List[FaqPair]

    @field_validator("pairs")
    @classmethod
    def _non_empty(cls, v: List[FaqPair]) -> List[FaqPair]:
        if not v:
            raise ValueError("a page needs at least one pair")
        return v

    @property
    def size(self) -> int:
        return len(self.pairs)

    @property
    def questions(self) -> List[str]:
        return [p.question for p in self.pairs]

    @property
    def answers(self) -> List[str]:
        return [p.answer for p in self.pairs]

    def to_record(self) -> dict:
        """Dict in file key order (id, url, domain, language, pairs)."""
        return self.model_dump(by_alias=True)
