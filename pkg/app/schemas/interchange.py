"""
Row models for the JSON Lines interchange files.

  language map   {"url": "...", "pair_index": n, "language": "xx"}
  query map      {"page": id, "index": n, "text": "..."}
  embeddings     {"page": id, "role": "question"|"answer", "index": n, "vector": [...]}
  batches        {"language": "...", "entries": [{"page": id, "q": "...", "a": "..."}]}
"""
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field


class LanguageMapRow(BaseModel):
    url: str
    pair_index: int = Field(..., ge=0)
    language: str


class QueryMapRow(BaseModel):
    page: str
    index: int = Field(..., ge=0)
    text: str


class EmbeddingRow(BaseModel):
    page: str
    role: Literal["question", "answer"]
    index: int = Field(..., ge=0)
    vector: List[float]


class BatchEntryRow(BaseModel):
    page: str
    q: str
    a: str


class BatchRow(BaseModel):
    language: str
    entries: List[BatchEntryRow]


class BatchFileMeta(BaseModel):
    """Sidecar written next to a batch export."""
    seed: Optional[int] = None
    capacity: int
    batches: int
    entries: int
    partial_batches: int = 0
    languages: List[str] = Field(default_factory=list)


class ModelFile(BaseModel):
    """Serialized toy bi-encoder; W is row-major d x D."""
    model_config = ConfigDict(populate_by_name=True)

    d: int
    feature_dim: int = Field(..., alias="D")
    ngram_sizes: Tuple[int, ...]
    seed: int
    max_chars: int = 512
    W: List[float]
