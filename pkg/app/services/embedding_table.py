"""Embedding interchange table keyed by (page_id, role, pair_index)."""
import json
import logging
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Tuple, Union

import numpy as np
from pydantic import ValidationError

from app.errors import EmbeddingTableError
from app.schemas.interchange import EmbeddingRow

logger = logging.getLogger(__name__)

QUESTION = "question"
ANSWER = "answer"

EmbeddingKey = Tuple[str, str, int]


class EmbeddingTable:
    """Fixed-dimension float32 vectors; a missing key is an error naming it."""

    def __init__(self, dim: Optional[int] = None):
        self.dim = dim
        self._vectors: Dict[EmbeddingKey, np.ndarray] = {}

    def __len__(self) -> int:
        return len(self._vectors)

    def __contains__(self, key: EmbeddingKey) -> bool:
        return key in self._vectors

    def keys(self) -> Iterator[EmbeddingKey]:
        return iter(sorted(self._vectors))

    def add(self, page_id: str, role: str, index: int, vector) -> None:
        if role not in (QUESTION, ANSWER):
            raise EmbeddingTableError(f"unknown role '{role}' for page {page_id}")
        vec = np.asarray(vector, dtype=np.float32)
        if vec.ndim != 1:
            raise EmbeddingTableError(f"({page_id}, {role}, {index}): vector must be one-dimensional")
        if self.dim is None:
            self.dim = vec.shape[0]
        elif vec.shape[0] != self.dim:
            raise EmbeddingTableError(
                f"({page_id}, {role}, {index}): dimension {vec.shape[0]} != table dimension {self.dim}"
            )
        if not np.all(np.isfinite(vec)):
            raise EmbeddingTableError(f"({page_id}, {role}, {index}): non-finite vector entry")
        self._vectors[(page_id, role, index)] = vec

    def get(self, page_id: str, role: str, index: int) -> np.ndarray:
        try:
            return self._vectors[(page_id, role, index)]
        except KeyError:
            raise EmbeddingTableError(f"embedding table has no entry for ({page_id}, {role}, {index})")

    def matrix(self, page_id: str, role: str, count: int) -> np.ndarray:
        """Stacked vectors for indices 0..count-1 of one page and role."""
        return np.stack([self.get(page_id, role, i) for i in range(count)])


def read_embedding_table(path: Union[str, Path]) -> EmbeddingTable:
    table = EmbeddingTable()
    with open(path, "r", encoding="utf-8") as f:
        for line_no, raw in enumerate(f, 1):
            if not raw.strip():
                continue
            try:
                row = EmbeddingRow.model_validate(json.loads(raw))
            except (json.JSONDecodeError, ValidationError) as e:
                raise EmbeddingTableError(f"{path}:{line_no}: malformed embedding line: {e}") from e
            try:
                table.add(row.page, row.role, row.index, row.vector)
            except EmbeddingTableError as e:
                raise EmbeddingTableError(f"{path}:{line_no}: {e}") from e
    logger.info(f"Read {len(table)} vectors (d={table.dim}) from {path}")
    return table


def write_embedding_table(table: EmbeddingTable, path: Union[str, Path]) -> None:
    """Rows sorted by key; float32 values written at full precision."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for page_id, role, index in table.keys():
            vector: List[float] = [float(x) for x in table.get(page_id, role, index)]
            row = EmbeddingRow(page=page_id, role=role, index=index, vector=vector)
            f.write(json.dumps(row.model_dump()) + "\n")
    logger.info(f"Wrote {len(table)} vectors to {path}")
