"""
Training batch construction.

All pairs of a page travel together so the other answers of the same page
become the in-batch (hard) negatives, and every batch holds one language.
"""
import json
import logging
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

from pydantic import ValidationError

from app.errors import ConfigurationError, DataError
from app.schemas.corpus import FaqPage
from app.schemas.interchange import BatchEntryRow, BatchFileMeta, BatchRow
from app.services.stage_log import StageSummary

logger = logging.getLogger(__name__)

QUESTION_MARKER = "<question>"
ANSWER_MARKER = "<answer>"
DEFAULT_CAPACITY = 800


class BatchEntry(NamedTuple):
    page_id: str
    pair_index: int
    question: str
    answer: str


@dataclass
class TrainingBatch:
    language: str
    capacity: int
    entries: List[BatchEntry] = field(default_factory=list)
    partial: bool = False

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def free(self) -> int:
        return self.capacity - len(self.entries)

    def page_ids(self) -> List[str]:
        seen: Dict[str, None] = {}
        for entry in self.entries:
            seen.setdefault(entry.page_id, None)
        return list(seen)


def render_entry(question: str, answer: str) -> Tuple[str, str]:
    """Prefix the role markers; rendering twice is an error."""
    if question.startswith(QUESTION_MARKER) or answer.startswith(ANSWER_MARKER):
        raise ValueError("entry already rendered with role markers")
    return f"{QUESTION_MARKER} {question}", f"{ANSWER_MARKER} {answer}"


def unrender_entry(question: str, answer: str) -> Tuple[str, str]:
    """Inverse of render_entry."""
    q_prefix, a_prefix = f"{QUESTION_MARKER} ", f"{ANSWER_MARKER} "
    if not question.startswith(q_prefix) or not answer.startswith(a_prefix):
        raise ValueError("entry is not rendered")
    return question[len(q_prefix):], answer[len(a_prefix):]


def _page_entries(page: FaqPage) -> List[BatchEntry]:
    return [BatchEntry(page.page_id, i, p.question, p.answer) for i, p in enumerate(page.pairs)]


def _batch_language(language: str, pages: List[FaqPage], capacity: int) -> List[TrainingBatch]:
    batches: List[TrainingBatch] = []
    current = TrainingBatch(language, capacity)

    def close():
        nonlocal current
        if current.entries:
            batches.append(current)
        current = TrainingBatch(language, capacity)

    for page in pages:
        entries = _page_entries(page)
        if len(entries) > current.free:
            close()
        while len(entries) > capacity:
            current.entries.extend(entries[:capacity])
            close()
            entries = entries[capacity:]
        current.entries.extend(entries)
    close()

    if batches and len(batches[-1]) < capacity:
        batches[-1].partial = True
    return batches


def build_batches(
    pages: Sequence[FaqPage],
    capacity: int = DEFAULT_CAPACITY,
    seed: Optional[int] = None,
) -> List[TrainingBatch]:
    """
    Monolingual batches in sorted language order.

    Within a language pages are shuffled with Random(f"{seed}:{language}");
    seed=None keeps the input order. A page that does not fit closes the
    current batch; a page larger than `capacity` is split over consecutive
    batches. Only a language's trailing batch can be partial.
    """
    if capacity < 2:
        raise ConfigurationError("batch capacity must be >= 2 for in-batch negatives")
    by_language: Dict[str, List[FaqPage]] = {}
    for page in pages:
        by_language.setdefault(page.language, []).append(page)

    summary = StageSummary("batch")
    batches: List[TrainingBatch] = []
    for language in sorted(by_language):
        ordered = list(by_language[language])
        if seed is not None:
            random.Random(f"{seed}:{language}").shuffle(ordered)
        batches.extend(_batch_language(language, ordered, capacity))

    summary.update(
        batches=len(batches),
        entries=sum(len(b) for b in batches),
        partial_batches=sum(1 for b in batches if b.partial),
        capacity=capacity,
        seed=seed,
    )
    summary.log()
    return batches


# ═══════════════════════════════════════════════════════════════════════════
# EXPORT
# ═══════════════════════════════════════════════════════════════════════════

def meta_path_for(path: Union[str, Path]) -> Path:
    path = Path(path)
    return path.with_name(f"{path.stem}.meta.json")


def write_batches(
    batches: Sequence[TrainingBatch],
    path: Union[str, Path],
    seed: Optional[int] = None,
) -> None:
    """One batch per line with rendered texts, plus a `<stem>.meta.json` sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for batch in batches:
            row = BatchRow(
                language=batch.language,
                entries=[
                    BatchEntryRow(page=e.page_id, q=q, a=a)
                    for e in batch.entries
                    for q, a in [render_entry(e.question, e.answer)]
                ],
            )
            f.write(json.dumps(row.model_dump(), ensure_ascii=False) + "\n")

    capacity = batches[0].capacity if batches else DEFAULT_CAPACITY
    meta = BatchFileMeta(
        seed=seed,
        capacity=capacity,
        batches=len(batches),
        entries=sum(len(b) for b in batches),
        partial_batches=sum(1 for b in batches if b.partial),
        languages=sorted({b.language for b in batches}),
    )
    meta_path_for(path).write_text(json.dumps(meta.model_dump(), indent=2) + "\n", encoding="utf-8")
    logger.info(f"Wrote {len(batches)} batches to {path}")


def read_batches(path: Union[str, Path]) -> List[TrainingBatch]:
    """
    Read an export back. Role markers are stripped; pair indices are
    recovered by counting each page's entries in file order.
    """
    path = Path(path)
    meta_file = meta_path_for(path)
    capacity = None
    if meta_file.exists():
        capacity = BatchFileMeta.model_validate_json(meta_file.read_text(encoding="utf-8")).capacity

    rows: List[BatchRow] = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, raw in enumerate(f, 1):
            if not raw.strip():
                continue
            try:
                rows.append(BatchRow.model_validate(json.loads(raw)))
            except (json.JSONDecodeError, ValidationError) as e:
                raise DataError(f"{path}:{line_no}: malformed batch line: {e}") from e

    if capacity is None:
        capacity = max((len(r.entries) for r in rows), default=DEFAULT_CAPACITY)
    next_index: Dict[str, int] = {}
    batches: List[TrainingBatch] = []
    for row in rows:
        batch = TrainingBatch(row.language, capacity)
        for entry in row.entries:
            try:
                question, answer = unrender_entry(entry.q, entry.a)
            except ValueError as e:
                raise DataError(f"{path}: entry of page {entry.page} lacks role markers") from e
            index = next_index.get(entry.page, 0)
            next_index[entry.page] = index + 1
            batch.entries.append(BatchEntry(entry.page, index, question, answer))
        batches.append(batch)

    for i, batch in enumerate(batches):
        last_of_language = i + 1 == len(batches) or batches[i + 1].language != batch.language
        batch.partial = last_of_language and len(batch) < capacity
    return batches
