"""
Structured stage summaries.

Every pipeline stage ends with one JSON log line so runs can be filtered and
compared from the logs alone:

    {"event": "stage_summary", "stage": "dedup", "pages_before": 11, ...}
"""
import json
import logging
import time
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

logger = logging.getLogger(__name__)


@dataclass
class StageSummary:
    """Counters and timing for a single stage run."""
    stage: str
    counters: Dict[str, Any] = field(default_factory=dict)
    started: float = field(default_factory=time.monotonic)
    duration_seconds: Optional[float] = None

    def count(self, name: str, value: int = 1) -> None:
        self.counters[name] = self.counters.get(name, 0) + value

    def update(self, **values: Any) -> None:
        self.counters.update(values)

    def finish(self) -> "StageSummary":
        self.duration_seconds = time.monotonic() - self.started
        return self

    def to_dict(self) -> Dict[str, Any]:
        return {
            "event": "stage_summary",
            "stage": self.stage,
            **self.counters,
            "duration_seconds": round(self.duration_seconds, 3) if self.duration_seconds is not None else None,
        }

    def log(self):
        """Emit structured JSON log line."""
        if self.duration_seconds is None:
            self.finish()
        logger.info(json.dumps(self.to_dict(), ensure_ascii=False, default=str))
