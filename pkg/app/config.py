"""
faqkit pipeline configuration.

Settings come from (highest precedence first) CLI flags, a dotenv-style
config file (`KEY=value` lines, keys prefixed `FAQKIT_`), the environment,
and finally the documented defaults below.
"""
import logging
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

from dotenv import dotenv_values
from pydantic import ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from app.errors import ConfigurationError

logger = logging.getLogger(__name__)

ENV_PREFIX = "FAQKIT_"

# Seeds used when nothing else is configured. Printed into every artifact.
DEFAULT_DEDUP_SEED = 20210901
DEFAULT_SPLIT_SEED = 17
DEFAULT_BATCH_SEED = 800
DEFAULT_TRAIN_SEED = 42
DEFAULT_EVAL_SEED = 7


class Settings(BaseSettings):
    """Pipeline settings (the PipelineConfig)."""

    model_config = SettingsConfigDict(env_prefix=ENV_PREFIX, extra="forbid", protected_namespaces=())

    # Stage inputs/outputs - warc inputs stored as string, parsed via property
    warc_inputs_str: str = ""
    corpus_path: Optional[str] = None
    dedup_corpus_path: Optional[str] = None
    manifest_path: Optional[str] = None
    batches_path: Optional[str] = None
    embeddings_path: Optional[str] = None
    model_path: Optional[str] = None
    report_path: Optional[str] = None
    dedup_report_path: Optional[str] = None
    language_map_path: Optional[str] = None
    query_map_path: Optional[str] = None

    # Extraction
    language_floor: int = 250
    language_threshold: float = 0.5

    # Dedup (LSH)
    signature_length: int = 100
    bands: int = 20
    rows: int = 5
    jaccard_threshold: float = 0.75

    # Split
    validation_fraction: float = 0.10
    max_pages_per_domain: int = 3
    one_page_per_domain_training: bool = True

    # Batching
    batch_capacity: int = 800

    # Toy trainer
    embedding_dim: int = 64
    feature_dim: int = 2 ** 15
    learning_rate: float = 0.05
    epochs: int = 50
    clip_norm: float = 5.0
    max_chars: int = 512

    # Seeds
    dedup_seed: int = DEFAULT_DEDUP_SEED
    split_seed: int = DEFAULT_SPLIT_SEED
    batch_seed: int = DEFAULT_BATCH_SEED
    train_seed: int = DEFAULT_TRAIN_SEED
    eval_seed: int = DEFAULT_EVAL_SEED

    threads: int = 1

    @property
    def warc_inputs(self) -> List[str]:
        """Parse WARC inputs from comma-separated string."""
        return [p.strip() for p in self.warc_inputs_str.split(",") if p.strip()]

    @field_validator("validation_fraction")
    @classmethod
    def _fraction_in_open_interval(cls, v: float) -> float:
        if not 0.0 < v < 1.0:
            raise ValueError("validation_fraction must be in (0, 1)")
        return v

    @field_validator("batch_capacity")
    @classmethod
    def _capacity_allows_negatives(cls, v: int) -> int:
        if v < 2:
            raise ValueError("batch_capacity must be >= 2")
        return v

    @field_validator("learning_rate")
    @classmethod
    def _positive_learning_rate(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("learning_rate must be > 0")
        return v

    @field_validator("feature_dim")
    @classmethod
    def _power_of_two(cls, v: int) -> int:
        if v < 1 or v & (v - 1):
            raise ValueError("feature_dim must be a power of two")
        return v

    @field_validator("threads", "signature_length", "bands", "rows", "embedding_dim", "max_pages_per_domain")
    @classmethod
    def _positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError("must be >= 1")
        return v

    @model_validator(mode="after")
    def _bands_cover_signature(self) -> "Settings":
        if self.bands * self.rows != self.signature_length:
            raise ValueError(
                f"bands * rows ({self.bands} * {self.rows}) must equal "
                f"signature_length ({self.signature_length})"
            )
        return self

    def echo(self, *fields: str) -> Dict[str, Any]:
        """Subset of settings to embed in an artifact's metadata."""
        return {name: getattr(self, name) for name in fields}


# Fields holding file paths; relative values in a config file resolve
# against that file's directory.
PATH_FIELDS = frozenset(
    name for name in Settings.model_fields if name.endswith("_path")
) | {"warc_inputs_str"}


def _read_config_file(path: Path) -> Dict[str, str]:
    if not path.exists():
        raise ConfigurationError(f"Config file not found: {path}")
    values: Dict[str, str] = {}
    for key, raw in dotenv_values(path).items():
        if raw is None:
            continue
        if not key.startswith(ENV_PREFIX):
            raise ConfigurationError(f"{path}: key '{key}' lacks the {ENV_PREFIX} prefix")
        name = key[len(ENV_PREFIX):].lower()
        if name not in Settings.model_fields:
            raise ConfigurationError(f"{path}: unknown setting '{key}'")
        if name in PATH_FIELDS:
            raw = ",".join(
                str((path.parent / p.strip()) if not Path(p.strip()).is_absolute() else Path(p.strip()))
                for p in raw.split(",") if p.strip()
            )
        values[name] = raw
    return values


def load_settings(
    config_path: Optional[str] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> Settings:
    """Build Settings with flags > config file > environment > defaults."""
    values: Dict[str, Any] = {}
    if config_path:
        values.update(_read_config_file(Path(config_path)))
        logger.info(f"Loaded config file {config_path} ({len(values)} keys)")
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    try:
        return Settings(**values)
    except ValidationError as e:
        raise ConfigurationError(str(e)) from e


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Environment and defaults only, built on first use; bad FAQKIT_ values raise ConfigurationError."""
    return load_settings()
