"""
Exception hierarchy for faqkit.

The CLI maps these onto exit codes: ConfigurationError is a usage problem
(exit 1), every DataError is a problem with the input data (exit 2).
"""


class FaqKitError(Exception):
    """Base class for all faqkit errors."""


class ConfigurationError(FaqKitError):
    """Invalid settings, flags, or missing classifier resources."""


class DataError(FaqKitError):
    """Input data violates a format or invariant."""


class CorpusFormatError(DataError):
    """A corpus JSON Lines file could not be parsed."""


class DuplicatePageError(CorpusFormatError):
    """Two corpus lines share (url, language)."""


class WarcFormatError(DataError):
    """The file is not a readable WARC 1.0 archive."""


class EmbeddingTableError(DataError):
    """Embedding table missing a key or mixing dimensions."""


class ScoringError(DataError):
    """A score matrix contains NaN/inf or is otherwise unusable."""


class TrainingDivergedError(DataError):
    """Toy trainer loss exploded."""


class InvalidUrlError(DataError):
    """A page URL has no host to derive a root domain from."""
