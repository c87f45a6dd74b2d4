"""Text normalization used before anything is stored or hashed."""
import re
import unicodedata

_WHITESPACE_RE = re.compile(r"\s+")


def normalize_text(text: str) -> str:
    """Collapse whitespace runs to single spaces, strip, and apply NFC."""
    return unicodedata.normalize("NFC", _WHITESPACE_RE.sub(" ", text).strip())
