"""
Root web domain resolution.

The root domain is the label immediately left of the registrable suffix:
fr.tripadvisor.com -> tripadvisor, domain.co.uk -> domain. It is the unit the
split builder uses to keep training and validation topics apart.
"""
import ipaddress
import logging
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import FrozenSet
from urllib.parse import urlsplit

from app.errors import InvalidUrlError

logger = logging.getLogger(__name__)

SUFFIX_FILE = Path(__file__).resolve().parent.parent / "data" / "public_suffixes.txt"


@dataclass(frozen=True)
class RootDomain:
    """Resolved root domain; `flagged` marks IP literals and bare suffixes."""
    domain: str
    host: str
    flagged: bool = False


@lru_cache(maxsize=1)
def load_public_suffixes(path: Path = SUFFIX_FILE) -> FrozenSet[str]:
    suffixes = set()
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip().lower()
        if line and not line.startswith("#"):
            suffixes.add(line)
    logger.debug(f"Loaded {len(suffixes)} public suffixes from {path}")
    return frozenset(suffixes)


def host_of(url: str) -> str:
    """Lowercased host of a URL; scheme-less inputs like 'help.domain.com' work. '' when unparseable."""
    target = url if "//" in url else f"//{url}"
    try:
        host = urlsplit(target).hostname or ""
    except ValueError:
        return ""
    return host.rstrip(".").lower()


def resolve_root_domain(url: str) -> RootDomain:
    host = host_of(url)
    if not host:
        raise InvalidUrlError(f"URL has no host: {url!r}")

    try:
        ipaddress.ip_address(host)
        return RootDomain(domain=host, host=host, flagged=True)
    except ValueError:
        pass

    suffixes = load_public_suffixes()
    labels = host.split(".")
    # Longest matching suffix wins; fall back to the last label.
    suffix_start = len(labels) - 1
    for i in range(len(labels)):
        if ".".join(labels[i:]) in suffixes:
            suffix_start = i
            break

    if suffix_start == 0:
        return RootDomain(domain=host, host=host, flagged=True)
    return RootDomain(domain=labels[suffix_start - 1], host=host)


def root_domain_of(url: str) -> str:
    """Root domain label of a URL (see module docstring)."""
    return resolve_root_domain(url).domain
