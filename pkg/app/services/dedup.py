"""
Near-duplicate page elimination.

shingle -> minhash -> lsh_candidates -> verify_and_cluster -> keep one page
per connected component.

MinHash permutations are h_i(x) = (a_i * x + b_i) mod (2^61 - 1) with
(a_i, b_i) drawn from splitmix64(seed). The products are evaluated in uint64
numpy arrays by splitting both factors at bit 31 and folding with the
Mersenne identity 2^61 = 1 (mod p), so every intermediate stays below 2^64
and the result matches big-integer arithmetic exactly.
"""
import json
import logging
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Set, Tuple, Union

import numpy as np

from app.config import DEFAULT_DEDUP_SEED
from app.errors import ConfigurationError, DataError
from app.schemas.corpus import FaqPage
from app.schemas.reports import DedupReport
from app.services.corpus import Corpus
from app.services.parallel import ordered_map
from app.services.stage_log import StageSummary
from app.utils.hashing import fnv1a_64_text, splitmix64

logger = logging.getLogger(__name__)

MERSENNE_61 = (1 << 61) - 1
SHINGLE_SIZE = 3

_P = np.uint64(MERSENNE_61)
_S61 = np.uint64(61)
_S31 = np.uint64(31)
_S30 = np.uint64(30)
_ONE = np.uint64(1)
_LO31 = np.uint64((1 << 31) - 1)
_LO30 = np.uint64((1 << 30) - 1)

PagePair = Tuple[str, str]


@dataclass(frozen=True)
class LshConfig:
    bands: int = 20
    rows: int = 5
    jaccard_threshold: float = 0.75
    signature_length: int = 100

    def __post_init__(self):
        if self.bands < 1 or self.rows < 1:
            raise ConfigurationError("bands and rows must be positive")
        if self.bands * self.rows != self.signature_length:
            raise ConfigurationError(
                f"bands * rows ({self.bands} * {self.rows}) != signature_length ({self.signature_length})"
            )


@dataclass(frozen=True)
class ShingleSet:
    page_id: str
    shingles: FrozenSet[int]

    def __len__(self) -> int:
        return len(self.shingles)


@dataclass(frozen=True)
class MinHashSignature:
    page_id: str
    values: np.ndarray  # uint64, length m

    def __len__(self) -> int:
        return len(self.values)


@dataclass
class DuplicateClusters:
    """Partition of the pages into components, one survivor each."""
    components: List[List[str]]
    survivors: List[str]
    edges: List[Tuple[str, str, float]] = field(default_factory=list)

    def survivor_set(self) -> Set[str]:
        return set(self.survivors)


def candidate_probability(similarity: float, bands: int = 20, rows: int = 5) -> float:
    """Probability a pair at Jaccard `similarity` shares at least one band."""
    return 1.0 - (1.0 - similarity ** rows) ** bands


# ═══════════════════════════════════════════════════════════════════════════
# SHINGLES AND SIGNATURES
# ═══════════════════════════════════════════════════════════════════════════

def shingle_text(page: FaqPage) -> str:
    parts = []
    for pair in page.pairs:
        parts.append(pair.question)
        parts.append(pair.answer)
    return unicodedata.normalize("NFC", " ".join(parts).lower())


def shingle_windows(text: str, size: int = SHINGLE_SIZE) -> List[str]:
    tokens = text.split()
    if not tokens:
        return []
    if len(tokens) < size:
        return [" ".join(tokens)]
    return [" ".join(tokens[i:i + size]) for i in range(len(tokens) - size + 1)]


def shingle(page: FaqPage) -> ShingleSet:
    windows = shingle_windows(shingle_text(page))
    return ShingleSet(page.page_id, frozenset(fnv1a_64_text(w) for w in windows))


@lru_cache(maxsize=8)
def permutation_params(m: int, seed: int) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
    """(a, b) coefficient tuples, a_i in [1, p), b_i in [0, p)."""
    stream = splitmix64(seed)
    a, b = [], []
    for _ in range(m):
        ai = next(stream) % MERSENNE_61
        while ai == 0:
            ai = next(stream) % MERSENNE_61
        a.append(ai)
        b.append(next(stream) % MERSENNE_61)
    return tuple(a), tuple(b)


def _mod_mersenne(v: np.ndarray) -> np.ndarray:
    """v mod p for any uint64 v: one fold, then one conditional subtract."""
    r = (v & _P) + (v >> _S61)
    return np.where(r >= _P, r - _P, r)


def _mulmod_mersenne(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    """(a * x) mod p for a, x < p, broadcasting, without overflow."""
    a_hi, a_lo = a >> _S31, a & _LO31
    x_hi, x_lo = x >> _S31, x & _LO31
    hh = a_hi * x_hi                      # < 2^60, weight 2^62 = 2 (mod p)
    mid = a_hi * x_lo + a_lo * x_hi       # < 2^62, weight 2^31
    ll = a_lo * x_lo                      # < 2^62
    total = (hh << _ONE) + (mid >> _S30) + ((mid & _LO30) << _S31) + ll
    return _mod_mersenne(total)


def minhash(shingles: ShingleSet, m: int = 100, seed: int = DEFAULT_DEDUP_SEED) -> MinHashSignature:
    if not shingles.shingles:
        raise DataError(f"page {shingles.page_id}: empty shingle set cannot be signed")
    a, b = permutation_params(m, seed)
    a_arr = np.array(a, dtype=np.uint64)[:, None]
    b_arr = np.array(b, dtype=np.uint64)[:, None]
    x = _mod_mersenne(np.fromiter(sorted(shingles.shingles), dtype=np.uint64, count=len(shingles.shingles)))
    hashed = _mulmod_mersenne(a_arr, x[None, :]) + b_arr
    hashed = np.where(hashed >= _P, hashed - _P, hashed)
    return MinHashSignature(shingles.page_id, hashed.min(axis=1))


def estimate_jaccard(a: MinHashSignature, b: MinHashSignature) -> float:
    if len(a) != len(b):
        raise DataError("signatures of different length")
    return float(np.mean(a.values == b.values))


def jaccard(a: FrozenSet[int], b: FrozenSet[int]) -> float:
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


# ═══════════════════════════════════════════════════════════════════════════
# CANDIDATES AND CLUSTERS
# ═══════════════════════════════════════════════════════════════════════════

def lsh_candidates(signatures: Iterable[MinHashSignature], cfg: LshConfig) -> Set[PagePair]:
    """Unordered pairs (smaller id first) sharing at least one band slice."""
    buckets: Dict[Tuple[int, bytes], List[str]] = {}
    for sig in signatures:
        if len(sig) != cfg.signature_length:
            raise DataError(
                f"page {sig.page_id}: signature length {len(sig)} != {cfg.signature_length}"
            )
        for k in range(cfg.bands):
            key = (k, sig.values[k * cfg.rows:(k + 1) * cfg.rows].tobytes())
            buckets.setdefault(key, []).append(sig.page_id)

    pairs: Set[PagePair] = set()
    for members in buckets.values():
        if len(members) < 2:
            continue
        for x, y in combinations(sorted(set(members)), 2):
            pairs.add((x, y))
    return pairs


class UnionFind:
    """Disjoint sets keyed by page id; the root is the smallest id."""

    def __init__(self):
        self.parent: Dict[str, str] = {}

    def find(self, x: str) -> str:
        root = self.parent.setdefault(x, x)
        while root != self.parent[root]:
            root = self.parent[root]
        while x != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x: str, y: str) -> None:
        px, py = self.find(x), self.find(y)
        self.parent[px] = self.parent[py] = min(px, py)


def verify_and_cluster(
    candidates: Iterable[PagePair],
    shingle_sets: Mapping[str, ShingleSet],
    threshold: float,
    pages: Mapping[str, FaqPage],
) -> DuplicateClusters:
    """
    Keep candidate edges with exact Jaccard >= threshold and return the
    connected components over every page in `pages`.

    Survivor per component: most pairs, then smallest url, then smallest id.
    """
    edges: List[Tuple[str, str, float]] = []
    for a, b in sorted(candidates):
        j = jaccard(shingle_sets[a].shingles, shingle_sets[b].shingles)
        if j >= threshold:
            edges.append((a, b, j))

    uf = UnionFind()
    for page_id in sorted(pages):
        uf.find(page_id)
    for a, b, _ in edges:
        uf.union(a, b)

    groups: Dict[str, List[str]] = {}
    for page_id in sorted(pages):
        groups.setdefault(uf.find(page_id), []).append(page_id)

    components = sorted(groups.values())
    survivors = [
        min(members, key=lambda pid: (-pages[pid].size, pages[pid].url, pid))
        for members in components
    ]
    return DuplicateClusters(components=components, survivors=survivors, edges=edges)


# ═══════════════════════════════════════════════════════════════════════════
# STAGE
# ═══════════════════════════════════════════════════════════════════════════

def _sign(page: FaqPage, m: int, seed: int) -> Tuple[ShingleSet, MinHashSignature]:
    shingles = shingle(page)
    return shingles, minhash(shingles, m, seed)


def write_edges(edges: List[Tuple[str, str, float]], path: Union[str, Path]) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for a, b, j in edges:
            f.write(json.dumps({"a": a, "b": b, "jaccard": j}) + "\n")


def dedup_corpus(
    corpus: Corpus,
    cfg: Optional[LshConfig] = None,
    seed: int = DEFAULT_DEDUP_SEED,
    threads: int = 1,
    edge_dump: Optional[Union[str, Path]] = None,
) -> Tuple[Corpus, DedupReport]:
    """Drop all but one page of every near-duplicate component."""
    cfg = cfg or LshConfig()
    summary = StageSummary("dedup")

    signed = ordered_map(lambda p: _sign(p, cfg.signature_length, seed), corpus.pages, threads)
    shingle_sets = {s.page_id: s for s, _ in signed}
    candidates = lsh_candidates((sig for _, sig in signed), cfg)
    clusters = verify_and_cluster(candidates, shingle_sets, cfg.jaccard_threshold, corpus.by_id())

    keep = clusters.survivor_set()
    result = Corpus(tuple(p for p in corpus.pages if p.page_id in keep))
    sizes = Counter(len(c) for c in clusters.components)
    report = DedupReport(
        pages_before=len(corpus),
        pages_after=len(result),
        components=sum(1 for c in clusters.components if len(c) > 1),
        size_histogram={str(size): sizes[size] for size in sorted(sizes)},
        candidate_pairs=len(candidates),
        verified_edges=len(clusters.edges),
        config={
            "signature_length": cfg.signature_length,
            "bands": cfg.bands,
            "rows": cfg.rows,
            "jaccard_threshold": cfg.jaccard_threshold,
            "seed": seed,
        },
    )
    if edge_dump:
        write_edges(clusters.edges, edge_dump)

    summary.update(
        pages_before=report.pages_before,
        pages_after=report.pages_after,
        components=report.components,
        candidate_pairs=report.candidate_pairs,
        verified_edges=report.verified_edges,
    )
    summary.log()
    return result, report
