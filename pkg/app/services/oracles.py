"""
Brute-force reference computations.

Written independently of the pipeline code (different parsing route,
plain Python arithmetic, no shared helpers beyond the standard library) so
fixtures and tests can check the pipeline against first principles.
"""
import json
import math
import re
from fractions import Fraction
from html.parser import HTMLParser
from itertools import combinations
from typing import Any, Callable, Dict, Iterable, List, Sequence, Set, Tuple

import numpy as np

MERSENNE_61 = (1 << 61) - 1


# ── Extraction ──────────────────────────────────────────────────────────

class _LdJsonCollector(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=False)
        self.blocks: List[str] = []
        self._capturing = False
        self._buffer: List[str] = []

    def handle_starttag(self, tag, attrs):
        if tag == "script" and (dict(attrs).get("type") or "").strip().lower() == "application/ld+json":
            self._capturing = True
            self._buffer = []

    def handle_endtag(self, tag):
        if tag == "script" and self._capturing:
            self.blocks.append("".join(self._buffer))
            self._capturing = False

    def handle_data(self, data):
        if self._capturing:
            self._buffer.append(data)


def count_jsonld_questions(html: str) -> int:
    """Question entities under any FAQPage mainEntity, found by a full JSON walk."""
    collector = _LdJsonCollector()
    collector.feed(html)
    total = 0

    def types(node: Dict[str, Any]) -> List[str]:
        t = node.get("@type", [])
        return [t] if isinstance(t, str) else list(t) if isinstance(t, list) else []

    def walk(node: Any) -> None:
        nonlocal total
        if isinstance(node, list):
            for child in node:
                walk(child)
        elif isinstance(node, dict):
            if "FAQPage" in types(node):
                entities = node.get("mainEntity", [])
                entities = [entities] if isinstance(entities, dict) else entities
                total += sum(1 for e in entities if isinstance(e, dict) and "Question" in types(e))
            for child in node.get("@graph", []) if isinstance(node.get("@graph"), list) else []:
                walk(child)

    for block in collector.blocks:
        try:
            walk(json.loads(block))
        except ValueError:
            continue
    return total


# ── Dedup ───────────────────────────────────────────────────────────────

def word_shingles(text: str, k: int = 3) -> Set[str]:
    words = text.lower().split()
    if len(words) < k:
        return {" ".join(words)} if words else set()
    return {" ".join(words[i:i + k]) for i in range(len(words) - k + 1)}


def exact_jaccard(a: Set[Any], b: Set[Any]) -> Fraction:
    if not a and not b:
        return Fraction(1)
    return Fraction(len(a & b), len(a | b))


def brute_force_components(texts: Dict[str, str], threshold: float) -> List[List[str]]:
    """All-pairs exact Jaccard over string shingles, components by DFS."""
    shingles = {key: word_shingles(text) for key, text in texts.items()}
    neighbours: Dict[str, Set[str]] = {key: set() for key in texts}
    for a, b in combinations(sorted(texts), 2):
        if exact_jaccard(shingles[a], shingles[b]) >= Fraction(threshold).limit_denominator(10 ** 6):
            neighbours[a].add(b)
            neighbours[b].add(a)
    seen: Set[str] = set()
    components = []
    for start in sorted(texts):
        if start in seen:
            continue
        stack, members = [start], []
        seen.add(start)
        while stack:
            node = stack.pop()
            members.append(node)
            for nxt in neighbours[node] - seen:
                seen.add(nxt)
                stack.append(nxt)
        components.append(sorted(members))
    return sorted(components)


def minhash_bigint(shingles: Iterable[int], a: Sequence[int], b: Sequence[int]) -> List[int]:
    """Signature with Python integers: min over x of (a_i * x + b_i) mod (2^61 - 1)."""
    xs = list(shingles)
    return [min((ai * x + bi) % MERSENNE_61 for x in xs) for ai, bi in zip(a, b)]


# ── Ranking and metrics ─────────────────────────────────────────────────

def sort_rank(row: Sequence[float], gold: int) -> int:
    """1-based position of `gold` after a stable sort by descending score."""
    order = sorted(range(len(row)), key=lambda j: -row[j])
    return order.index(gold) + 1


def reciprocal_rank_mean(ranks: Sequence[int]) -> Fraction:
    return sum((Fraction(1, r) for r in ranks), Fraction(0)) / len(ranks)


def harmonic_mrr(n: int) -> Fraction:
    """Exact H_n / n."""
    return sum((Fraction(1, k) for k in range(1, n + 1)), Fraction(0)) / n


# ── TF-IDF ──────────────────────────────────────────────────────────────

_TOKEN_RE = re.compile(r"(?u)\b\w\w+\b")


def _ngrams(text: str, low: int = 1, high: int = 3) -> List[str]:
    words = _TOKEN_RE.findall(text.lower())
    grams = []
    for n in range(low, high + 1):
        grams.extend(" ".join(words[i:i + n]) for i in range(len(words) - n + 1))
    return grams


def tfidf_matrix(questions: Sequence[str], answers: Sequence[str]) -> List[List[float]]:
    """Raw-count tf, idf = ln((1 + N) / (1 + df)) + 1, L2 rows, dot products."""
    answer_grams = [_ngrams(a) for a in answers]
    vocab = sorted({g for grams in answer_grams for g in grams})
    n_docs = len(answers)
    df = {g: sum(1 for grams in answer_grams if g in grams) for g in vocab}
    idf = {g: math.log((1 + n_docs) / (1 + df[g])) + 1 for g in vocab}

    def vector(grams: List[str]) -> Dict[str, float]:
        v = {g: grams.count(g) * idf[g] for g in set(grams) if g in idf}
        norm = math.sqrt(sum(x * x for x in v.values()))
        return {g: x / norm for g, x in v.items()} if norm else {}

    answer_vecs = [vector(grams) for grams in answer_grams]
    rows = []
    for q in questions:
        qv = vector(_ngrams(q))
        rows.append([sum(x * av.get(g, 0.0) for g, x in qv.items()) for av in answer_vecs])
    return rows


# ── Toy trainer ─────────────────────────────────────────────────────────

def softmax_nll(scores: Sequence[Sequence[float]]) -> float:
    """Direct exponent sums, no max shift."""
    n = len(scores)
    total = 0.0
    for i, row in enumerate(scores):
        total += -math.log(math.exp(row[i]) / sum(math.exp(s) for s in row))
    return total / n


def numerical_gradient(f: Callable[[np.ndarray], float], W: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central finite differences of f at W, one entry at a time."""
    grad = np.zeros_like(W, dtype=np.float64)
    point = W.astype(np.float64).copy()
    for idx in np.ndindex(*W.shape):
        original = point[idx]
        point[idx] = original + eps
        up = f(point)
        point[idx] = original - eps
        down = f(point)
        point[idx] = original
        grad[idx] = (up - down) / (2 * eps)
    return grad


def max_relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-6) -> float:
    """Largest entrywise |a - b| / max(|a|, |b|); denominators below `floor` count as `floor`."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if not a.size:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom))


# ── Split ───────────────────────────────────────────────────────────────

def split_violations(pages: Sequence[Any], validation: Sequence[str], training: Sequence[str], cap: int = 3) -> List[str]:
    """Human-readable list of broken split invariants (empty when all hold)."""
    by_id = {p.page_id: p for p in pages}
    problems = []
    v, t = set(validation), set(training)
    if v & t:
        problems.append(f"{len(v & t)} pages in both splits")
    v_domains = {by_id[i].root_domain for i in v}
    t_domains = {by_id[i].root_domain for i in t}
    if v_domains & t_domains:
        problems.append(f"domains in both splits: {sorted(v_domains & t_domains)}")
    for domain in v_domains:
        count = sum(1 for i in v if by_id[i].root_domain == domain)
        if count > cap:
            problems.append(f"domain {domain} has {count} validation pages")
        languages = {p.language for p in pages if p.root_domain == domain}
        if len(languages) > 1:
            problems.append(f"multi-language domain {domain} in validation")
    return problems
