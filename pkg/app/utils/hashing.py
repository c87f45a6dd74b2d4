"""Deterministic 64-bit hashing shared by page ids, shingles and features."""
from typing import Iterator

MASK64 = (1 << 64) - 1

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3


def fnv1a_64(data: bytes) -> int:
    """64-bit FNV-1a over raw bytes."""
    h = FNV64_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV64_PRIME) & MASK64
    return h


def fnv1a_64_text(text: str) -> int:
    """64-bit FNV-1a over the UTF-8 encoding of `text`."""
    return fnv1a_64(text.encode("utf-8"))


def splitmix64(seed: int) -> Iterator[int]:
    """Endless splitmix64 output stream for a 64-bit seed."""
    state = seed & MASK64
    while True:
        state = (state + 0x9E3779B97F4A7C15) & MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        yield z ^ (z >> 31)
