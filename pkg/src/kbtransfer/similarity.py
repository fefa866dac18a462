"""Near-duplicate text similarity. Default backend: cosine over character
trigram counts. Anything matching the same contract (symmetric, range [0,1],
self-similarity 1) can be plugged in where a similarity function is taken.
"""

from __future__ import annotations

import math
import re
from collections import Counter

__all__ = ["trigram_counts", "trigram_cosine"]


def _canon(text: str) -> str:
    return re.sub(r"\s+", " ", text.strip()).lower()


def trigram_counts(text: str) -> Counter:
    """Overlapping character trigram counts; short non-empty strings count as one gram."""
    text = _canon(text)
    if len(text) < 3:
        return Counter([text]) if text else Counter()
    return Counter(text[i : i + 3] for i in range(len(text) - 2))


def trigram_cosine(a: str, b: str) -> float:
    """Cosine similarity of trigram count vectors; two empty strings are identical."""
    ca, cb = trigram_counts(a), trigram_counts(b)
    if not ca and not cb:
        return 1.0
    if not ca or not cb:
        return 0.0
    if ca == cb:  # identical count vectors: exactly 1, no rounding drift
        return 1.0
    dot = sum(ca[g] * cb[g] for g in ca.keys() & cb.keys())
    norm = math.sqrt(sum(v * v for v in ca.values())) * math.sqrt(
        sum(v * v for v in cb.values())
    )
    return min(dot / norm, 1.0)
