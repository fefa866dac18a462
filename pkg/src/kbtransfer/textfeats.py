"""Shared lexical text statistics: tokenization, cached per-text profiles,
and pairwise overlap features.
"""

from __future__ import annotations

import re
from collections import Counter
from functools import lru_cache
from typing import NamedTuple

import numpy as np

__all__ = ["tokenize", "TextProfile", "profile", "pair_features", "PAIR_FEATURE_NAMES"]

_TOKEN_RE = re.compile(r"\w+")

PAIR_FEATURE_NAMES = ("token_overlap", "trigram_jaccard", "length_ratio", "substring")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


class TextProfile(NamedTuple):
    tokens: tuple[str, ...]
    token_set: frozenset
    counts: Counter
    trigrams: frozenset
    canon: str  # lowercased, whitespace-collapsed


@lru_cache(maxsize=1 << 17)
def profile(text: str) -> TextProfile:
    tokens = tuple(tokenize(text))
    canon = re.sub(r"\s+", " ", text.strip()).lower()
    if len(canon) >= 3:
        trigrams = frozenset(canon[i : i + 3] for i in range(len(canon) - 2))
    else:
        trigrams = frozenset([canon]) if canon else frozenset()
    return TextProfile(tokens, frozenset(tokens), Counter(tokens), trigrams, canon)


def trigram_jaccard(pa: TextProfile, pb: TextProfile) -> float:
    union = pa.trigrams | pb.trigrams
    if not union:
        return 1.0  # two empty texts are identical
    return len(pa.trigrams & pb.trigrams) / len(union)


def pair_features(a: str, b: str) -> np.ndarray:
    """Directed overlap block between two texts (normalized on the first)."""
    pa, pb = profile(a), profile(b)
    overlap = len(pa.token_set & pb.token_set) / max(1, len(pa.token_set))
    jac = trigram_jaccard(pa, pb)
    ratio = min(len(pa.tokens), len(pb.tokens)) / max(1, max(len(pa.tokens), len(pb.tokens)))
    sub = 1.0 if pa.canon and pb.canon and (pa.canon in pb.canon or pb.canon in pa.canon) else 0.0
    return np.array([overlap, jac, ratio, sub])
