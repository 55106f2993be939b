"""Text similarity used by taxonomy construction and argument mapping."""

from __future__ import annotations

import math
from collections import Counter
from typing import Protocol


class TextEmbedder(Protocol):
    def similarity(self, a: str, b: str) -> float:
        """Cosine similarity in [0, 1] (or [-1, 1] for signed embeddings)."""
        ...


def trigrams(text: str) -> Counter[str]:
    """Character trigram counts of the lowercased, space-padded text."""
    s = " " + " ".join(text.lower().split()) + " "
    if len(s) < 3:
        return Counter({s: 1}) if s.strip() else Counter()
    return Counter(s[i : i + 3] for i in range(len(s) - 2))


class TrigramEmbedder:
    """Deterministic offline embedder: L2-normalised character-trigram counts.

    The cosine is computed as ``dot / sqrt(|a|^2 * |b|^2)`` on integer counts,
    so similarities of crafted inputs land exactly on the decimal they encode.
    """

    def __init__(self):
        self._cache: dict[str, tuple[Counter[str], int]] = {}

    def embed(self, text: str) -> tuple[Counter[str], int]:
        hit = self._cache.get(text)
        if hit is None:
            grams = trigrams(text)
            hit = (grams, sum(c * c for c in grams.values()))
            self._cache[text] = hit
        return hit

    def similarity(self, a: str, b: str) -> float:
        ga, na = self.embed(a)
        gb, nb = self.embed(b)
        if na == 0 or nb == 0:
            return 0.0
        if len(ga) > len(gb):
            ga, gb = gb, ga
        dot = sum(c * gb[g] for g, c in ga.items() if g in gb)
        return dot / math.sqrt(na * nb)
