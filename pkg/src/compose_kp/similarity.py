"""Lexical similarity between free text and component descriptions.

Scores are cosine similarity over raw token-count vectors.  Ranking
never touches floating point: candidates are ordered by the exact
squared cosine as a ``Fraction`` of integer dot products and squared
norms, with ties broken by ascending component id.  The float score a
caller sees is the square root of that exact value, so reported
scores live in [0, 1], identical token multisets score exactly 1.0,
and disjoint ones score exactly 0.0.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from fractions import Fraction
from typing import Protocol, Sequence

from .inventory import Inventory

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercase, split on non-alphanumerics, drop tokens shorter than 2."""
    return [t for t in _TOKEN_RE.findall(text.lower()) if len(t) >= 2]


def _counts(text: str) -> Counter[str]:
    return Counter(tokenize(text))


def _norm2(counts: Counter[str]) -> int:
    return sum(v * v for v in counts.values())


def _dot(a: Counter[str], b: Counter[str]) -> int:
    if len(b) < len(a):
        a, b = b, a
    return sum(v * b[t] for t, v in a.items() if t in b)


class SimilarityIndex(Protocol):
    """What composers need from a similarity backend."""

    def sim(self, component_id: str, text: str) -> float: ...

    def top_k(self, text: str, k: int) -> list[tuple[str, float]]: ...


class SimIndex:
    """Token-count index over an inventory's name + description text."""

    def __init__(self, inventory: Inventory) -> None:
        self._ids: list[str] = []
        self._vectors: dict[str, Counter[str]] = {}
        self._norms: dict[str, int] = {}
        for comp in inventory:
            counts = _counts(f"{comp.name} {comp.description}")
            self._ids.append(comp.id)
            self._vectors[comp.id] = counts
            self._norms[comp.id] = _norm2(counts)

    def __len__(self) -> int:
        return len(self._ids)

    def _vector(self, component_id: str) -> Counter[str]:
        try:
            return self._vectors[component_id]
        except KeyError:
            raise KeyError(f"unknown component id {component_id!r}") from None

    def sim_squared(self, component_id: str, text: str) -> Fraction:
        """Exact squared cosine between the component and the text."""
        vec = self._vector(component_id)
        query = _counts(text)
        dot = _dot(vec, query)
        if dot == 0:
            return Fraction(0)
        return Fraction(dot * dot, self._norms[component_id] * _norm2(query))

    def sim(self, component_id: str, text: str) -> float:
        squared = self.sim_squared(component_id, text)
        if squared == 0:
            return 0.0
        if squared == 1:
            return 1.0
        return math.sqrt(squared.numerator / squared.denominator)

    def top_k(self, text: str, k: int) -> list[tuple[str, float]]:
        """The k most similar components, exact ranking, ties by id.

        Always returns ``min(k, len(index))`` entries; zero-score
        components are eligible so a query unlike everything still
        yields candidates deterministically.
        """
        if k < 1:
            raise ValueError(f"k must be at least 1, got {k}")
        query = _counts(text)
        qnorm = _norm2(query)
        scored: list[tuple[Fraction, str]] = []
        for cid in self._ids:
            vec = self._vectors[cid]
            dot = _dot(vec, query) if qnorm else 0
            if dot == 0:
                scored.append((Fraction(0), cid))
            else:
                scored.append((Fraction(dot * dot, self._norms[cid] * qnorm), cid))
        scored.sort(key=lambda pair: (-pair[0], pair[1]))
        result: list[tuple[str, float]] = []
        for squared, cid in scored[:k]:
            if squared == 0:
                result.append((cid, 0.0))
            elif squared == 1:
                result.append((cid, 1.0))
            else:
                result.append((cid, math.sqrt(squared.numerator / squared.denominator)))
        return result


def build_index(inventory: Inventory) -> SimIndex:
    return SimIndex(inventory)


def sim(index: SimilarityIndex, component_id: str, text: str) -> float:
    return index.sim(component_id, text)


def top_k(index: SimilarityIndex, text: str, k: int) -> list[tuple[str, float]]:
    return index.top_k(text, k)


def cosine(text_a: str, text_b: str) -> float:
    """Cosine similarity between two standalone texts."""
    a, b = _counts(text_a), _counts(text_b)
    dot = _dot(a, b)
    if dot == 0:
        return 0.0
    n2 = _norm2(a) * _norm2(b)
    if dot * dot == n2:
        return 1.0
    return math.sqrt((dot * dot) / n2)


def token_weights(texts: Sequence[str]) -> dict[str, int]:
    """Aggregate token counts across texts, mainly for debugging."""
    total: Counter[str] = Counter()
    for text in texts:
        total.update(tokenize(text))
    return dict(sorted(total.items()))
