"""Semantic coherence: mean next-sentence probability over consecutive pairs."""

from __future__ import annotations

import math
from collections import Counter

from ..exceptions import InputError
from ..text import split_tokens


def lexical_next_sentence_probability(previous: str, current: str, slope=6.0, offset=-1.0) -> float:
    """Stand-in scorer: logistic of the bag-of-words cosine of the two sentences."""
    a, b = Counter(split_tokens(previous)), Counter(split_tokens(current))
    dot = sum(a[t] * b[t] for t in a.keys() & b.keys())
    norm = math.sqrt(sum(v * v for v in a.values()) * sum(v * v for v in b.values()))
    cos = dot / norm if norm else 0.0
    return 1.0 / (1.0 + math.exp(-(slope * cos + offset)))


def semantic_coherence(sentences, p=None) -> float:
    """``sum_{i>=2} p(S_i | S_{i-1}) / (N - 1)``; ``p(prev, cur)`` must be in [0, 1]."""
    sentences = list(sentences)
    if len(sentences) < 2:
        raise InputError("semantic coherence needs at least two sentences")
    p = p or lexical_next_sentence_probability
    total = 0.0
    for prev, cur in zip(sentences, sentences[1:]):
        value = float(p(prev, cur))
        if not 0.0 <= value <= 1.0:
            raise InputError(f"next-sentence probability {value} outside [0, 1]")
        total += value
    return total / (len(sentences) - 1)
