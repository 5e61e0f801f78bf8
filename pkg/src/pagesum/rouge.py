"""ROUGE-1/2/L on token sequences (no stemming, no stop-word removal).

Scores are on the 0-1 scale; multiply by 100 for the conventional
reporting scale.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, hits: int, hyp_total: int, ref_total: int) -> "RougeScore":
        p = hits / hyp_total if hyp_total else 0.0
        r = hits / ref_total if ref_total else 0.0
        f = 2 * p * r / (p + r) if p + r > 0 else 0.0
        return cls(p, r, f)

    def scaled(self, factor: float = 100.0) -> "RougeScore":
        return RougeScore(self.precision * factor, self.recall * factor, self.f1 * factor)


def ngrams(tokens: Sequence, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def rouge_n_hits(hyp: Sequence, ref: Sequence, n: int) -> tuple[int, int, int]:
    """Clipped overlap count and the n-gram totals of hyp and ref."""
    h, r = ngrams(hyp, n), ngrams(ref, n)
    hits = sum((h & r).values())
    return hits, sum(h.values()), sum(r.values())


def rouge_n(hyp: Sequence, ref: Sequence, n: int = 1) -> RougeScore:
    if n not in (1, 2):
        raise ValueError(f"rouge_n supports n in {{1, 2}}, got {n}")
    return RougeScore.from_counts(*rouge_n_hits(hyp, ref, n))


def lcs_length(a: Sequence, b: Sequence) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l(hyp: Sequence, ref: Sequence) -> RougeScore:
    """Sentence-level ROUGE-L from the longest common subsequence."""
    return RougeScore.from_counts(lcs_length(hyp, ref), len(hyp), len(ref))


def _lcs_positions(a: Sequence, b: Sequence) -> set:
    """Indices into ``b`` of one longest common subsequence of a and b."""
    table = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            table[i + 1][j + 1] = table[i][j] + 1 if x == y else max(table[i][j + 1], table[i + 1][j])
    picked, i, j = set(), len(a), len(b)
    while i and j:
        if a[i - 1] == b[j - 1]:
            picked.add(j - 1)
            i, j = i - 1, j - 1
        elif table[i - 1][j] >= table[i][j - 1]:
            i -= 1
        else:
            j -= 1
    return picked


def rouge_lsum(hyp_sents: Sequence[Sequence], ref_sents: Sequence[Sequence]) -> RougeScore:
    """Summary-level ROUGE-L: union LCS of each reference sentence against
    all hypothesis sentences, with hits clipped by token counts."""
    hyp_counts = Counter(t for s in hyp_sents for t in s)
    ref_counts = Counter(t for s in ref_sents for t in s)
    hits = 0
    for ref in ref_sents:
        union = set()
        for hyp in hyp_sents:
            union |= _lcs_positions(hyp, ref)
        for pos in sorted(union):
            tok = ref[pos]
            if hyp_counts[tok] > 0 and ref_counts[tok] > 0:
                hits += 1
                hyp_counts[tok] -= 1
                ref_counts[tok] -= 1
    return RougeScore.from_counts(
        hits, sum(len(s) for s in hyp_sents), sum(len(s) for s in ref_sents)
    )


def rouge_all(hyp: Sequence, ref: Sequence) -> dict:
    return {"rouge1": rouge_n(hyp, ref, 1), "rouge2": rouge_n(hyp, ref, 2), "rougeL": rouge_l(hyp, ref)}
