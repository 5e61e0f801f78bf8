"""Mining interdependent source-sentence pairs behind fusion sentences.

For a summary sentence ``h`` the interdependent pair is the unordered pair
of source sentences whose concatenation (in document order) has the
highest ROUGE recall against ``h``. The pair is kept only if each sentence
alone already has recall above ``t1`` and the pair beats each single
sentence by more than ``t2`` (both on the 0-100 scale).
"""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass

import numpy as np

from ..rouge import lcs_length, rouge_n_hits

VARIANTS = ("rouge1", "rouge2", "rougeL")


@dataclass(frozen=True)
class FusionPair:
    summary_index: int
    src_i: int
    src_j: int
    score: float  # pair recall, 0-100
    score_i: float
    score_j: float
    doc_length: int
    doc_id: str = ""

    @property
    def gain(self) -> float:
        return self.score - max(self.score_i, self.score_j)

    @property
    def norm_dist(self) -> float:
        return abs(self.src_j - self.src_i) / self.doc_length


def _recall_hits(source, reference, variant):
    """Matched count and reference size, reading ``reference`` as the gold side."""
    if variant == "rouge1":
        hits, _, total = rouge_n_hits(source, reference, 1)
    elif variant == "rouge2":
        hits, _, total = rouge_n_hits(source, reference, 2)
    elif variant == "rougeL":
        hits, total = lcs_length(source, reference), len(reference)
    else:
        raise ValueError(f"unknown ROUGE variant {variant!r}; choose from {VARIANTS}")
    return hits, total


def _unigram_pair_hits(doc, h):
    """All-pairs unigram hits of ``doc[i] + doc[j]`` against ``h`` at once."""
    ref = Counter(h)
    vocab = sorted(ref)
    index = {t: k for k, t in enumerate(vocab)}
    counts = np.zeros((len(doc), len(vocab)), dtype=np.int64)
    for i, sent in enumerate(doc):
        for tok in sent:
            k = index.get(tok)
            if k is not None:
                counts[i, k] += 1
    cap = np.array([ref[t] for t in vocab], dtype=np.int64)
    single = np.minimum(counts, cap).sum(axis=1)
    pair = np.minimum(counts[:, None, :] + counts[None, :, :], cap).sum(axis=2)
    return single, pair


def find_fusion_pairs(doc_sentences, summary_sentences, t1=20.0, t2=10.0, variant="rouge1", doc_id=""):
    """One :class:`FusionPair` per summary sentence that passes both rules.

    Sentences are token sequences. Ties in pair recall go to the
    lexicographically smallest ``(i, j)``.
    """
    doc = [list(s) for s in doc_sentences]
    n = len(doc)
    found = []
    if n < 2:
        return found
    upper_i, upper_j = np.triu_indices(n, k=1)
    for k, h in enumerate(summary_sentences):
        h = list(h)
        _, total = _recall_hits([], h, variant)
        if total == 0:
            continue
        if variant == "rouge1":
            single, pair = _unigram_pair_hits(doc, h)
            flat = pair[upper_i, upper_j]
            best = int(np.argmax(flat))  # first maximum = smallest (i, j)
            i, j, best_hits = int(upper_i[best]), int(upper_j[best]), int(flat[best])
        else:
            single = [_recall_hits(s, h, variant)[0] for s in doc]
            best_hits, i, j = -1, 0, 0
            for a in range(n):
                for b in range(a + 1, n):
                    hits = _recall_hits(doc[a] + doc[b], h, variant)[0]
                    if hits > best_hits:
                        best_hits, i, j = hits, a, b
        hi, hj = int(single[i]), int(single[j])
        # integer numerators keep threshold comparisons exact
        if 100 * hi / total <= t1 or 100 * hj / total <= t1:
            continue
        if 100 * (best_hits - hi) / total <= t2 or 100 * (best_hits - hj) / total <= t2:
            continue
        found.append(
            FusionPair(k, i, j, 100 * best_hits / total, 100 * hi / total, 100 * hj / total, n, doc_id)
        )
    return found


def distance_histogram(pairs, bins=10) -> np.ndarray:
    """Counts of pairs by normalised distance in ``bins`` equal buckets of [0, 1]."""
    dists = [p.norm_dist for p in pairs]
    counts, _ = np.histogram(dists, bins=bins, range=(0.0, 1.0))
    return counts


def pairs_to_csv(pairs) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["doc_id", "summary_idx", "src_i", "src_j", "score", "gain", "norm_dist"])
    for p in pairs:
        w.writerow([p.doc_id, p.summary_index, p.src_i, p.src_j, f"{p.score:.4f}", f"{p.gain:.4f}", f"{p.norm_dist:.6f}"])
    return buf.getvalue()
