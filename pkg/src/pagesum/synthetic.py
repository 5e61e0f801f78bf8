"""Synthetic corpora with known structure, for smoke tests and benchmarks."""

from __future__ import annotations

import numpy as np

from .corpus import Record, SentenceDoc


def overfit_pairs(n_docs=10, sentences=4, words_per_sentence=5, pool=40, seed=0):
    """Documents of random words; the summary is each sentence's first word."""
    rng = np.random.default_rng(seed)
    records = []
    for d in range(n_docs):
        sents = [[f"w{w}" for w in rng.integers(0, pool, words_per_sentence)] for _ in range(sentences)]
        text = " ".join(" ".join(s) + "." for s in sents)
        summary = " ".join(s[0] for s in sents) + "."
        records.append(Record(f"doc{d}", summary, text=text))
    return records


def cyclic_window_corpus(n_docs=20, min_sentences=24, max_sentences=40, window=8, seed=0):
    """Sentence ``i`` holds tokens ``i .. i+window-1`` (mod N) of a per-document
    token ring, so sentences ``k`` apart share ``max(0, window - k)`` tokens
    (cyclic distance). Every token occurs in exactly ``window`` sentences,
    which makes corpus-wide IDF uniform.

    Returns ``(documents, expected_corpus_mean)``: documents are lists of
    sentence strings, and the expectation is the mean cosine over all
    within-document pairs of a binary bag-of-words embedding.
    """
    if min_sentences < 2 * window:
        raise ValueError("min_sentences must be >= 2 * window")
    rng = np.random.default_rng(seed)
    docs, sims = [], []
    for d in range(n_docs):
        n = int(rng.integers(min_sentences, max_sentences + 1))
        docs.append([" ".join(f"d{d}t{(i + t) % n}" for t in range(window)) for i in range(n)])
        for i in range(n):
            for j in range(i + 1, n):
                k = min(j - i, n - (j - i))
                sims.append(max(0, window - k) / window)
    return docs, float(np.mean(sims))


def token_document(length: int, doc_id: str = "synthetic", vocab_size: int = 64, seed: int = 0) -> SentenceDoc:
    """``length`` one-token sentences of random non-reserved ids."""
    rng = np.random.default_rng(seed)
    ids = rng.integers(5, max(6, vocab_size), size=length)
    return SentenceDoc(doc_id, [[int(t)] for t in ids], [])
