"""Sentence similarity as a function of index distance within a document."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.feature_extraction.text import TfidfVectorizer
from sklearn.utils.validation import check_is_fitted

from ..exceptions import InputError
from ..text import split_tokens


class TfidfSentenceEmbedder(TransformerMixin, BaseEstimator):
    """L2-normalised TF-IDF bag of words over the package tokenizer."""

    def __init__(self, sublinear_tf=False):
        self.sublinear_tf = sublinear_tf

    def fit(self, sentences, y=None):
        self.vectorizer_ = TfidfVectorizer(
            tokenizer=split_tokens,
            lowercase=False,
            token_pattern=None,
            norm="l2",
            sublinear_tf=self.sublinear_tf,
        ).fit(list(sentences))
        return self

    def transform(self, sentences):
        check_is_fitted(self, "vectorizer_")
        return self.vectorizer_.transform(list(sentences)).toarray()

    def __call__(self, sentences):
        return self.transform(sentences)


class VectorFileEmbedder:
    """Look up precomputed sentence vectors from a JSON object or JSONL file.

    JSON: ``{"sentence": [floats], ...}``; JSONL: one
    ``{"sentence": ..., "vector": [...]}`` per line.
    """

    def __init__(self, path):
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
        try:
            table = json.loads(text)
        except json.JSONDecodeError:
            table = {}
            for line in text.splitlines():
                if line.strip():
                    row = json.loads(line)
                    table[row["sentence"]] = row["vector"]
        if not isinstance(table, dict) or not table:
            raise InputError(f"{path}: expected a non-empty sentence -> vector mapping")
        self.table = {k: np.asarray(v, dtype=np.float64) for k, v in table.items()}
        dims = {v.shape for v in self.table.values()}
        if len(dims) != 1:
            raise InputError(f"{path}: vectors have inconsistent dimensions {sorted(dims)}")

    def __call__(self, sentences):
        try:
            return np.stack([self.table[s] for s in sentences])
        except KeyError as exc:
            raise InputError(f"no vector for sentence {exc.args[0]!r}") from None


@dataclass
class LocalityCurve:
    distances: list = field(default_factory=list)
    mean_similarity: list = field(default_factory=list)
    counts: list = field(default_factory=list)
    corpus_mean: float = float("nan")
    corpus_pairs: int = 0
    skipped_zero_pairs: int = 0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["distance", "mean_sim", "count"])
        for d, s, c in zip(self.distances, self.mean_similarity, self.counts):
            w.writerow([d, f"{s:.6f}", c])
        return buf.getvalue()


def locality_curve(documents, embedder=None, max_distance=None) -> LocalityCurve:
    """Mean cosine similarity of sentence pairs bucketed by index distance.

    ``documents`` is a sequence of sentence-string lists. Every pair within
    ``max_distance`` contributes to its bucket; ``corpus_mean`` averages all
    within-document pairs regardless of distance. Pairs touching a
    zero-vector sentence are skipped and counted in ``skipped_zero_pairs``.
    """
    documents = [list(doc) for doc in documents]
    if embedder is None:
        embedder = TfidfSentenceEmbedder().fit([s for doc in documents for s in doc])
    sums, counts = {}, {}
    total, total_pairs, skipped = 0.0, 0, 0
    for doc in documents:
        n = len(doc)
        if n < 2:
            continue
        vecs = np.asarray(embedder(doc), dtype=np.float64)
        if vecs.ndim != 2 or vecs.shape[0] != n:
            raise InputError("embedder must return one vector per sentence")
        norms = np.linalg.norm(vecs, axis=1)
        valid = norms > 0
        unit = np.zeros_like(vecs)
        unit[valid] = vecs[valid] / norms[valid, None]
        sim = np.clip(unit @ unit.T, -1.0, 1.0)
        ok = np.outer(valid, valid)
        upper = np.triu(np.ones((n, n), dtype=bool), k=1)
        skipped += int((upper & ~ok).sum())
        total += float(sim[upper & ok].sum())
        total_pairs += int((upper & ok).sum())
        limit = n - 1 if max_distance is None else min(max_distance, n - 1)
        for d in range(1, limit + 1):
            diag = np.diagonal(sim, offset=d)
            keep = np.diagonal(ok, offset=d)
            if keep.any():
                sums[d] = sums.get(d, 0.0) + float(diag[keep].sum())
                counts[d] = counts.get(d, 0) + int(keep.sum())
    curve = LocalityCurve(corpus_pairs=total_pairs, skipped_zero_pairs=skipped)
    for d in sorted(counts):
        curve.distances.append(d)
        curve.mean_similarity.append(sums[d] / counts[d])
        curve.counts.append(counts[d])
    if total_pairs:
        curve.corpus_mean = total / total_pairs
    return curve
