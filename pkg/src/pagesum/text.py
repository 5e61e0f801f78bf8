"""Whitespace/punctuation tokenizer, sentence splitter and vocabulary."""

from __future__ import annotations

import re
from collections import Counter
from typing import Iterable, Sequence

PAD, BOS, EOS, UNK = "<pad>", "<s>", "</s>", "<unk>"
SEP = "<sep>"
PAD_ID, BOS_ID, EOS_ID, UNK_ID = 0, 1, 2, 3
SEP_ID = 4
RESERVED = (PAD, BOS, EOS, UNK)

_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)
_BOUNDARY_RE = re.compile(r"(?<=[.!?])\s+")
_NO_SPACE_BEFORE = set(".,;:!?%)]}'")
_NO_SPACE_AFTER = set("([{$")

ABBREVIATIONS = frozenset(
    """
    dr mr mrs ms prof sr jr st mt vs etc e.g i.e al fig figs eq eqs no nos vol
    inc ltd co corp dept univ approx jan feb mar apr jun jul aug sep sept oct
    nov dec gen col lt sgt rev gov sen rep u.s
    """.split()
)


def split_tokens(text: str) -> list[str]:
    """Lowercase and split into word and single-punctuation tokens."""
    return _TOKEN_RE.findall(text.lower())


def join_tokens(tokens: Iterable[str]) -> str:
    out = []
    for tok in tokens:
        if out and tok not in _NO_SPACE_BEFORE and out[-1][-1:] not in _NO_SPACE_AFTER:
            out.append(" ")
        out.append(tok)
    return "".join(out)


def segment_sentences(text: str) -> list[str]:
    """Split after ``.``, ``!`` or ``?`` followed by whitespace.

    A period ending a known abbreviation ("Dr.", "e.g.") is not a
    boundary.
    """
    text = text.strip()
    if not text:
        return []
    sentences, start = [], 0
    for match in _BOUNDARY_RE.finditer(text):
        candidate = text[start : match.start()]
        last_word = candidate.rsplit(None, 1)[-1] if candidate.split() else ""
        if last_word.endswith(".") and last_word[:-1].lower().lstrip("(\"'") in ABBREVIATIONS:
            continue
        sentences.append(candidate)
        start = match.end()
    sentences.append(text[start:])
    return [s for s in sentences if s]


class Vocabulary:
    """Immutable token <-> id bijection.

    Ids 0..3 are PAD, BOS, EOS, UNK; id 4 is the section separator used
    by discourse paging. Corpus tokens follow in descending frequency.
    """

    def __init__(self, tokens: Sequence[str] = ()):
        itos = list(RESERVED) + [SEP]
        seen = set(itos)
        for tok in tokens:
            if tok in seen:
                raise ValueError(f"duplicate vocabulary entry {tok!r}")
            seen.add(tok)
            itos.append(tok)
        self._itos = tuple(itos)
        self._stoi = {tok: i for i, tok in enumerate(self._itos)}

    @classmethod
    def build(cls, texts: Iterable[str], min_freq: int = 2, max_size=None) -> "Vocabulary":
        counts = Counter()
        for text in texts:
            counts.update(split_tokens(text))
        for special in (*RESERVED, SEP):
            counts.pop(special, None)
        ranked = sorted(
            (tok for tok, c in counts.items() if c >= min_freq), key=lambda t: (-counts[t], t)
        )
        if max_size is not None:
            ranked = ranked[: max(0, max_size - len(RESERVED) - 1)]
        return cls(ranked)

    def __len__(self):
        return len(self._itos)

    def __contains__(self, token):
        return token in self._stoi

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self._itos == other._itos

    def __hash__(self):
        return hash(self._itos)

    def id_of(self, token: str) -> int:
        return self._stoi.get(token, UNK_ID)

    def token_of(self, idx: int) -> str:
        return self._itos[idx]

    @property
    def tokens(self) -> tuple:
        return self._itos

    def encode(self, text: str) -> list[int]:
        return [self.id_of(t) for t in split_tokens(text)]

    def decode(self, ids: Iterable[int], strip_special: bool = True) -> str:
        skip = {PAD_ID, BOS_ID, EOS_ID} if strip_special else set()
        return join_tokens(self._itos[i] for i in ids if i not in skip)

    def to_json(self) -> list[str]:
        return list(self._itos[len(RESERVED) + 1 :])

    @classmethod
    def from_json(cls, tokens) -> "Vocabulary":
        return cls(tokens)


def tokenize(text: str, vocab: Vocabulary) -> list[int]:
    return vocab.encode(text)


def detokenize(ids: Iterable[int], vocab: Vocabulary) -> str:
    return vocab.decode(ids)
