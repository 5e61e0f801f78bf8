"""Split a tokenized document into non-overlapping pages.

Three grouping principles are supported: ``spatial`` (contiguous sentence
groups), ``discourse`` (one page per section) and ``document`` (one page
per member of a multi-document cluster).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

from .corpus import SentenceDoc
from .exceptions import InputError
from .text import SEP_ID

LOCALITIES = ("spatial", "discourse", "document")


@dataclass(frozen=True)
class PagingConfig:
    locality: str = "spatial"
    page_size: int = 1024
    num_pages: Optional[int] = None
    max_total_tokens: int = 7168

    def __post_init__(self):
        if self.locality not in LOCALITIES:
            raise InputError(f"locality must be one of {LOCALITIES}, got {self.locality!r}")
        if self.page_size < 1:
            raise InputError("page_size must be >= 1")
        if self.num_pages is not None and self.num_pages < 1:
            raise InputError("num_pages must be >= 1")
        if self.max_total_tokens < self.page_size:
            raise InputError("max_total_tokens must be >= page_size")


@dataclass(frozen=True)
class Page:
    tokens: tuple
    origin: Union[int, str]
    sentence_span: tuple  # half-open range into SentenceDoc.sentences

    def __len__(self):
        return len(self.tokens)


@dataclass(frozen=True)
class PagedDocument:
    pages: tuple
    locality: str
    doc_id: str = ""

    def __len__(self):
        return len(self.pages)

    @property
    def lengths(self) -> list[int]:
        return [len(p.tokens) for p in self.pages]

    @property
    def num_tokens(self) -> int:
        return sum(self.lengths)

    def encoder_attention_entries(self) -> int:
        """Score entries one encoder self-attention head materialises."""
        return sum(n * n for n in self.lengths)


def derive_num_pages(num_tokens: int, cfg: PagingConfig) -> int:
    """``ceil(min(tokens, max_total_tokens) / page_size)``, at least 1."""
    capped = min(num_tokens, cfg.max_total_tokens)
    return max(1, math.ceil(capped / cfg.page_size))


def _cap_sentences(sentences, budget):
    kept = []
    for sent in sentences:
        if budget <= 0:
            break
        kept.append(list(sent[:budget]))
        budget -= len(kept[-1])
    return kept


def split_spatial(doc: SentenceDoc, cfg: PagingConfig) -> PagedDocument:
    if not doc.sentences or doc.num_tokens == 0:
        raise InputError(f"document {doc.id!r} is empty")
    sentences = _cap_sentences(doc.sentences, cfg.max_total_tokens)
    n_pages = cfg.num_pages or derive_num_pages(doc.num_tokens, cfg)
    base, extra = divmod(len(sentences), n_pages)
    pages, start = [], 0
    for index in range(n_pages):
        count = base + (1 if index < extra else 0)
        if count == 0:
            continue
        tokens = [t for s in sentences[start : start + count] for t in s][: cfg.page_size]
        if tokens:
            pages.append(Page(tuple(tokens), index, (start, start + count)))
        start += count
    return PagedDocument(tuple(pages), "spatial", doc.id)


def _budgeted_pages(chunks, cfg):
    pages, budget = [], cfg.max_total_tokens
    for tokens, origin, span in chunks:
        if budget <= 0:
            break
        tokens = tokens[: min(cfg.page_size, budget)]
        if not tokens:
            continue
        pages.append(Page(tuple(tokens), origin, span))
        budget -= len(tokens)
    return tuple(pages)


def split_discourse(doc: SentenceDoc, cfg: PagingConfig) -> PagedDocument:
    if not doc.sections:
        raise InputError(
            f"document {doc.id!r} has no sections; use locality='spatial' instead"
        )
    chunks = []
    for sec in doc.sections:
        body = [t for s in doc.sentences[sec.start : sec.end] for t in s]
        chunks.append((list(sec.name_ids) + [SEP_ID] + body, sec.name, (sec.start, sec.end)))
    return PagedDocument(_budgeted_pages(chunks, cfg), "discourse", doc.id)


def split_document(doc: SentenceDoc, cfg: PagingConfig) -> PagedDocument:
    if not doc.members:
        raise InputError(f"document {doc.id!r} is not a multi-document cluster")
    chunks = []
    for index, (a, b) in enumerate(doc.members):
        tokens = [t for s in doc.sentences[a:b] for t in s]
        chunks.append((tokens, index, (a, b)))
    pages = _budgeted_pages(chunks, cfg)
    if not pages:
        raise InputError(f"cluster {doc.id!r} has no tokens")
    return PagedDocument(pages, "document", doc.id)


_SPLITTERS = {
    "spatial": split_spatial,
    "discourse": split_discourse,
    "document": split_document,
}


def paginate(doc: SentenceDoc, cfg: PagingConfig) -> PagedDocument:
    return _SPLITTERS[cfg.locality](doc, cfg)


def validate(pd: PagedDocument, cfg: PagingConfig, doc: Optional[SentenceDoc] = None) -> list[str]:
    """Return a list of invariant violations; empty means valid.

    With ``doc`` given, spatial documents are also checked to tile a
    prefix of the source sentence list.
    """
    problems = []
    if not pd.pages:
        problems.append("document has no pages")
    for i, page in enumerate(pd.pages):
        if not 1 <= len(page.tokens) <= cfg.page_size:
            problems.append(f"page {i}: length {len(page.tokens)} outside [1, {cfg.page_size}]")
        a, b = page.sentence_span
        if a > b:
            problems.append(f"page {i}: inverted sentence span {page.sentence_span}")
    spans = sorted(p.sentence_span for p in pd.pages)
    for (a1, b1), (a2, b2) in zip(spans, spans[1:]):
        if a2 < b1:
            problems.append(f"overlapping sentence spans {(a1, b1)} and {(a2, b2)}")
    if pd.locality == "spatial":
        limit = cfg.num_pages
        if limit is None and doc is not None:
            limit = derive_num_pages(doc.num_tokens, cfg)
        if limit is not None and len(pd.pages) > limit:
            problems.append(f"{len(pd.pages)} pages exceeds the configured {limit}")
        if doc is not None and pd.pages:
            problems.extend(_spatial_prefix_problems(pd, cfg, doc))
    return problems


def _spatial_prefix_problems(pd, cfg, doc):
    problems = []
    expected_start = 0
    capped = _cap_sentences(doc.sentences, cfg.max_total_tokens)
    for i, page in enumerate(pd.pages):
        a, b = page.sentence_span
        if a != expected_start:
            problems.append(f"page {i}: span starts at {a}, expected {expected_start}")
        expected_start = b
        source = [t for s in capped[a:b] for t in s][: cfg.page_size]
        if list(page.tokens) != source:
            problems.append(f"page {i}: tokens differ from source sentences {a}..{b}")
    return problems
