"""Attention-score accounting for paged versus full-sequence encoding."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

from ..model import ModelConfig, encode_page, init_params
from ..numerics.functional import AttentionCounter, attention_hook
from ..numerics.tensor import no_grad
from ..paging import PagingConfig, split_spatial
from ..synthetic import token_document

BENCH_MODES = ("paged", "full")


@dataclass(frozen=True)
class MemoryReport:
    l_d: int
    mode: str
    entries: int  # measured through the attention hook
    bound: int  # page_size * l_D (paged) or l_D**2 (full), times layers*heads
    page_lengths: tuple
    layers: int
    heads: int

    @property
    def expected_entries(self) -> int:
        return sum(n * n for n in self.page_lengths) * self.layers * self.heads

    @property
    def within_bound(self) -> bool:
        return self.entries <= self.bound


def counting_model(max_length: int, layers: int = 1, heads: int = 1) -> ModelConfig:
    """A minimal encoder whose only job is to allocate attention scores."""
    return ModelConfig(
        vocab_size=64,
        d_model=4 * heads,
        n_heads=heads,
        n_encoder_layers=layers,
        n_decoder_layers=0,
        d_ff=4,
        max_positions=max_length,
    )


def measure(l_d: int, page_size: int, mode: str, cfg: ModelConfig, params=None, seed: int = 0) -> MemoryReport:
    if mode not in BENCH_MODES:
        raise ValueError(f"mode must be one of {BENCH_MODES}")
    params = params if params is not None else init_params(cfg, seed)
    doc = token_document(l_d, vocab_size=cfg.vocab_size, seed=seed)
    if mode == "paged":
        paging = PagingConfig(page_size=page_size, max_total_tokens=max(l_d, page_size))
        pages = [p.tokens for p in split_spatial(doc, paging).pages]
        bound = page_size * l_d
    else:
        pages = [tuple(t for s in doc.sentences for t in s)]
        bound = l_d * l_d
    counter = AttentionCounter()
    with no_grad(), attention_hook(counter):
        for tokens in pages:
            encode_page(params, cfg, tokens)
    scale = cfg.n_encoder_layers * cfg.n_heads
    return MemoryReport(
        l_d=l_d,
        mode=mode,
        entries=counter.total("encoder.self"),
        bound=bound * scale,
        page_lengths=tuple(len(p) for p in pages),
        layers=cfg.n_encoder_layers,
        heads=cfg.n_heads,
    )


def memory_bench(lengths, page_size=1024, cfg: ModelConfig = None, modes=BENCH_MODES, seed=0) -> list:
    lengths = [int(n) for n in lengths]
    if any(n < 1 for n in lengths):
        raise ValueError("document lengths must be >= 1")
    cfg = cfg or counting_model(max(max(lengths), page_size))
    params = init_params(cfg, seed)
    return [measure(n, page_size, mode, cfg, params, seed) for n in lengths for mode in modes]


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["l_D", "mode", "entries", "bound"])
    for r in reports:
        w.writerow([r.l_d, r.mode, r.entries, r.bound])
    return buf.getvalue()
