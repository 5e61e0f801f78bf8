"""Page-wise encoder-decoder with confidence-weighted fusion of local decoder states.

Every page is encoded on its own (positions restart at 0 per page). At
each decoding step the shared decoder produces one local hidden state per
page by cross-attending only to that page; a linear confidence head scores
each local state, the scores are softmax-normalised across pages, and the
weighted sum of local states is projected onto the vocabulary.

``mode="global"`` is the ablation that concatenates all page encodings and
decodes once against the concatenation, with no confidence head.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Optional

import numpy as np

from .exceptions import ConfigError, InputError
from .numerics import functional as F
from .numerics.tensor import (
    Tensor,
    concat,
    dropout,
    embedding,
    gelu,
    layer_norm,
    no_grad,
    stack,
)
from .paging import PagedDocument
from .text import BOS_ID, EOS_ID, PAD_ID

MODES = ("paged", "global")


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    d_model: int = 16
    n_heads: int = 2
    n_encoder_layers: int = 2
    n_decoder_layers: int = 2
    d_ff: int = 32
    max_positions: int = 64
    dropout: float = 0.0
    init_std: float = 0.02

    def __post_init__(self):
        for name in ("vocab_size", "d_model", "n_heads", "d_ff", "max_positions"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.n_encoder_layers < 0 or self.n_decoder_layers < 0:
            raise ConfigError("layer counts must be non-negative")
        if self.d_model % self.n_heads:
            raise ConfigError(f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must be in [0, 1)")

    @classmethod
    def tiny(cls, vocab_size: int = 64, **overrides) -> "ModelConfig":
        """The small reference configuration used throughout the tests."""
        return cls(vocab_size=vocab_size, **overrides)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown model config fields {sorted(unknown)}")
        return cls(**obj)


def param_shapes(cfg: ModelConfig) -> dict:
    d, ff, v = cfg.d_model, cfg.d_ff, cfg.vocab_size
    shapes = {"tok_emb": (v, d), "pos_emb": (cfg.max_positions, d)}

    def attn(prefix):
        for p in "qkvo":
            shapes[f"{prefix}.{p}.w"] = (d, d)
            shapes[f"{prefix}.{p}.b"] = (d,)

    def norm(prefix):
        shapes[f"{prefix}.g"] = (d,)
        shapes[f"{prefix}.b"] = (d,)

    def ffn(prefix):
        shapes[f"{prefix}.w1"] = (d, ff)
        shapes[f"{prefix}.b1"] = (ff,)
        shapes[f"{prefix}.w2"] = (ff, d)
        shapes[f"{prefix}.b2"] = (d,)

    for i in range(cfg.n_encoder_layers):
        norm(f"enc.{i}.ln1")
        attn(f"enc.{i}.self_attn")
        norm(f"enc.{i}.ln2")
        ffn(f"enc.{i}.ffn")
    norm("enc.ln_f")
    for i in range(cfg.n_decoder_layers):
        norm(f"dec.{i}.ln1")
        attn(f"dec.{i}.self_attn")
        norm(f"dec.{i}.ln2")
        attn(f"dec.{i}.cross_attn")
        norm(f"dec.{i}.ln3")
        ffn(f"dec.{i}.ffn")
    norm("dec.ln_f")
    shapes["vocab_proj.w"] = (d, v)
    shapes["conf_proj.w"] = (d, 1)
    return shapes


def init_params(cfg: ModelConfig, seed: int = 0, dtype=np.float32) -> dict:
    """Normal(0, init_std) weights, zero biases, unit norm gains.

    The confidence head starts at zero so every page is weighted equally
    until training says otherwise.
    """
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in param_shapes(cfg).items():
        if name == "conf_proj.w" or name.endswith(".b") or name.endswith((".b1", ".b2")):
            arr = np.zeros(shape)
        elif name.endswith(".g"):
            arr = np.ones(shape)
        else:
            arr = rng.normal(0.0, cfg.init_std, size=shape)
        params[name] = Tensor(arr.astype(dtype), requires_grad=True)
    return params


def cast_params(params: dict, dtype) -> dict:
    return {k: Tensor(v.data.astype(dtype), requires_grad=v.requires_grad) for k, v in params.items()}


def check_params(params: dict, cfg: ModelConfig) -> None:
    expected = param_shapes(cfg)
    if set(params) != set(expected):
        missing = sorted(set(expected) - set(params))
        extra = sorted(set(params) - set(expected))
        raise ConfigError(f"parameter names do not match config (missing {missing[:3]}, extra {extra[:3]})")
    for name, shape in expected.items():
        if tuple(params[name].shape) != shape:
            raise ConfigError(f"{name}: shape {params[name].shape} does not match config {shape}")


# -- building blocks ---------------------------------------------------------------


class _Ctx:
    """Per-call settings threaded through the layer functions."""

    __slots__ = ("params", "cfg", "training", "rng")

    def __init__(self, params, cfg, training=False, rng=None):
        self.params = params
        self.cfg = cfg
        self.training = training and cfg.dropout > 0
        self.rng = rng if rng is not None else np.random.default_rng(0)

    def drop(self, x):
        return dropout(x, self.cfg.dropout, self.rng, self.training)

    def linear(self, x, prefix):
        p = self.params
        return x @ p[f"{prefix}.w"] + p[f"{prefix}.b"]

    def norm(self, x, prefix):
        p = self.params
        return layer_norm(x, p[f"{prefix}.g"], p[f"{prefix}.b"])

    def ffn(self, x, prefix):
        p = self.params
        h = gelu(x @ p[f"{prefix}.w1"] + p[f"{prefix}.b1"])
        return h @ p[f"{prefix}.w2"] + p[f"{prefix}.b2"]

    def mha(self, x_q, x_kv, prefix, mask=None, tag=""):
        h = self.cfg.n_heads
        lq, d = x_q.shape
        lk = x_kv.shape[0]
        dk = d // h
        q = self.linear(x_q, f"{prefix}.q").reshape(lq, h, dk).transpose(1, 0, 2)
        k = self.linear(x_kv, f"{prefix}.k").reshape(lk, h, dk).transpose(1, 0, 2)
        v = self.linear(x_kv, f"{prefix}.v").reshape(lk, h, dk).transpose(1, 0, 2)
        out = F.attention(q, k, v, mask=mask, tag=tag)
        return self.linear(out.transpose(1, 0, 2).reshape(lq, d), f"{prefix}.o")

    def embed(self, ids):
        n = len(ids)
        if n == 0:
            raise InputError("cannot embed an empty sequence")
        if n > self.cfg.max_positions:
            raise InputError(f"sequence of {n} tokens exceeds max_positions {self.cfg.max_positions}")
        ids = np.asarray(ids, dtype=np.int64)
        if ids.min() < 0 or ids.max() >= self.cfg.vocab_size:
            raise InputError("token id outside the vocabulary")
        p = self.params
        return self.drop(embedding(p["tok_emb"], ids) + p["pos_emb"][:n])


def _encode(ctx: _Ctx, tokens) -> Tensor:
    x = ctx.embed(tokens)
    for i in range(ctx.cfg.n_encoder_layers):
        x = x + ctx.drop(_self_attn(ctx, x, f"enc.{i}", None, "encoder.self"))
        x = x + ctx.drop(ctx.ffn(ctx.norm(x, f"enc.{i}.ln2"), f"enc.{i}.ffn"))
    return ctx.norm(x, "enc.ln_f")


def _self_attn(ctx, x, layer, mask, tag):
    h = ctx.norm(x, f"{layer}.ln1")
    return ctx.mha(h, h, f"{layer}.self_attn", mask=mask, tag=tag)


def _decode(ctx: _Ctx, memory: Tensor, prefix) -> Tensor:
    x = ctx.embed(prefix)
    mask = F.causal_mask(len(prefix))
    for i in range(ctx.cfg.n_decoder_layers):
        x = x + ctx.drop(_self_attn(ctx, x, f"dec.{i}", mask, "decoder.self"))
        h = ctx.norm(x, f"dec.{i}.ln2")
        x = x + ctx.drop(ctx.mha(h, memory, f"dec.{i}.cross_attn", tag="decoder.cross"))
        x = x + ctx.drop(ctx.ffn(ctx.norm(x, f"dec.{i}.ln3"), f"dec.{i}.ffn"))
    return ctx.norm(x, "dec.ln_f")


# -- public operations -------------------------------------------------------------


@dataclass
class FusionState:
    """Snapshot of one paged forward pass.

    ``local_hidden`` is ``[pages, steps, d_model]``; the two confidence
    arrays are ``[steps, pages]``; ``fused_hidden`` is ``[steps, d_model]``.
    """

    local_hidden: np.ndarray
    confidence_raw: np.ndarray
    confidence_norm: np.ndarray
    fused_hidden: np.ndarray


@dataclass
class ForwardResult:
    logits: Tensor
    state: Optional[FusionState] = None

    @property
    def probs(self) -> np.ndarray:
        with no_grad():
            return F.softmax(self.logits, axis=-1).data


def encode_page(params: dict, cfg: ModelConfig, page, training=False, rng=None) -> Tensor:
    """Encoder stack over one page alone; returns ``[page_len, d_model]``."""
    tokens = page.tokens if hasattr(page, "tokens") else page
    return _encode(_Ctx(params, cfg, training, rng), tokens)


def encode_pages(params, cfg, pd: PagedDocument, training=False, rng=None) -> list:
    ctx = _Ctx(params, cfg, training, rng)
    return [_encode(ctx, page.tokens) for page in pd.pages]


def _check_prefix(prefix, cfg):
    if len(prefix) == 0 or prefix[0] != BOS_ID:
        raise InputError("decoder prefix must start with BOS")
    if len(prefix) > cfg.max_positions:
        raise InputError(f"prefix of {len(prefix)} tokens exceeds max_positions {cfg.max_positions}")


def decode_local(params, cfg, encodings, prefix, training=False, rng=None):
    """Run the shared decoder once per page encoding.

    Returns ``(local_hidden, confidence_raw)``: a list with one
    ``[steps, d_model]`` tensor per page and a ``[steps, pages]`` tensor of
    unnormalised confidence scores.
    """
    if not encodings:
        raise InputError("decode_local needs at least one page encoding")
    _check_prefix(prefix, cfg)
    ctx = _Ctx(params, cfg, training, rng)
    local = [_decode(ctx, memory, prefix) for memory in encodings]
    conf = concat([h @ params["conf_proj.w"] for h in local], axis=1)
    return local, conf


def fuse(local_hidden, confidence_raw):
    """Softmax the confidences across pages and mix the local states.

    Returns ``(fused_hidden [steps, d], confidence_norm [steps, pages])``.
    """
    weights = F.softmax(confidence_raw, axis=1)
    steps, n = weights.shape
    stacked = stack(local_hidden, axis=1)  # [steps, pages, d]
    fused = (stacked * weights.reshape(steps, n, 1)).sum(axis=1)
    return fused, weights


def vocab_logits(params, hidden) -> Tensor:
    return hidden @ params["vocab_proj.w"]


def project_vocab(params, hidden) -> Tensor:
    """Per-step distribution over the vocabulary."""
    return F.softmax(vocab_logits(params, hidden), axis=-1)


def forward(params, cfg, pd: PagedDocument, prefix, mode="paged", training=False, rng=None) -> ForwardResult:
    """Teacher-forced pass over ``prefix`` (which starts with BOS)."""
    if mode not in MODES:
        raise InputError(f"mode must be one of {MODES}, got {mode!r}")
    if not pd.pages:
        raise InputError("paged document has no pages")
    _check_prefix(prefix, cfg)
    rng = rng if rng is not None else np.random.default_rng(0)
    encodings = encode_pages(params, cfg, pd, training, rng)
    return _forward_from_encodings(params, cfg, encodings, prefix, mode, training, rng)


def _forward_from_encodings(params, cfg, encodings, prefix, mode, training=False, rng=None):
    if mode == "global":
        ctx = _Ctx(params, cfg, training, rng)
        memory = encodings[0] if len(encodings) == 1 else concat(encodings, axis=0)
        return ForwardResult(vocab_logits(params, _decode(ctx, memory, prefix)))
    local, conf = decode_local(params, cfg, encodings, prefix, training, rng)
    fused, weights = fuse(local, conf)
    state = FusionState(
        local_hidden=np.stack([h.data for h in local]),
        confidence_raw=conf.data,
        confidence_norm=weights.data,
        fused_hidden=fused.data,
    )
    return ForwardResult(vocab_logits(params, fused), state)


def teacher_forcing_pair(summary_ids, cfg):
    """Decoder input ``[BOS] + summary`` and target ``summary + [EOS]``,
    truncated to fit ``max_positions``."""
    body = list(summary_ids)[: cfg.max_positions - 1]
    return [BOS_ID] + body, body + [EOS_ID]


# -- generation ---------------------------------------------------------------------

_BANNED = (PAD_ID, BOS_ID)


class _StepScorer:
    def __init__(self, params, cfg, pd, mode):
        if mode not in MODES:
            raise InputError(f"mode must be one of {MODES}, got {mode!r}")
        self.params, self.cfg, self.mode = params, cfg, mode
        with no_grad():
            self.encodings = encode_pages(params, cfg, pd)

    def log_probs(self, prefix) -> np.ndarray:
        with no_grad():
            res = _forward_from_encodings(self.params, self.cfg, self.encodings, prefix, self.mode)
            lp = F.log_softmax(res.logits[-1], axis=-1).data.astype(np.float64)
        lp[list(_BANNED)] = -np.inf
        return lp


def _normalised(score, length, length_penalty):
    return score / (max(length, 1) ** length_penalty)


def generate(
    params,
    cfg,
    pd: PagedDocument,
    mode="paged",
    strategy="greedy",
    beam_size=4,
    max_len=32,
    length_penalty=1.0,
) -> list:
    """Decode a summary; returns token ids without BOS/EOS."""
    if max_len < 1 or max_len > cfg.max_positions:
        raise InputError(f"max_len must be in [1, {cfg.max_positions}]")
    if strategy not in ("greedy", "beam"):
        raise InputError(f"unknown strategy {strategy!r}")
    scorer = _StepScorer(params, cfg, pd, mode)
    if strategy == "greedy":
        return _greedy(scorer, max_len)
    if beam_size < 1:
        raise InputError("beam_size must be >= 1")
    return _beam(scorer, beam_size, max_len, length_penalty)


def _greedy(scorer, max_len):
    prefix = [BOS_ID]
    for _ in range(max_len):
        tok = int(np.argmax(scorer.log_probs(prefix)))
        if tok == EOS_ID:
            break
        prefix.append(tok)
    return prefix[1:]


def _beam(scorer, beam_size, max_len, length_penalty):
    live = [(0.0, [BOS_ID])]
    finished = []  # (normalised score, order, tokens)
    for _ in range(max_len):
        candidates = []
        for parent, (score, seq) in enumerate(live):
            lp = scorer.log_probs(seq)
            for tok in np.flatnonzero(np.isfinite(lp)):
                candidates.append((score + lp[tok], parent, int(tok)))
        candidates.sort(key=lambda c: (-c[0], c[1], c[2]))
        live_next = []
        for score, parent, tok in candidates[:beam_size]:
            seq = live[parent][1] + [tok]
            if tok == EOS_ID:
                finished.append((_normalised(score, len(seq) - 1, length_penalty), len(finished), seq[1:-1]))
            else:
                live_next.append((score, seq))
        live = live_next
        if not live:
            break
    for score, seq in live:
        finished.append((_normalised(score, len(seq) - 1, length_penalty), len(finished), seq[1:]))
    best = max(finished, key=lambda f: (f[0], -f[1]))
    return best[2]


def sequence_score(params, cfg, pd, tokens, mode="paged", length_penalty=1.0, max_len=None) -> float:
    """Length-normalised log-probability of ``tokens`` (+ EOS unless the
    sequence was cut at ``max_len``), the quantity beam search ranks by."""
    scorer = _StepScorer(params, cfg, pd, mode)
    prefix, total = [BOS_ID], 0.0
    targets = list(tokens)
    if max_len is None or len(targets) < max_len:
        targets.append(EOS_ID)
    for tok in targets:
        total += scorer.log_probs(prefix)[tok]
        prefix.append(tok)
    return _normalised(total, len(targets), length_penalty)
