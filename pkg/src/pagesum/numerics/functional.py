"""Softmax, scaled dot-product attention and the smoothed training loss."""

from __future__ import annotations

import contextlib
import math
import threading
from dataclasses import dataclass

import numpy as np

from ..exceptions import DegenerateMaskError, InputError, NumericError
from .tensor import Tensor, is_grad_enabled, make_result, unbroadcast

MASK_VALUE = -1e9


def _require_finite(arr, what):
    if not np.isfinite(arr).all():
        raise NumericError(f"non-finite input to {what}")


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    xd = x.data
    if not -xd.ndim <= axis < xd.ndim:
        raise InputError(f"axis {axis} out of range for shape {xd.shape}")
    _require_finite(xd, "softmax")
    y = np.exp(xd - xd.max(axis=axis, keepdims=True))
    y /= y.sum(axis=axis, keepdims=True)

    def backward(g):
        return ((g - (g * y).sum(axis=axis, keepdims=True)) * y,)

    return make_result(y, (x,), backward)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    xd = x.data
    _require_finite(xd, "log_softmax")
    shifted = xd - xd.max(axis=axis, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))

    def backward(g):
        return (g - np.exp(out) * g.sum(axis=axis, keepdims=True),)

    return make_result(out, (x,), backward)


# -- attention accounting ----------------------------------------------------


@dataclass(frozen=True)
class AttentionEvent:
    """One materialised score matrix: ``heads`` slices of ``l_q x l_k``."""

    tag: str
    heads: int
    l_q: int
    l_k: int

    @property
    def entries(self) -> int:
        return self.heads * self.l_q * self.l_k


_hooks_lock = threading.Lock()
_hooks: list = []


@contextlib.contextmanager
def attention_hook(callback):
    """Call ``callback(event)`` for every attention score matrix allocated."""
    with _hooks_lock:
        _hooks.append(callback)
    try:
        yield callback
    finally:
        with _hooks_lock:
            _hooks.remove(callback)


class AttentionCounter:
    """Collects :class:`AttentionEvent` objects; use with :func:`attention_hook`."""

    def __init__(self):
        self.events = []

    def __call__(self, event):
        self.events.append(event)

    def total(self, tag=None) -> int:
        return sum(e.entries for e in self.events if tag is None or e.tag == tag)


def attention(q: Tensor, k: Tensor, v: Tensor, mask=None, tag: str = "") -> Tensor:
    """``softmax(q k^T / sqrt(d)) v`` over the last two axes.

    Leading axes (heads) broadcast. ``mask`` is boolean, True where a key
    may be attended; disallowed scores are set to ``MASK_VALUE``.
    """
    qd, kd, vd = q.data, k.data, v.data
    if qd.shape[-1] != kd.shape[-1] or kd.shape[-2] != vd.shape[-2]:
        raise InputError(f"attention shape mismatch: {qd.shape}, {kd.shape}, {vd.shape}")
    l_q, d = qd.shape[-2], qd.shape[-1]
    l_k = kd.shape[-2]
    heads = int(np.prod(np.broadcast_shapes(qd.shape[:-2], kd.shape[:-2]), dtype=np.int64))
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if not mask.any(axis=-1).all():
            raise DegenerateMaskError("attention mask leaves a query row with no keys")

    event = AttentionEvent(tag, heads, l_q, l_k)
    with _hooks_lock:
        hooks = list(_hooks)
    for hook in hooks:
        hook(event)

    scale = qd.dtype.type(1.0 / math.sqrt(d))
    scores = qd @ np.swapaxes(kd, -1, -2)
    scores *= scale
    if mask is not None:
        scores = np.where(mask, scores, scores.dtype.type(MASK_VALUE))
    _require_finite(scores, "attention")
    # in place: for long inputs the score matrix dominates memory
    scores -= scores.max(axis=-1, keepdims=True)
    np.exp(scores, out=scores)
    scores /= scores.sum(axis=-1, keepdims=True)
    probs = scores
    out = probs @ vd

    if not is_grad_enabled():
        return Tensor(out)

    def backward(g):
        gv = np.swapaxes(probs, -1, -2) @ g
        gp = g @ np.swapaxes(vd, -1, -2)
        gs = probs * (gp - (gp * probs).sum(axis=-1, keepdims=True)) * scale
        gq = gs @ kd
        gk = np.swapaxes(gs, -1, -2) @ qd
        return (
            unbroadcast(gq, qd.shape),
            unbroadcast(gk, kd.shape),
            unbroadcast(gv, vd.shape),
        )

    return make_result(out, (q, k, v), backward)


def causal_mask(length: int) -> np.ndarray:
    return np.tril(np.ones((length, length), dtype=bool))


# -- loss ----------------------------------------------------------------------


def cross_entropy_smoothed(logits: Tensor, targets, epsilon: float = 0.1) -> Tensor:
    """Mean over positions of ``(1-eps)*NLL(target) + eps*mean_v NLL(v)``."""
    ld = logits.data
    if ld.ndim != 2 or ld.shape[0] < 1:
        raise InputError(f"logits must be [positions x vocab], got {ld.shape}")
    if not 0.0 <= epsilon < 1.0:
        raise InputError(f"epsilon must be in [0, 1), got {epsilon}")
    targets = np.asarray(targets, dtype=np.int64)
    n, vocab = ld.shape
    if targets.shape != (n,):
        raise InputError(f"expected {n} targets, got shape {targets.shape}")
    if targets.size and (targets.min() < 0 or targets.max() >= vocab):
        raise InputError("target index out of range")
    _require_finite(ld, "cross_entropy_smoothed")

    shifted = ld - ld.max(axis=-1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    rows = np.arange(n)
    nll = -logp[rows, targets]
    uniform = -logp.mean(axis=-1)
    one = ld.dtype.type(1.0)
    eps = ld.dtype.type(epsilon)
    loss = ((one - eps) * nll + eps * uniform).mean()

    def backward(g):
        target_dist = np.full_like(ld, eps / vocab)
        target_dist[rows, targets] += one - eps
        return (g * (np.exp(logp) - target_dist) / n,)

    return make_result(np.asarray(loss, dtype=ld.dtype), (logits,), backward)
