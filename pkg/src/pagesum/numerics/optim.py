"""Adam with the inverse-square-root warmup schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import InputError


def lr_at(step: int, warmup: int = 10000, base: float = 2e-3) -> float:
    """``base * min(step**-0.5, step * warmup**-1.5)``; peaks at ``step == warmup``."""
    if step < 1:
        raise InputError(f"learning-rate step must be >= 1, got {step}")
    if warmup < 1:
        raise InputError(f"warmup must be >= 1, got {warmup}")
    return base * min(step**-0.5, step * warmup**-1.5)


@dataclass
class OptimizerState:
    warmup: int = 10000
    base_lr: float = 2e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.warmup < 1:
            raise InputError("warmup must be positive")
        if self.step < 0:
            raise InputError("step must be non-negative")

    @property
    def lr(self) -> float:
        """Learning rate the *next* update will use."""
        return lr_at(self.step + 1, self.warmup, self.base_lr)


def adam_step(params: dict, grads: dict, state: OptimizerState):
    """Apply one bias-corrected Adam update in parameter-name order.

    ``params`` maps names to tensors whose ``.data`` is replaced with the
    updated array. Returns ``(params, state)``.
    """
    missing = [name for name in params if name not in grads]
    if missing:
        raise InputError(f"missing gradients for {missing[:3]}")
    for name in params:
        if np.shape(grads[name]) != params[name].shape:
            raise InputError(
                f"gradient shape {np.shape(grads[name])} does not match "
                f"parameter {name!r} {params[name].shape}"
            )

    state.step += 1
    t = state.step
    lr = lr_at(t, state.warmup, state.base_lr)
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for name in sorted(params):
        p = params[name]
        dtype = p.dtype.type
        g = np.asarray(grads[name], dtype=p.dtype)
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            v = np.zeros_like(p.data)
        m = dtype(b1) * m + dtype(1.0 - b1) * g
        v = dtype(b2) * v + dtype(1.0 - b2) * (g * g)
        m_hat = m / dtype(c1)
        v_hat = v / dtype(c2)
        p.data = p.data - dtype(lr) * m_hat / (np.sqrt(v_hat) + dtype(state.eps))
        state.m[name] = m
        state.v[name] = v
    return params, state


def clip_grad_norm(grads: dict, max_norm: float):
    """Rescale ``grads`` in place so their global L2 norm is at most ``max_norm``.

    Returns the norm before clipping.
    """
    total = math.sqrt(sum(float(np.sum(np.square(grads[k], dtype=np.float64))) for k in sorted(grads)))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / (total + 1e-6)
        for k in grads:
            grads[k] = grads[k] * grads[k].dtype.type(scale)
    return total
