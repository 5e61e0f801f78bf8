"""Finite-difference check of the full model's backward pass."""

from __future__ import annotations

import numpy as np

from .model import ModelConfig, forward, init_params, teacher_forcing_pair
from .numerics.functional import cross_entropy_smoothed
from .numerics.gradcheck import GradCheckReport, finite_diff_check
from .paging import Page, PagedDocument


def model_gradcheck(
    seed: int = 0,
    eps: float = 1e-3,
    tolerance: float = 1e-3,
    coords_per_param: int = 6,
    label_smoothing: float = 0.1,
    mode: str = "paged",
) -> GradCheckReport:
    """Check every parameter tensor of a tiny two-page model in float64.

    Weights are jittered away from their initial values (zero biases and
    a zero confidence head give degenerate, easy gradients).
    """
    cfg = ModelConfig.tiny()
    rng = np.random.default_rng(seed)
    pages = (
        Page(tuple(int(t) for t in rng.integers(5, cfg.vocab_size, 10)), 0, (0, 1)),
        Page(tuple(int(t) for t in rng.integers(5, cfg.vocab_size, 7)), 1, (1, 2)),
    )
    pd = PagedDocument(pages, "spatial", "gradcheck")
    params = init_params(cfg, seed=seed, dtype=np.float64)
    for name, p in params.items():
        if name.endswith((".b", ".b1", ".b2")) or name == "conf_proj.w":
            p.data = rng.normal(0.0, 0.1, p.shape)
        else:
            p.data = p.data + rng.normal(0.0, 0.2, p.shape)
    summary = [int(t) for t in rng.integers(5, cfg.vocab_size, 6)]
    inp, tgt = teacher_forcing_pair(summary, cfg)

    def loss_fn(p):
        return cross_entropy_smoothed(forward(p, cfg, pd, inp, mode).logits, tgt, label_smoothing)

    return finite_diff_check(
        loss_fn, params, eps=eps, tolerance=tolerance, coords_per_param=coords_per_param, seed=seed
    )
