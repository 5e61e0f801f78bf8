from .functional import (
    AttentionCounter,
    AttentionEvent,
    attention,
    attention_hook,
    causal_mask,
    cross_entropy_smoothed,
    log_softmax,
    softmax,
)
from .gradcheck import GradCheckReport, finite_diff_check
from .optim import OptimizerState, adam_step, clip_grad_norm, lr_at
from .tensor import DEFAULT_DTYPE, Tensor, no_grad

__all__ = [
    "AttentionCounter",
    "AttentionEvent",
    "DEFAULT_DTYPE",
    "GradCheckReport",
    "OptimizerState",
    "Tensor",
    "adam_step",
    "attention",
    "attention_hook",
    "causal_mask",
    "clip_grad_norm",
    "cross_entropy_smoothed",
    "finite_diff_check",
    "log_softmax",
    "lr_at",
    "no_grad",
    "softmax",
]
