"""Teacher-forced training with smoothed cross-entropy, Adam and the
inverse-square-root warmup schedule, plus validation-based checkpoint
selection."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .checkpoint import save_checkpoint
from .corpus import Record, to_sentence_doc
from .exceptions import ConfigError, DegenerateMaskError, InputError, NonFiniteLossError, NumericError
from .model import MODES, ModelConfig, forward, teacher_forcing_pair
from .numerics.functional import cross_entropy_smoothed
from .numerics.optim import OptimizerState, adam_step, clip_grad_norm, lr_at
from .numerics.tensor import no_grad
from .paging import PagedDocument, PagingConfig, paginate
from .text import Vocabulary

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 10
    batch_size: int = 1
    base_lr: float = 2e-3
    warmup: int = 10000
    label_smoothing: float = 0.1
    clip_norm: float = 1.0
    seed: int = 0
    checkpoint_dir: Optional[str] = None
    mode: str = "paged"
    max_steps: Optional[int] = None

    def __post_init__(self):
        for name in ("epochs", "batch_size", "warmup"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.base_lr <= 0 or self.clip_norm <= 0:
            raise ConfigError("base_lr and clip_norm must be positive")
        if not 0.0 <= self.label_smoothing < 1.0:
            raise ConfigError("label_smoothing must be in [0, 1)")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.max_steps is not None and self.max_steps < 1:
            raise ConfigError("max_steps must be positive")

    @classmethod
    def from_dict(cls, obj: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown training config fields {sorted(unknown)}")
        return cls(**obj)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Example:
    """One teacher-forcing pair: paged source, decoder input, targets."""

    id: str
    pd: PagedDocument
    decoder_input: list
    target: list


@dataclass
class TrainReport:
    step_loss: list = field(default_factory=list)
    step_lr: list = field(default_factory=list)
    step_grad_norm: list = field(default_factory=list)
    epoch_valid_loss: list = field(default_factory=list)
    checkpoints: list = field(default_factory=list)
    best_epoch: Optional[int] = None
    best_checkpoint: Optional[str] = None
    best_params: Optional[dict] = field(default=None, repr=False)

    @property
    def best_valid_loss(self) -> Optional[float]:
        if self.best_epoch is None:
            return None
        return self.epoch_valid_loss[self.best_epoch]

    def to_json(self) -> dict:
        return {
            "step_loss": self.step_loss,
            "step_lr": self.step_lr,
            "step_grad_norm": self.step_grad_norm,
            "epoch_valid_loss": self.epoch_valid_loss,
            "checkpoints": self.checkpoints,
            "best_epoch": self.best_epoch,
            "best_checkpoint": self.best_checkpoint,
        }


def make_examples(records, vocab: Vocabulary, paging: PagingConfig, model_cfg: ModelConfig) -> list:
    if paging.page_size > model_cfg.max_positions:
        raise ConfigError(
            f"page_size {paging.page_size} exceeds max_positions {model_cfg.max_positions}"
        )
    out = []
    for rec in records:
        doc = to_sentence_doc(rec, vocab) if isinstance(rec, Record) else rec
        inp, tgt = teacher_forcing_pair(doc.summary_ids, model_cfg)
        out.append(Example(doc.id, paginate(doc, paging), inp, tgt))
    return out


def example_loss(params, cfg, ex: Example, epsilon, mode="paged", training=False, rng=None):
    logits = forward(params, cfg, ex.pd, ex.decoder_input, mode, training, rng).logits
    return cross_entropy_smoothed(logits, ex.target, epsilon)


def evaluate_loss(examples, params, cfg: ModelConfig, epsilon: float = 0.1, mode: str = "paged") -> float:
    """Token-weighted mean smoothed loss, teacher forced, dropout off."""
    if not examples:
        raise InputError("evaluate_loss needs at least one example")
    total, tokens = 0.0, 0
    with no_grad():
        for ex in examples:
            loss = float(example_loss(params, cfg, ex, epsilon, mode).data)
            total += loss * len(ex.target)
            tokens += len(ex.target)
    return total / tokens


def _snapshot(params):
    return {k: v.data.copy() for k, v in params.items()}


def train(
    examples,
    params: dict,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    valid=None,
    opt_state: OptimizerState = None,
) -> TrainReport:
    """Train ``params`` in place; returns the per-step and per-epoch report.

    One optimizer step per ``batch_size`` documents; per-document gradients
    are summed in batch order then averaged. After each epoch the
    validation loss is recorded and, with a checkpoint directory, a
    checkpoint written. ``report.best_params`` holds the weights from the
    epoch with the lowest validation loss (earliest on ties).
    """
    if not examples:
        raise InputError("training corpus is empty")
    if valid is not None and not valid:
        raise InputError("validation corpus is empty")
    rng = np.random.default_rng(train_cfg.seed)
    if opt_state is None:
        opt_state = OptimizerState(warmup=train_cfg.warmup, base_lr=train_cfg.base_lr)
    ckpt_dir = Path(train_cfg.checkpoint_dir) if train_cfg.checkpoint_dir else None
    if ckpt_dir is not None:
        ckpt_dir.mkdir(parents=True, exist_ok=True)

    report = TrainReport()
    eps = train_cfg.label_smoothing
    steps_done = 0
    for epoch in range(train_cfg.epochs):
        order = rng.permutation(len(examples))
        for start in range(0, len(order), train_cfg.batch_size):
            batch = [examples[i] for i in order[start : start + train_cfg.batch_size]]
            for p in params.values():
                p.grad = None
            batch_loss = 0.0
            batch_ids = [e.id for e in batch]
            for ex in batch:
                try:
                    loss = example_loss(params, model_cfg, ex, eps, train_cfg.mode, True, rng)
                except DegenerateMaskError:
                    raise
                except NumericError as exc:
                    raise NonFiniteLossError(f"{exc} on batch {batch_ids}", batch_id=batch_ids) from exc
                value = float(loss.data)
                if not math.isfinite(value):
                    raise NonFiniteLossError(f"non-finite loss {value} on batch {batch_ids}", batch_id=batch_ids)
                loss.backward()
                batch_loss += value
            scale = 1.0 / len(batch)
            grads = {
                k: (p.grad * p.dtype.type(scale)) if p.grad is not None else np.zeros_like(p.data)
                for k, p in params.items()
            }
            norm = clip_grad_norm(grads, train_cfg.clip_norm)
            report.step_lr.append(lr_at(opt_state.step + 1, opt_state.warmup, opt_state.base_lr))
            adam_step(params, grads, opt_state)
            report.step_loss.append(batch_loss * scale)
            report.step_grad_norm.append(norm)
            steps_done += 1
            if train_cfg.max_steps is not None and steps_done >= train_cfg.max_steps:
                break
        for p in params.values():
            p.grad = None

        val_loss = evaluate_loss(valid if valid else examples, params, model_cfg, eps, train_cfg.mode)
        report.epoch_valid_loss.append(val_loss)
        log.info("epoch %d step %d valid loss %.4f", epoch + 1, steps_done, val_loss)
        path = None
        if ckpt_dir is not None:
            path = ckpt_dir / f"epoch_{epoch + 1:03d}.pgsm"
            save_checkpoint(path, model_cfg, params, opt_state)
            report.checkpoints.append(str(path))
        if report.best_epoch is None or val_loss < report.best_valid_loss:
            report.best_epoch = epoch
            report.best_checkpoint = str(path) if path else None
            report.best_params = _snapshot(params)
        if train_cfg.max_steps is not None and steps_done >= train_cfg.max_steps:
            break

    if ckpt_dir is not None:
        (ckpt_dir / "report.json").write_text(json.dumps(report.to_json(), indent=1))
    return report


def load_train_config(path, overrides: Optional[dict] = None):
    """Read a JSON config; returns ``(TrainConfig, model_overrides, paging_overrides)``.

    Top-level keys are training fields; optional ``"model"`` and
    ``"paging"`` objects carry model and paging settings. ``overrides``
    (e.g. from the command line) win over file values.
    """
    obj = json.loads(Path(path).read_text(encoding="utf-8")) if path else {}
    if not isinstance(obj, dict):
        raise ConfigError("training config must be a JSON object")
    model = obj.pop("model", {})
    paging = obj.pop("paging", {})
    obj.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return TrainConfig.from_dict(obj), model, paging
