"""scikit-learn style front end: ``PageSplitter`` and ``PageSumSummarizer``.

Both accept documents as :class:`~pagesum.corpus.Record` objects, corpus
dicts (the JSONL schema) or plain strings.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .checkpoint import load_checkpoint, save_checkpoint
from .corpus import Record, corpus_texts, parse_record, to_sentence_doc
from .exceptions import InputError
from .model import ModelConfig, generate, init_params
from .paging import PagingConfig, paginate
from .rouge import rouge_l
from .text import Vocabulary, split_tokens
from .training import TrainConfig, evaluate_loss, make_examples, train


def as_records(X, y=None) -> list:
    """Coerce documents (and optional summaries) into ``Record`` objects."""
    if isinstance(X, (str, dict, Record)):
        raise InputError("expected a sequence of documents, got a single document")
    records = []
    for i, doc in enumerate(X):
        if isinstance(doc, Record):
            rec = doc
        elif isinstance(doc, dict):
            rec = parse_record({"id": str(i), **doc}, f"document {i}")
        elif isinstance(doc, str):
            rec = Record(str(i), "", text=doc)
        else:
            raise InputError(f"document {i}: unsupported type {type(doc).__name__}")
        records.append(rec)
    if y is not None:
        y = list(y)
        if len(y) != len(records):
            raise InputError(f"got {len(records)} documents but {len(y)} summaries")
        records = [
            Record(r.id, str(s), text=r.text, sections=r.sections, documents=r.documents)
            for r, s in zip(records, y)
        ]
    if not records:
        raise InputError("no documents given")
    return records


class PageSplitter(TransformerMixin, BaseEstimator):
    """Fit a vocabulary, then turn documents into paged token documents."""

    def __init__(self, locality="spatial", page_size=1024, num_pages=None, max_total_tokens=7168, min_freq=2):
        self.locality = locality
        self.page_size = page_size
        self.num_pages = num_pages
        self.max_total_tokens = max_total_tokens
        self.min_freq = min_freq

    def _paging(self):
        return PagingConfig(self.locality, self.page_size, self.num_pages, self.max_total_tokens)

    def fit(self, X, y=None):
        self._paging()
        self.vocab_ = Vocabulary.build(corpus_texts(as_records(X, y)), self.min_freq)
        return self

    def transform(self, X):
        check_is_fitted(self, "vocab_")
        cfg = self._paging()
        return [paginate(to_sentence_doc(r, self.vocab_), cfg) for r in as_records(X)]


class PageSumSummarizer(BaseEstimator):
    """Page-wise encoder-decoder summarizer trained from scratch.

    ``fit`` builds the vocabulary and trains; ``predict`` decodes one
    summary string per document; ``score`` is mean ROUGE-L F1 (0-1).
    """

    def __init__(
        self,
        locality="spatial",
        page_size=64,
        num_pages=None,
        max_total_tokens=512,
        mode="paged",
        d_model=16,
        n_heads=2,
        n_encoder_layers=2,
        n_decoder_layers=2,
        d_ff=32,
        max_positions=None,
        dropout=0.0,
        init_std=0.02,
        min_freq=2,
        epochs=10,
        batch_size=1,
        base_lr=2e-3,
        warmup=10000,
        label_smoothing=0.1,
        clip_norm=1.0,
        max_steps=None,
        checkpoint_dir=None,
        strategy="greedy",
        beam_size=4,
        max_len=64,
        length_penalty=1.0,
        seed=0,
    ):
        self.locality = locality
        self.page_size = page_size
        self.num_pages = num_pages
        self.max_total_tokens = max_total_tokens
        self.mode = mode
        self.d_model = d_model
        self.n_heads = n_heads
        self.n_encoder_layers = n_encoder_layers
        self.n_decoder_layers = n_decoder_layers
        self.d_ff = d_ff
        self.max_positions = max_positions
        self.dropout = dropout
        self.init_std = init_std
        self.min_freq = min_freq
        self.epochs = epochs
        self.batch_size = batch_size
        self.base_lr = base_lr
        self.warmup = warmup
        self.label_smoothing = label_smoothing
        self.clip_norm = clip_norm
        self.max_steps = max_steps
        self.checkpoint_dir = checkpoint_dir
        self.strategy = strategy
        self.beam_size = beam_size
        self.max_len = max_len
        self.length_penalty = length_penalty
        self.seed = seed

    # -- configs -----------------------------------------------------------------

    def paging_config(self) -> PagingConfig:
        return PagingConfig(self.locality, self.page_size, self.num_pages, self.max_total_tokens)

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            base_lr=self.base_lr,
            warmup=self.warmup,
            label_smoothing=self.label_smoothing,
            clip_norm=self.clip_norm,
            seed=self.seed,
            checkpoint_dir=self.checkpoint_dir,
            mode=self.mode,
            max_steps=self.max_steps,
        )

    def _model_config(self, vocab_size, records) -> ModelConfig:
        max_positions = self.max_positions
        if max_positions is None:
            longest = max(len(split_tokens(r.summary)) for r in records)
            max_positions = max(self.page_size, longest + 1, self.max_len)
        return ModelConfig(
            vocab_size=vocab_size,
            d_model=self.d_model,
            n_heads=self.n_heads,
            n_encoder_layers=self.n_encoder_layers,
            n_decoder_layers=self.n_decoder_layers,
            d_ff=self.d_ff,
            max_positions=max_positions,
            dropout=self.dropout,
            init_std=self.init_std,
        )

    # -- estimator API -----------------------------------------------------------------

    def fit(self, X, y=None, X_valid=None, y_valid=None):
        records = as_records(X, y)
        self.vocab_ = Vocabulary.build(corpus_texts(records), self.min_freq)
        self.config_ = self._model_config(len(self.vocab_), records)
        self.params_ = init_params(self.config_, self.seed)
        paging = self.paging_config()
        train_set = make_examples(records, self.vocab_, paging, self.config_)
        valid_set = None
        if X_valid is not None:
            valid_set = make_examples(as_records(X_valid, y_valid), self.vocab_, paging, self.config_)
        self.report_ = train(train_set, self.params_, self.config_, self.train_config(), valid_set)
        for name, arr in self.report_.best_params.items():
            self.params_[name].data = arr
        return self

    def _paged(self, X):
        check_is_fitted(self, "params_")
        paging = self.paging_config()
        return [paginate(to_sentence_doc(r, self.vocab_), paging) for r in as_records(X)]

    def predict_ids(self, X) -> list:
        return [
            generate(
                self.params_,
                self.config_,
                pd,
                mode=self.mode,
                strategy=self.strategy,
                beam_size=self.beam_size,
                max_len=min(self.max_len, self.config_.max_positions),
                length_penalty=self.length_penalty,
            )
            for pd in self._paged(X)
        ]

    def predict(self, X) -> list:
        return [self.vocab_.decode(ids) for ids in self.predict_ids(X)]

    def score(self, X, y) -> float:
        hyps = self.predict(X)
        return float(np.mean([rouge_l(split_tokens(h), split_tokens(r)).f1 for h, r in zip(hyps, y)]))

    def loss(self, X, y=None, epsilon=None) -> float:
        """Token-weighted teacher-forced loss on ``X``."""
        check_is_fitted(self, "params_")
        examples = make_examples(as_records(X, y), self.vocab_, self.paging_config(), self.config_)
        eps = self.label_smoothing if epsilon is None else epsilon
        return evaluate_loss(examples, self.params_, self.config_, eps, self.mode)

    # -- persistence -----------------------------------------------------------------

    def save(self, path) -> None:
        """Write ``path`` (checkpoint) and ``path.vocab.json`` beside it."""
        check_is_fitted(self, "params_")
        save_checkpoint(path, self.config_, self.params_)
        Path(f"{path}.vocab.json").write_text(json.dumps(self.vocab_.to_json()), encoding="utf-8")

    @classmethod
    def load(cls, path, vocab_path=None, **params) -> "PageSumSummarizer":
        cfg, weights, _ = load_checkpoint(path)
        vocab_path = vocab_path or f"{path}.vocab.json"
        vocab = Vocabulary.from_json(json.loads(Path(vocab_path).read_text(encoding="utf-8")))
        if len(vocab) != cfg.vocab_size:
            raise InputError(f"vocabulary size {len(vocab)} does not match checkpoint {cfg.vocab_size}")
        est = cls(**params)
        est.config_, est.params_, est.vocab_ = cfg, weights, vocab
        return est
