"""Page-wise encoding and confidence-weighted fusion for long-input summarization."""

from .checkpoint import load_checkpoint, save_checkpoint
from .corpus import Record, SentenceDoc, load_corpus, read_jsonl, to_sentence_doc, write_jsonl
from .estimator import PageSplitter, PageSumSummarizer
from .exceptions import (
    ConfigError,
    DegenerateMaskError,
    FormatError,
    InputError,
    NonFiniteLossError,
    NumericError,
    PageSumError,
)
from .model import ModelConfig, forward, fuse, generate, init_params, sequence_score
from .paging import Page, PagedDocument, PagingConfig, paginate
from .rouge import rouge_all, rouge_l, rouge_lsum, rouge_n
from .text import Vocabulary, segment_sentences, split_tokens
from .training import TrainConfig, evaluate_loss, make_examples, train

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DegenerateMaskError",
    "FormatError",
    "InputError",
    "ModelConfig",
    "NonFiniteLossError",
    "NumericError",
    "Page",
    "PageSplitter",
    "PageSumError",
    "PageSumSummarizer",
    "PagedDocument",
    "PagingConfig",
    "Record",
    "SentenceDoc",
    "TrainConfig",
    "Vocabulary",
    "evaluate_loss",
    "forward",
    "fuse",
    "generate",
    "init_params",
    "load_checkpoint",
    "load_corpus",
    "make_examples",
    "paginate",
    "read_jsonl",
    "rouge_all",
    "rouge_l",
    "rouge_lsum",
    "rouge_n",
    "save_checkpoint",
    "segment_sentences",
    "sequence_score",
    "split_tokens",
    "to_sentence_doc",
    "train",
    "write_jsonl",
]
