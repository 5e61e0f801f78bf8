"""``pagesum`` command line.

Exit codes: 0 success, 1 input/format/config error, 2 numeric failure,
3 failed check (gradient check, memory bound).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import shutil
import sys
from pathlib import Path

import numpy as np

from .analysis import (
    VectorFileEmbedder,
    counting_model,
    find_fusion_pairs,
    importance_trace,
    locality_curve,
    memory_bench,
    pairs_to_csv,
    reports_to_csv,
    semantic_coherence,
)
from .analysis.fusion import VARIANTS, distance_histogram
from .checkpoint import load_checkpoint
from .corpus import corpus_texts, load_corpus, to_sentence_doc
from .exceptions import InputError, NumericError, PageSumError
from .gradsuite import model_gradcheck
from .model import MODES, ModelConfig, generate, init_params
from .paging import LOCALITIES, PagingConfig, paginate
from .rouge import rouge_all, rouge_lsum
from .text import Vocabulary, segment_sentences, split_tokens
from .training import load_train_config, make_examples, train

log = logging.getLogger("pagesum")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_CHECK = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"error: {message}\n")


class CheckFailed(Exception):
    """A self-check ran to completion but did not pass."""


# -- shared option groups -----------------------------------------------------------------


def _common_options() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=None, help="random seed (fallback: $PAGESUM_SEED, then 0)")
    p.add_argument("--out", default=None, help="write results here instead of standard output")
    p.add_argument("--threads", type=int, default=None, help="cap numeric worker threads")
    p.add_argument("-v", "--verbose", action="store_true", help="progress on standard error")
    return p


def _paging_options() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--locality", choices=LOCALITIES, default=None)
    p.add_argument("--page-size", type=int, default=None)
    p.add_argument("--num-pages", type=int, default=None)
    p.add_argument("--max-tokens", type=int, default=None, help="total input token budget")
    return p


def _paging_overrides(args) -> dict:
    pairs = {
        "locality": args.locality,
        "page_size": args.page_size,
        "num_pages": args.num_pages,
        "max_total_tokens": args.max_tokens,
    }
    return {k: v for k, v in pairs.items() if v is not None}


def _seed(args, fallback=None) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("PAGESUM_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise InputError(f"PAGESUM_SEED must be an integer, got {env!r}") from None
    return 0 if fallback is None else fallback


def _csv_line(values) -> str:
    return ",".join(str(v) for v in values) + "\n"


# -- model loading -----------------------------------------------------------------


def _load_model(args):
    cfg, params, _ = load_checkpoint(args.checkpoint)
    ckpt = Path(args.checkpoint)
    candidates = [args.vocab] if args.vocab else [ckpt.parent / "vocab.json", Path(f"{ckpt}.vocab.json")]
    vocab_path = next((Path(c) for c in candidates if Path(c).is_file()), None)
    if vocab_path is None:
        raise InputError(f"no vocabulary found for {ckpt}; pass --vocab")
    vocab = Vocabulary.from_json(json.loads(vocab_path.read_text(encoding="utf-8")))
    if len(vocab) != cfg.vocab_size:
        raise InputError(f"vocabulary has {len(vocab)} tokens but the checkpoint expects {cfg.vocab_size}")
    paging = {"page_size": cfg.max_positions, "max_total_tokens": cfg.max_positions * 8}
    saved = ckpt.parent / "paging.json"
    if saved.is_file():
        paging.update(json.loads(saved.read_text(encoding="utf-8")))
    paging.update(_paging_overrides(args))
    return cfg, params, vocab, PagingConfig(**paging)


# -- subcommands -----------------------------------------------------------------


def cmd_train(args) -> str:
    overrides = {
        "epochs": args.epochs,
        "max_steps": args.max_steps,
        "batch_size": args.batch_size,
        "checkpoint_dir": args.checkpoint_dir,
        "mode": args.mode,
    }
    if args.seed is not None or os.environ.get("PAGESUM_SEED"):
        overrides["seed"] = _seed(args)
    train_cfg, model_opts, paging_opts = load_train_config(args.config, overrides)
    if train_cfg.checkpoint_dir is None:
        train_cfg.checkpoint_dir = "checkpoints"
    paging = PagingConfig(**{**paging_opts, **_paging_overrides(args)})

    records = load_corpus(args.corpus)
    valid_records = load_corpus(args.valid) if args.valid else None
    vocab = Vocabulary.build(corpus_texts(records), args.min_freq)
    longest = max(len(split_tokens(r.summary)) for r in records)
    model_opts = {"max_positions": max(paging.page_size, longest + 1), **model_opts, "vocab_size": len(vocab)}
    model_cfg = ModelConfig.from_dict(model_opts)

    examples = make_examples(records, vocab, paging, model_cfg)
    valid = make_examples(valid_records, vocab, paging, model_cfg) if valid_records else None
    out_dir = Path(train_cfg.checkpoint_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "vocab.json").write_text(json.dumps(vocab.to_json()), encoding="utf-8")
    (out_dir / "paging.json").write_text(
        json.dumps(
            {
                "locality": paging.locality,
                "page_size": paging.page_size,
                "num_pages": paging.num_pages,
                "max_total_tokens": paging.max_total_tokens,
            },
            sort_keys=True,
        ),
        encoding="utf-8",
    )
    params = init_params(model_cfg, train_cfg.seed)
    report = train(examples, params, model_cfg, train_cfg, valid)
    if report.best_checkpoint:
        shutil.copyfile(report.best_checkpoint, out_dir / "best.pgsm")
    lines = [_csv_line(["epoch", "valid_loss", "checkpoint"])]
    for k, (loss, path) in enumerate(zip(report.epoch_valid_loss, report.checkpoints)):
        lines.append(_csv_line([k + 1, f"{loss:.6f}", path]))
    log.info("best epoch %d (valid loss %.4f)", report.best_epoch + 1, report.best_valid_loss)
    return "".join(lines)


def cmd_summarize(args) -> str:
    cfg, params, vocab, paging = _load_model(args)
    max_len = min(args.max_len, cfg.max_positions)
    lines = []
    for rec in load_corpus(args.corpus):
        pd = paginate(to_sentence_doc(rec, vocab), paging)
        ids = generate(
            params,
            cfg,
            pd,
            mode=args.mode,
            strategy=args.strategy,
            beam_size=args.beam_size,
            max_len=max_len,
            length_penalty=args.length_penalty,
        )
        lines.append(json.dumps({"id": rec.id, "summary": vocab.decode(ids)}, sort_keys=True) + "\n")
    return "".join(lines)


def _read_summaries(path) -> list:
    """``(id, summary)`` pairs from a JSONL file with ``summary`` fields or plain lines."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    rows = []
    for i, line in enumerate(lines):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            obj = None
        if isinstance(obj, dict) and "summary" in obj:
            rows.append((str(obj.get("id", i)), str(obj["summary"])))
        else:
            rows.append((str(i), line))
    return rows


def cmd_eval_rouge(args) -> str:
    hyps, refs = _read_summaries(args.hyp), _read_summaries(args.ref)
    if len(hyps) != len(refs):
        raise InputError(f"{len(hyps)} hypotheses but {len(refs)} references")
    if not refs:
        raise InputError("no summaries to score")
    by_id = dict(hyps)
    if len(by_id) == len(hyps) and set(by_id) == {i for i, _ in refs}:
        pairs = [(by_id[i], r) for i, r in refs]
    else:
        pairs = [(h, r) for (_, h), (_, r) in zip(hyps, refs)]
    metrics = {}
    for hyp, ref in pairs:
        scores = rouge_all(split_tokens(hyp), split_tokens(ref))
        scores["rougeLsum"] = rouge_lsum(
            [split_tokens(s) for s in segment_sentences(hyp)],
            [split_tokens(s) for s in segment_sentences(ref)],
        )
        for name, s in scores.items():
            metrics.setdefault(name, []).append((s.precision, s.recall, s.f1))
    lines = [_csv_line(["metric", "precision", "recall", "f1"])]
    for name, values in metrics.items():
        p, r, f = (100.0 * np.mean(col) for col in zip(*values))
        lines.append(_csv_line([name, f"{p:.4f}", f"{r:.4f}", f"{f:.4f}"]))
    return "".join(lines)


def _corpus_sentences(rec) -> list:
    return [s for text in rec.source_texts() for s in segment_sentences(text)]


def cmd_analyze_locality(args) -> str:
    docs = [_corpus_sentences(r) for r in load_corpus(args.corpus)]
    embedder = VectorFileEmbedder(args.embeddings) if args.embeddings else None
    curve = locality_curve(docs, embedder, args.max_distance)
    log.info(
        "corpus mean similarity %.6f over %d pairs (%d zero-vector pairs skipped)",
        curve.corpus_mean,
        curve.corpus_pairs,
        curve.skipped_zero_pairs,
    )
    return curve.to_csv()


def cmd_analyze_importance(args) -> str:
    cfg, params, vocab, paging = _load_model(args)
    records = load_corpus(args.corpus)
    if args.doc_id is not None:
        records = [r for r in records if r.id == args.doc_id]
        if not records:
            raise InputError(f"no document with id {args.doc_id!r}")
    doc = to_sentence_doc(records[0], vocab)
    summary = doc.summary_ids[: cfg.max_positions - 1]
    return importance_trace(params, cfg, paginate(doc, paging), summary).to_csv()


def cmd_analyze_fusion(args) -> str:
    pairs, lengths = [], 0
    for rec in load_corpus(args.corpus):
        doc = [split_tokens(s) for s in _corpus_sentences(rec)]
        summ = [split_tokens(s) for s in segment_sentences(rec.summary)]
        lengths += 1
        pairs.extend(find_fusion_pairs(doc, summ, args.t1, args.t2, args.rouge_variant, rec.id))
    if args.histogram:
        hist = distance_histogram(pairs, args.bins)
        lines = [_csv_line(["bin_low", "bin_high", "count"])]
        for k, count in enumerate(hist):
            lines.append(_csv_line([f"{k / args.bins:.4f}", f"{(k + 1) / args.bins:.4f}", int(count)]))
        return "".join(lines)
    log.info("%d fusion pairs in %d documents", len(pairs), lengths)
    return pairs_to_csv(pairs)


def cmd_analyze_coherence(args) -> str:
    if args.hyp:
        rows = _read_summaries(args.hyp)
    else:
        rows = [(r.id, r.summary) for r in load_corpus(args.corpus)]
    lines = [_csv_line(["id", "coherence"])]
    for doc_id, text in rows:
        sents = segment_sentences(text)
        if len(sents) < 2:
            log.warning("%s: fewer than two sentences, coherence undefined", doc_id)
            lines.append(_csv_line([doc_id, ""]))
            continue
        lines.append(_csv_line([doc_id, f"{semantic_coherence(sents):.6f}"]))
    return "".join(lines)


def _int_list(text: str) -> list:
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _mode_list(text: str) -> list:
    modes = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in modes if m not in ("paged", "full")]
    if bad or not modes:
        raise argparse.ArgumentTypeError(f"modes must be drawn from paged,full; got {text!r}")
    return modes


def cmd_bench_memory(args) -> str:
    cfg = counting_model(max(max(args.lengths), args.page_size), args.layers, args.heads)
    reports = memory_bench(args.lengths, args.page_size, cfg, args.mode, _seed(args))
    out = reports_to_csv(reports)
    broken = [r for r in reports if not r.within_bound]
    if broken:
        _emit(out, args.out)
        raise CheckFailed(f"{len(broken)} measurements exceed their attention bound")
    return out


def cmd_check_grads(args) -> str:
    report = model_gradcheck(
        seed=_seed(args),
        eps=args.eps,
        tolerance=args.tolerance,
        coords_per_param=args.coords,
        mode=args.mode,
    )
    lines = [_csv_line(["param", "max_rel_error"])]
    for name in sorted(report.per_param):
        lines.append(_csv_line([name, f"{report.per_param[name]:.3e}"]))
    lines.append(_csv_line(["ALL", f"{report.max_rel_error:.3e}"]))
    if not report.passed:
        _emit("".join(lines), args.out)
        worst = report.worst()
        raise CheckFailed(f"gradient check failed: {worst[0]} relative error {worst[1]:.3e} >= {args.tolerance}")
    return "".join(lines)


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common, paging = _common_options(), _paging_options()
    parser = _Parser(prog="pagesum", description="Page-wise long-input summarization toolkit.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("train", parents=[common, paging], help="train a model on a JSONL corpus")
    p.add_argument("--config", default=None, help="JSON training config")
    p.add_argument("--corpus", required=True)
    p.add_argument("--valid", default=None)
    p.add_argument("--checkpoint-dir", default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--mode", choices=MODES, default=None)
    p.add_argument("--min-freq", type=int, default=2, help="vocabulary frequency cutoff")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("summarize", parents=[common, paging], help="decode summaries as JSONL")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--vocab", default=None, help="vocabulary JSON (default: beside the checkpoint)")
    p.add_argument("--corpus", required=True)
    p.add_argument("--mode", choices=MODES, default="paged")
    p.add_argument("--strategy", choices=("greedy", "beam"), default="greedy")
    p.add_argument("--beam-size", type=int, default=4)
    p.add_argument("--max-len", type=int, default=64)
    p.add_argument("--length-penalty", type=float, default=1.0)
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("eval-rouge", parents=[common], help="ROUGE-1/2/L/Lsum on a 0-100 scale")
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True)
    p.set_defaults(func=cmd_eval_rouge)

    p = sub.add_parser("analyze", help="corpus and model analyses")
    asub = p.add_subparsers(dest="analysis", metavar="ANALYSIS", parser_class=_Parser)
    asub.required = True

    a = asub.add_parser("locality", parents=[common], help="similarity versus sentence distance")
    a.add_argument("--corpus", required=True)
    a.add_argument("--max-distance", type=int, default=None)
    a.add_argument("--embeddings", default=None, help="precomputed sentence vectors (JSON or JSONL)")
    a.set_defaults(func=cmd_analyze_locality)

    a = asub.add_parser("importance", parents=[common, paging], help="per-step page weights")
    a.add_argument("--checkpoint", required=True)
    a.add_argument("--vocab", default=None)
    a.add_argument("--corpus", required=True)
    a.add_argument("--doc-id", default=None)
    a.set_defaults(func=cmd_analyze_importance)

    a = asub.add_parser("fusion", parents=[common], help="summary sentences fused from two source sentences")
    a.add_argument("--corpus", required=True)
    a.add_argument("--t1", type=float, default=20.0)
    a.add_argument("--t2", type=float, default=10.0)
    a.add_argument("--rouge-variant", choices=VARIANTS, default="rouge1")
    a.add_argument("--histogram", action="store_true", help="emit the normalised-distance histogram")
    a.add_argument("--bins", type=int, default=10)
    a.set_defaults(func=cmd_analyze_fusion)

    a = asub.add_parser("coherence", parents=[common], help="mean next-sentence probability per summary")
    src = a.add_mutually_exclusive_group(required=True)
    src.add_argument("--corpus")
    src.add_argument("--hyp")
    a.set_defaults(func=cmd_analyze_coherence)

    p = sub.add_parser("bench", help="benchmarks")
    bsub = p.add_subparsers(dest="bench", metavar="BENCH", parser_class=_Parser)
    bsub.required = True
    b = bsub.add_parser("memory", parents=[common], help="encoder attention entries, paged vs full")
    b.add_argument("--lengths", type=_int_list, required=True)
    b.add_argument("--page-size", type=int, default=1024)
    b.add_argument("--mode", type=_mode_list, default=["paged", "full"])
    b.add_argument("--layers", type=int, default=1)
    b.add_argument("--heads", type=int, default=1)
    b.set_defaults(func=cmd_bench_memory)

    p = sub.add_parser("check", help="self-checks")
    csub = p.add_subparsers(dest="check", metavar="CHECK", parser_class=_Parser)
    csub.required = True
    c = csub.add_parser("grads", parents=[common], help="finite-difference gradient check")
    c.add_argument("--eps", type=float, default=1e-3)
    c.add_argument("--tolerance", type=float, default=1e-3)
    c.add_argument("--coords", type=int, default=6, help="coordinates sampled per parameter")
    c.add_argument("--mode", choices=MODES, default="paged")
    c.set_defaults(func=cmd_check_grads)
    return parser


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
        sys.stdout.flush()


def _error(code: int, message: str) -> int:
    sys.stderr.write(f"error: {' '.join(str(message).split())}\n")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        if args.threads is not None:
            if args.threads < 1:
                raise InputError("--threads must be >= 1")
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limits=args.threads):
                text = args.func(args)
        else:
            text = args.func(args)
        _emit(text, args.out)
    except CheckFailed as exc:
        return _error(EXIT_CHECK, exc)
    except NumericError as exc:
        return _error(EXIT_NUMERIC, exc)
    except (PageSumError, ValueError, KeyError, TypeError) as exc:
        return _error(EXIT_INPUT, exc)
    except OSError as exc:
        return _error(EXIT_INPUT, f"{exc.filename or ''}: {exc.strerror or exc}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
