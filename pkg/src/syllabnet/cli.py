"""Command-line interface.

    syllabnet prepare   --lexicon LEX.tsv --out SPLIT_DIR [--seed N]
    syllabnet train     --split SPLIT_DIR --preset small --out model.ckpt
    syllabnet evaluate  --checkpoint model.ckpt [--checkpoint ...] --data test.tsv
    syllabnet syllabify --checkpoint model.ckpt [WORDS_FILE]
    syllabnet synth     --words 5000 --seed 7 --out synthetic.tsv

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt_io
from .config import ModelConfig, preset
from .lexicon import (
    LexiconError,
    LexiconFormat,
    Tokenization,
    clean_duplicates,
    decode_boundaries,
    has_trailing_boundary,
    max_length,
    read_lexicon,
    read_split,
    split_dataset,
    write_lexicon,
    write_split,
)
from .synthetic import generate_synthetic_language
from .training import (
    TrainingDiverged,
    evaluate_word_accuracy,
    format_accuracy,
    predict_labels,
    train,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _warn(msg: str):
    print(f"warning: {msg}", file=sys.stderr)


def _format_from_args(args) -> LexiconFormat:
    return LexiconFormat(Tokenization(args.tokenization), args.delimiter)


def cmd_prepare(args) -> int:
    fmt = _format_from_args(args)
    entries = read_lexicon(args.lexicon, fmt)
    cleaned = clean_duplicates(entries)
    split = split_dataset(cleaned, args.seed)
    write_split(split, args.out, fmt, n_input=len(entries), n_removed=len(entries) - len(cleaned))
    tr, dv, te = split.sizes
    print(f"read {len(entries)} entries, removed {len(entries) - len(cleaned)} duplicated-word entries")
    print(f"train {tr}  dev {dv}  test {te}  -> {args.out}")
    return EXIT_OK


_OVERRIDES = {
    "embedding_dim": int, "lstm_dim": int, "conv_blocks": int, "conv_filters": int,
    "conv_width": int, "pool_size": int, "dropout_rate": float, "output_head": str,
    "batch_size": int, "max_epochs": int, "patience": int, "clip_threshold": float,
    "learning_rate": float, "dtype": str,
}


def config_from_args(args) -> ModelConfig:
    base = preset(args.preset)
    changes = {k: getattr(args, k) for k in _OVERRIDES if getattr(args, k, None) is not None}
    try:
        return base.replace(**changes)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_train(args) -> int:
    config = config_from_args(args)
    split, fmt = read_split(args.split)
    out = Path(args.out)
    log_path = args.history or out.with_suffix(".history.jsonl")
    run = train(config, split, args.seed, log_path=log_path, verbose=not args.quiet)
    meta = {
        "best_epoch": run.best_epoch,
        "epochs_run": len(run.epoch_history),
        "stopped_early": run.stopped_early,
        "dev_word_accuracy": repr(run.dev_accuracy),
        "test_word_accuracy": repr(run.test_accuracy),
        "max_len": max_length(split.all_entries()),
        "preset": args.preset,
    }
    ckpt = ckpt_io.Checkpoint(config, run.vocab, fmt, run.final_params, args.seed, meta)
    ckpt_io.save_checkpoint(ckpt, out)
    print(f"dev word accuracy {run.dev_accuracy:.4f}")
    if run.test_accuracy is not None:
        print(f"test word accuracy {run.test_accuracy:.4f}")
    print(f"saved {out} (best epoch {run.best_epoch})")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    accs = []
    for path in args.checkpoint:
        ck = ckpt_io.load_checkpoint(path)
        entries = read_lexicon(args.data, ck.lexicon_format)
        if not entries:
            raise LexiconError(f"{args.data} contains no entries")
        oov = sum(1 for e in entries for p in e.phones if p not in ck.vocabulary)
        acc = evaluate_word_accuracy(ck.parameters, ck.config, entries, ck.vocabulary)
        accs.append(acc)
        print(f"{path}\tword_accuracy={acc:.6f}\twords={len(entries)}\toov_phones={oov}")
    if len(accs) > 1:
        print(f"mean ± sd over {len(accs)} checkpoints: {format_accuracy(float(np.mean(accs)), float(np.std(accs, ddof=1)))}")
    return EXIT_OK


def cmd_syllabify(args) -> int:
    ck = ckpt_io.load_checkpoint(args.checkpoint)
    fmt = ck.lexicon_format
    stream = open(args.input, encoding="utf-8") if args.input else sys.stdin
    try:
        words = []
        for lineno, line in enumerate(stream, start=1):
            phones = fmt.split_phones(line.rstrip("\r\n"))
            if not phones:
                _warn(f"line {lineno}: empty line skipped")
                continue
            unknown = sorted({p for p in phones if p not in ck.vocabulary})
            if unknown:
                _warn(f"line {lineno}: unknown phones {' '.join(unknown)} treated as UNK")
            words.append(phones)
    finally:
        if args.input:
            stream.close()
    for phones, labels in zip(words, predict_labels(ck.parameters, ck.config, ck.vocabulary, words)):
        if has_trailing_boundary(labels):
            _warn(f"{fmt.join_phones(phones)}: boundary predicted after final phone (dropped)")
        print(decode_boundaries(phones, labels, fmt))
    return EXIT_OK


def cmd_synth(args) -> int:
    entries = generate_synthetic_language(args.words, args.seed)
    write_lexicon(entries, args.out)
    print(f"wrote {len(entries)} words to {args.out}")
    return EXIT_OK


def _add_format_flags(p):
    p.add_argument("--tokenization", choices=[t.value for t in Tokenization], default="char",
                   help="one phone per character (DISC) or space-separated phone tokens")
    p.add_argument("--delimiter", default="-", help="syllable delimiter character")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="syllabnet", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("prepare", help="clean a lexicon and write 80/10/10 splits")
    p.add_argument("--lexicon", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    _add_format_flags(p)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train a model on a prepared split")
    p.add_argument("--split", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--preset", default="base", choices=["base", "small", "base-softmax"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--history", help="history.jsonl path (default: next to the checkpoint)")
    p.add_argument("--quiet", action="store_true")
    for name, typ in _OVERRIDES.items():
        flag = "--" + name.replace("_", "-")
        if name == "output_head":
            p.add_argument(flag, choices=["crf", "softmax"])
        elif name == "dtype":
            p.add_argument(flag, choices=["float64", "float32"])
        else:
            p.add_argument(flag, type=typ)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="word accuracy of checkpoint(s) on a lexicon file")
    p.add_argument("--checkpoint", required=True, action="append")
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("syllabify", help="syllabify unsegmented phone strings, one per line")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("input", nargs="?", help="input file (default: stdin)")
    p.set_defaults(func=cmd_syllabify)

    p = sub.add_parser("synth", help="write a synthetic V/CV/VC/CVC lexicon")
    p.add_argument("--words", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TrainingDiverged, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (LexiconError, ckpt_io.CheckpointError, OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
