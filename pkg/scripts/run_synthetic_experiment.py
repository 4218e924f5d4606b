#!/usr/bin/env python3
"""Repeat training with different seeds and print a mean ± sd accuracy row.

Each repetition reuses the same split and differs only in its training seed
(weight init, batch order, dropout).

    python3 scripts/run_synthetic_experiment.py --words 2000 --repetitions 5
"""

import argparse
import time

from syllabnet import generate_synthetic_language, preset, run_experiment
from syllabnet.lexicon import clean_duplicates, split_dataset


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--words", type=int, default=2000)
    ap.add_argument("--language-seed", type=int, default=7)
    ap.add_argument("--preset", default="small")
    ap.add_argument("--output-head", choices=["crf", "softmax"])
    ap.add_argument("--repetitions", type=int, default=5)
    ap.add_argument("--base-seed", type=int, default=0)
    ap.add_argument("--max-epochs", type=int)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    entries = clean_duplicates(generate_synthetic_language(args.words, args.language_seed))
    split = split_dataset(entries, seed=args.language_seed)
    config = preset(args.preset)
    if args.output_head:
        config = config.replace(output_head=args.output_head)
    if args.max_epochs:
        config = config.replace(max_epochs=args.max_epochs)

    t0 = time.perf_counter()
    report = run_experiment(config, split, args.repetitions, args.base_seed, workers=args.workers)
    for seed, acc in zip(report.seeds, report.per_run_test_accuracy):
        print(f"seed {seed:4d}  test word accuracy {acc:.4f}")
    print(f"{args.preset} ({config.output_head}), {args.repetitions} runs, "
          f"{time.perf_counter() - t0:.0f}s: {report.formatted()}")


if __name__ == "__main__":
    main()
