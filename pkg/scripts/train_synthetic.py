#!/usr/bin/env python3
"""Train one model on a generated synthetic language and report test accuracy.

    python3 scripts/train_synthetic.py --words 5000 --preset small --seed 1
"""

import argparse
import logging
import time

from syllabnet import generate_synthetic_language, preset, train
from syllabnet.lexicon import clean_duplicates, split_dataset


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--words", type=int, default=5000)
    ap.add_argument("--language-seed", type=int, default=2024)
    ap.add_argument("--preset", default="small")
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--max-epochs", type=int)
    ap.add_argument("--history", help="optional history.jsonl path")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    entries = clean_duplicates(generate_synthetic_language(args.words, args.language_seed))
    split = split_dataset(entries, seed=args.language_seed)
    config = preset(args.preset)
    if args.max_epochs:
        config = config.replace(max_epochs=args.max_epochs)
    print(f"train/dev/test = {split.sizes}, preset {args.preset}")

    t0 = time.perf_counter()
    run = train(config, split, seed=args.seed, log_path=args.history)
    print(f"best epoch {run.best_epoch} of {len(run.epoch_history)}"
          f"{' (early stop)' if run.stopped_early else ''}, {time.perf_counter() - t0:.0f}s")
    print(f"dev word accuracy  {run.dev_accuracy:.4f}")
    print(f"test word accuracy {run.test_accuracy:.4f}")


if __name__ == "__main__":
    main()
