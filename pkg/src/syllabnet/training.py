"""Mini-batch training with Adam, global-norm clipping and early stopping;
word-level evaluation; and the repeated-run experiment harness.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import ModelConfig
from .crf import softmax_decode_batch, viterbi_decode_batch
from .engine import AdamState, Rng, adam_step, clip_global_norm, make_rng
from .lexicon import DatasetSplit, PhoneVocabulary, SyllabifiedEntry, build_vocabulary
from .network import Batch, Params, crf_of, encode_batch, init_parameters, loss_and_grads, word_losses
from .synthetic import generate_synthetic_language  # noqa: F401  (re-exported)

log = logging.getLogger(__name__)

EVAL_CHUNK = 512


class TrainingDiverged(FloatingPointError):
    pass


def make_batches(entries: Sequence, batch_size: int, rng: Rng) -> list[list]:
    """Shuffle with ``rng`` and chunk; the last batch may be short."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    order = rng.permutation(len(entries))
    return [[entries[i] for i in order[s : s + batch_size]] for s in range(0, len(entries), batch_size)]


def to_batch(entries: Sequence[SyllabifiedEntry], vocab: PhoneVocabulary) -> Batch:
    """Pad to the longest entry in the batch (padding never affects the result)."""
    lengths = np.array([len(e.phones) for e in entries], dtype=np.int64)
    n = int(lengths.max())
    idx = np.full((len(entries), n), vocab.pad_index, dtype=np.int64)
    labels = np.zeros((len(entries), n), dtype=np.int64)
    for b, e in enumerate(entries):
        idx[b, : lengths[b]] = [vocab.lookup(p) for p in e.phones]
        labels[b, : lengths[b]] = e.boundaries
    return Batch(idx, labels, lengths)


def phones_to_batch(words: Sequence[Sequence[str]], vocab: PhoneVocabulary) -> Batch:
    entries = [SyllabifiedEntry("", tuple(w), (0,) * len(w)) for w in words]
    return to_batch(entries, vocab)


def decode(params: Params, config: ModelConfig, batch: Batch) -> np.ndarray:
    em, _ = encode_batch(batch.indices, batch.lengths, params, config, "eval")
    if config.output_head == "crf":
        return viterbi_decode_batch(em, batch.lengths, crf_of(params))
    return softmax_decode_batch(em, batch.lengths)


def predict_labels(params: Params, config: ModelConfig, vocab: PhoneVocabulary, words) -> list[np.ndarray]:
    out = []
    for s in range(0, len(words), EVAL_CHUNK):
        chunk = words[s : s + EVAL_CHUNK]
        batch = phones_to_batch(chunk, vocab)
        labels = decode(params, config, batch)
        out.extend(labels[b, : batch.lengths[b]] for b in range(len(chunk)))
    return out


def evaluate_word_accuracy(
    params: Params, config: ModelConfig, entries: Sequence[SyllabifiedEntry], vocab: PhoneVocabulary
) -> float:
    """Fraction of words whose whole label sequence is predicted correctly."""
    if not entries:
        raise ValueError("cannot evaluate on an empty entry list")
    correct = 0
    for s in range(0, len(entries), EVAL_CHUNK):
        batch = to_batch(entries[s : s + EVAL_CHUNK], vocab)
        pred = decode(params, config, batch)
        correct += int(np.sum(np.all(pred == batch.labels, axis=1)))
    return correct / len(entries)


def mean_loss(params: Params, config: ModelConfig, entries, vocab: PhoneVocabulary) -> float:
    total = 0.0
    for s in range(0, len(entries), EVAL_CHUNK):
        total += float(np.sum(word_losses(params, config, to_batch(entries[s : s + EVAL_CHUNK], vocab))))
    return total / len(entries)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    dev_word_accuracy: float
    dev_loss: float | None = None
    seconds: float = 0.0


@dataclass
class TrainingRun:
    epoch_history: list[EpochRecord]
    best_epoch: int
    stopped_early: bool
    final_params: Params
    seed: int
    vocab: PhoneVocabulary
    config: ModelConfig
    dev_accuracy: float
    test_accuracy: float | None = None


def _improved(config: ModelConfig, rec: EpochRecord, best: float | None) -> bool:
    if best is None:
        return True
    if config.stop_metric == "dev_loss":
        return rec.dev_loss < best
    return rec.dev_word_accuracy > best


def train(
    config: ModelConfig,
    split: DatasetSplit,
    seed: int,
    vocab: PhoneVocabulary | None = None,
    log_path: str | Path | None = None,
    verbose: bool = False,
) -> TrainingRun:
    """Train one model; parameters from the best dev epoch are returned.

    Random streams: 0 initializes weights, 1 shuffles batches, 2 draws
    dropout masks.
    """
    if not split.train or not split.dev:
        raise ValueError("training needs non-empty train and dev sets")
    if vocab is None:
        vocab = build_vocabulary(split.train)
    params = init_parameters(config, len(vocab), make_rng(seed, 0))
    shuffle_rng = make_rng(seed, 1)
    dropout_rng = make_rng(seed, 2)
    hyper = dict(learning_rate=config.learning_rate)
    states = {k: AdamState.like(v, **hyper) for k, v in params.items()}

    history: list[EpochRecord] = []
    best_metric = None
    best_params = {k: v.copy() for k, v in params.items()}
    best_epoch = 0
    since_best = 0
    stopped_early = False
    log_fh = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        for epoch in range(1, config.max_epochs + 1):
            t0 = time.perf_counter()
            batch_losses = []
            for b_idx, entries in enumerate(make_batches(split.train, config.batch_size, shuffle_rng)):
                batch = to_batch(entries, vocab)
                loss, grads = loss_and_grads(params, config, batch, "train", dropout_rng)
                if not math.isfinite(loss):
                    raise TrainingDiverged(f"non-finite loss at epoch {epoch}, batch {b_idx}")
                names = list(grads)
                clipped = clip_global_norm([grads[k] for k in names], config.clip_threshold)
                for k, g in zip(names, clipped):
                    params[k], states[k] = adam_step(params[k], g, states[k])
                batch_losses.append(loss)

            rec = EpochRecord(
                epoch=epoch,
                train_loss=float(np.mean(batch_losses)),
                dev_word_accuracy=evaluate_word_accuracy(params, config, split.dev, vocab),
            )
            if config.stop_metric == "dev_loss":
                rec.dev_loss = mean_loss(params, config, split.dev, vocab)
            rec.seconds = time.perf_counter() - t0
            history.append(rec)
            line = (f"epoch {epoch:3d}  loss {rec.train_loss:.5f}  "
                    f"dev_acc {rec.dev_word_accuracy:.4f}  ({rec.seconds:.1f}s)")
            log.info(line)
            if verbose:
                print(line, flush=True)
            if log_fh:
                log_fh.write(json.dumps(vars(rec)) + "\n")
                log_fh.flush()

            if _improved(config, rec, best_metric):
                best_metric = rec.dev_loss if config.stop_metric == "dev_loss" else rec.dev_word_accuracy
                best_params = {k: v.copy() for k, v in params.items()}
                best_epoch = epoch
                since_best = 0
            else:
                since_best += 1
                if since_best >= config.patience:
                    stopped_early = epoch < config.max_epochs
                    break
    finally:
        if log_fh:
            log_fh.close()

    dev_acc = evaluate_word_accuracy(best_params, config, split.dev, vocab)
    test_acc = evaluate_word_accuracy(best_params, config, split.test, vocab) if split.test else None
    return TrainingRun(history, best_epoch, stopped_early, best_params, seed, vocab, config, dev_acc, test_acc)


def format_accuracy(mean: float, std: float) -> str:
    """Percentages with precision set by the first significant digit of std,
    e.g. ``98.5 ± 0.1`` or ``99.47 ± 0.04``.
    """
    m, s = 100.0 * mean, 100.0 * std
    if s > 0:
        decimals = max(1, -int(math.floor(math.log10(s))))
        s = round(s, decimals)
        if s > 0:  # rounding may bump e.g. 0.096 -> 0.1
            decimals = max(1, -int(math.floor(math.log10(s))))
    else:
        decimals = 2
    return f"{m:.{decimals}f} ± {s:.{decimals}f}"


@dataclass
class ExperimentReport:
    repetitions: int
    per_run_test_accuracy: list[float]
    seeds: list[int] = field(default_factory=list)

    @property
    def mean(self) -> float:
        return float(np.mean(self.per_run_test_accuracy))

    @property
    def std_dev(self) -> float:
        """Sample standard deviation (ddof=1); 0 for a single run."""
        if self.repetitions < 2:
            return 0.0
        return float(np.std(self.per_run_test_accuracy, ddof=1))

    def formatted(self) -> str:
        return format_accuracy(self.mean, self.std_dev)


def _run_one(args):
    config, split, seed = args
    return train(config, split, seed).test_accuracy


def run_experiment(
    config: ModelConfig, split: DatasetSplit, repetitions: int, base_seed: int, workers: int = 1
) -> ExperimentReport:
    """Train ``repetitions`` models on one split with seeds base_seed, base_seed+1, ...

    Runs are independent, so ``workers > 1`` farms them out to processes
    without changing the result.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    if not split.test:
        raise ValueError("experiment needs a test set")
    seeds = [base_seed + r for r in range(repetitions)]
    jobs = [(config, split, s) for s in seeds]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            accs = list(pool.map(_run_one, jobs))
    else:
        accs = [_run_one(j) for j in jobs]
    return ExperimentReport(repetitions, accs, seeds)
