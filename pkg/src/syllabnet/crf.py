"""Output heads over per-position emission scores.

Emissions are arrays of shape ``(n, 2)`` (one row per position, one column
per label) or ``(B, n, 2)`` for batches.  Only the first ``true_len``
positions of a sequence are scored.

CRF path score::

    score(y) = start[y_0] + sum_i emissions[i, y_i] + sum_{i>=1} transition[y_{i-1}, y_i]

There is no end-score term.  Ties in decoding always resolve to label 0.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

N_LABELS = 2
MAX_BRUTE_FORCE_LEN = 12


def logsumexp(a: np.ndarray, axis: int = -1) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    out = np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)) + m
    return np.squeeze(out, axis=axis)


@dataclass
class CrfParameters:
    transition: np.ndarray  # (2, 2): score of label a followed by label b
    start: np.ndarray  # (2,)

    @classmethod
    def zeros(cls) -> "CrfParameters":
        return cls(np.zeros((N_LABELS, N_LABELS)), np.zeros(N_LABELS))


@dataclass
class LabelPath:
    labels: np.ndarray
    score: float
    log_probability: float


def softmax_position(emission: np.ndarray) -> np.ndarray:
    e = np.asarray(emission, dtype=np.float64)
    z = np.exp(e - np.max(e, axis=-1, keepdims=True))
    return z / np.sum(z, axis=-1, keepdims=True)


def log_softmax(e: np.ndarray) -> np.ndarray:
    return e - logsumexp(e, axis=-1)[..., None]


def softmax_decode(emissions: np.ndarray, true_len: int) -> LabelPath:
    """Independent per-position argmax; score is the summed log max-probability."""
    if true_len < 1:
        raise ValueError("true_len must be >= 1")
    e = np.asarray(emissions[:true_len], dtype=np.float64)
    labels = (e[:, 1] > e[:, 0]).astype(np.int64)
    logp = log_softmax(e)
    lp = float(np.sum(logp[np.arange(true_len), labels]))
    return LabelPath(labels, lp, lp)


def softmax_nll_batch(emissions: np.ndarray, labels: np.ndarray, lengths: np.ndarray):
    """Per-word cross entropy summed over valid positions.

    Returns ``(losses[B], d_emissions)`` with ``d_emissions`` the gradient of
    ``sum(losses)``.
    """
    B, n, _ = emissions.shape
    mask = np.arange(n)[None, :] < np.asarray(lengths)[:, None]
    logp = log_softmax(emissions)
    gold = np.take_along_axis(logp, labels[..., None], axis=-1)[..., 0]
    losses = -np.sum(gold * mask, axis=1)
    d = np.exp(logp)
    d[..., 0] -= labels == 0
    d[..., 1] -= labels == 1
    d *= mask[..., None]
    return losses, d


def softmax_decode_batch(emissions: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    B, n, _ = emissions.shape
    mask = np.arange(n)[None, :] < np.asarray(lengths)[:, None]
    return ((emissions[..., 1] > emissions[..., 0]) & mask).astype(np.int64)


def path_score(emissions: np.ndarray, crf: CrfParameters, labels, true_len: int) -> float:
    y = np.asarray(labels[:true_len], dtype=np.int64)
    s = crf.start[y[0]] + np.sum(emissions[np.arange(true_len), y])
    if true_len > 1:
        s += np.sum(crf.transition[y[:-1], y[1:]])
    return float(s)


def crf_log_partition(emissions: np.ndarray, crf: CrfParameters, true_len: int) -> float:
    """log Z by the forward recursion in log space."""
    if true_len < 1:
        raise ValueError("true_len must be >= 1")
    alpha = crf.start + emissions[0]
    for i in range(1, true_len):
        alpha = logsumexp(alpha[:, None] + crf.transition, axis=0) + emissions[i]
    return float(logsumexp(alpha, axis=0))


def crf_nll(emissions: np.ndarray, crf: CrfParameters, labels, true_len: int) -> float:
    return crf_log_partition(emissions, crf, true_len) - path_score(emissions, crf, labels, true_len)


def viterbi_decode(emissions: np.ndarray, crf: CrfParameters, true_len: int) -> LabelPath:
    if true_len < 1:
        raise ValueError("true_len must be >= 1")
    delta = crf.start + emissions[0]
    backptr = np.zeros((true_len, N_LABELS), dtype=np.int64)
    for i in range(1, true_len):
        cand = delta[:, None] + crf.transition  # [prev, cur]
        backptr[i] = np.argmax(cand, axis=0)  # first max -> label 0 on ties
        delta = cand[backptr[i], np.arange(N_LABELS)] + emissions[i]
    labels = np.zeros(true_len, dtype=np.int64)
    labels[-1] = int(np.argmax(delta))
    for i in range(true_len - 1, 0, -1):
        labels[i - 1] = backptr[i, labels[i]]
    score = float(delta[labels[-1]])
    return LabelPath(labels, score, score - crf_log_partition(emissions, crf, true_len))


def viterbi_decode_batch(emissions: np.ndarray, lengths: np.ndarray, crf: CrfParameters) -> np.ndarray:
    """Vectorized Viterbi over a padded batch; padded positions come back as 0."""
    B, n, _ = emissions.shape
    lengths = np.asarray(lengths)
    delta = crf.start[None, :] + emissions[:, 0]
    backptr = np.zeros((B, n, N_LABELS), dtype=np.int64)
    rows = np.arange(B)
    for i in range(1, n):
        cand = delta[:, :, None] + crf.transition[None]
        bp = np.argmax(cand, axis=1)
        new = np.take_along_axis(cand, bp[:, None, :], axis=1)[:, 0] + emissions[:, i]
        active = (i < lengths)[:, None]
        delta = np.where(active, new, delta)
        backptr[:, i] = bp
    labels = np.zeros((B, n), dtype=np.int64)
    cur = np.argmax(delta, axis=1)
    labels[rows, lengths - 1] = cur
    for i in range(n - 1, 0, -1):
        active = i < lengths
        at_end = i == lengths - 1
        cur = np.where(at_end, labels[rows, i], cur)
        prev = backptr[rows, i, cur]
        cur = np.where(active, prev, cur)
        labels[:, i - 1] = np.where(active, prev, labels[:, i - 1])
    return labels


def crf_forward_backward(emissions: np.ndarray, lengths: np.ndarray, crf: CrfParameters):
    """Batched log-space alpha/beta tables and log Z, honoring true lengths."""
    B, n, _ = emissions.shape
    lengths = np.asarray(lengths)
    mask = np.arange(n)[None, :] < lengths[:, None]
    alpha = np.empty((B, n, N_LABELS), dtype=emissions.dtype)
    beta = np.zeros((B, n, N_LABELS), dtype=emissions.dtype)
    alpha[:, 0] = crf.start[None] + emissions[:, 0]
    T = crf.transition[None]
    for i in range(1, n):
        new = logsumexp(alpha[:, i - 1, :, None] + T, axis=1) + emissions[:, i]
        alpha[:, i] = np.where(mask[:, i, None], new, alpha[:, i - 1])
    for i in range(n - 2, -1, -1):
        nxt = emissions[:, i + 1] + beta[:, i + 1]
        new = logsumexp(T + nxt[:, None, :], axis=2)
        beta[:, i] = np.where(mask[:, i + 1, None], new, 0.0)
    log_z = logsumexp(alpha[:, -1], axis=1)
    return alpha, beta, log_z, mask


def crf_nll_batch(emissions: np.ndarray, labels: np.ndarray, lengths: np.ndarray, crf: CrfParameters):
    """Per-word negative log likelihood and gradients of their sum.

    Returns ``(losses[B], d_emissions[B,n,2], d_transition[2,2], d_start[2])``.
    """
    B, n, _ = emissions.shape
    lengths = np.asarray(lengths)
    alpha, beta, log_z, mask = crf_forward_backward(emissions, lengths, crf)
    rows = np.arange(B)

    y = np.where(mask, labels, 0)
    gold = crf.start[y[:, 0]] + np.sum(np.take_along_axis(emissions, y[..., None], 2)[..., 0] * mask, axis=1)
    pair_mask = mask[:, 1:]
    gold += np.sum(crf.transition[y[:, :-1], y[:, 1:]] * pair_mask, axis=1)
    losses = log_z - gold

    node = np.exp(alpha + beta - log_z[:, None, None]) * mask[..., None]
    d_em = node.copy()
    d_em[rows[:, None], np.arange(n)[None, :], y] -= mask

    d_start = np.sum(node[:, 0], axis=0)
    np.subtract.at(d_start, y[:, 0], 1.0)

    # pair marginals p(y_{i-1}=a, y_i=b) for valid i >= 1
    if n > 1:
        pair = (alpha[:, :-1, :, None] + crf.transition[None, None]
                + (emissions[:, 1:] + beta[:, 1:])[:, :, None, :] - log_z[:, None, None, None])
        pair = np.exp(pair) * pair_mask[..., None, None]
        d_trans = np.sum(pair, axis=(0, 1))
        counts = np.zeros((N_LABELS, N_LABELS))
        np.add.at(counts, (y[:, :-1][pair_mask], y[:, 1:][pair_mask]), 1.0)
        d_trans -= counts
    else:
        d_trans = np.zeros((N_LABELS, N_LABELS))
    return losses, d_em, d_trans, d_start


@dataclass
class BruteForceResult:
    paths: np.ndarray  # (2**L, L)
    scores: np.ndarray  # (2**L,)
    log_z: float
    best: np.ndarray
    best_score: float

    @property
    def probabilities(self) -> np.ndarray:
        return np.exp(self.scores - self.log_z)


def brute_force_paths(emissions: np.ndarray, crf: CrfParameters, true_len: int) -> BruteForceResult:
    """Score all 2**true_len label paths explicitly (test oracle).

    The argmax among equally scored paths is the one that prefers label 0 at
    the last position, then the one before, and so on.
    """
    if true_len > MAX_BRUTE_FORCE_LEN:
        raise ValueError(f"refusing to enumerate 2**{true_len} paths (limit {MAX_BRUTE_FORCE_LEN})")
    if true_len < 1:
        raise ValueError("true_len must be >= 1")
    paths = np.array(list(itertools.product((0, 1), repeat=true_len)), dtype=np.int64)
    scores = np.array([path_score(emissions, crf, p, true_len) for p in paths])
    m = scores.max()
    log_z = float(m + np.log(np.sum(np.exp(scores - m))))
    winners = [tuple(p[::-1]) for p, s in zip(paths, scores) if s == m]
    best = np.array(min(winners)[::-1], dtype=np.int64)
    return BruteForceResult(paths, scores, log_z, best, float(m))
