"""BiLSTM + CNN encoder producing two emission scores per phone.

Arrays are position-major: a single example is ``(n, features)``, a batch is
``(B, n, features)``.  Positions at or beyond a word's true length are
padding; they never influence valid positions (both LSTM directions are run
over the true length only and the convolutions look left only), and the
loss ignores them.

Parameters live in an ordered ``dict[str, ndarray]``:

====================  ======================  ================================
name                  shape                   notes
====================  ======================  ================================
embeddings            (V, d)                  row 0 is PAD, row 1 is UNK
lstm_{fwd,bwd}_W      (4l, d)                 gate blocks ordered i, f, g, o
lstm_{fwd,bwd}_U      (4l, l)
lstm_{fwd,bwd}_b      (4l,)                   forget block starts at forget_bias
conv{k}_W             (f, C_k, w)             C_1 = d, C_k = f for k > 1
conv{k}_b             (f,)
proj_W                (2l + f, 2)
proj_b                (2,)
crf_transition        (2, 2)                  CRF head only
crf_start             (2,)                    CRF head only
====================  ======================  ================================
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .config import ModelConfig
from .crf import CrfParameters, crf_nll_batch, softmax_nll_batch
from .engine import Rng, dropout_mask, glorot_uniform_init

Mode = Literal["train", "eval"]
Params = dict[str, np.ndarray]


def parameter_shapes(config: ModelConfig, vocab_size: int) -> dict[str, tuple[int, ...]]:
    """Ordered name -> shape map; this order is also the checkpoint order."""
    d, l, f, w = config.embedding_dim, config.lstm_dim, config.conv_filters, config.conv_width
    shapes: dict[str, tuple[int, ...]] = {"embeddings": (vocab_size, d)}
    for side in ("fwd", "bwd"):
        shapes[f"lstm_{side}_W"] = (4 * l, d)
        shapes[f"lstm_{side}_U"] = (4 * l, l)
        shapes[f"lstm_{side}_b"] = (4 * l,)
    channels = d
    for k in range(1, config.conv_blocks + 1):
        shapes[f"conv{k}_W"] = (f, channels, w)
        shapes[f"conv{k}_b"] = (f,)
        channels = f
    shapes["proj_W"] = (config.concat_dim, 2)
    shapes["proj_b"] = (2,)
    if config.output_head == "crf":
        shapes["crf_transition"] = (2, 2)
        shapes["crf_start"] = (2,)
    return shapes


def count_parameters(config: ModelConfig, vocab_size: int) -> int:
    return sum(int(np.prod(s)) for s in parameter_shapes(config, vocab_size).values())


def init_parameters(config: ModelConfig, vocab_size: int, rng: Rng) -> Params:
    """Glorot-uniform weights, zero biases, forget-gate bias at ``config.forget_bias``."""
    l = config.lstm_dim
    params: Params = {}
    for name, shape in parameter_shapes(config, vocab_size).items():
        if name.endswith("_b") or name.startswith("crf_"):
            p = np.zeros(shape)
            if name.startswith("lstm_"):
                p[l : 2 * l] = config.forget_bias
        elif name.startswith("conv"):
            f_out, c_in, w = shape
            p = glorot_uniform_init(c_in * w, f_out * w, rng, shape)
        elif name == "proj_W":
            p = glorot_uniform_init(shape[0], shape[1], rng, shape)
        else:
            # embeddings (V, d) and LSTM matrices (4l, in): fan_in is the last axis
            p = glorot_uniform_init(shape[1], shape[0], rng, shape)
        params[name] = p.astype(config.dtype)
    return params


def crf_of(params: Params) -> CrfParameters:
    return CrfParameters(params["crf_transition"], params["crf_start"])


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


# ---------------------------------------------------------------- LSTM


def lstm_cell(x, h_prev, c_prev, W, U, b):
    """One LSTM step for a single example or a batch (leading axis)."""
    l = U.shape[1]
    a = x @ W.T + h_prev @ U.T + b
    i = _sigmoid(a[..., :l])
    f = _sigmoid(a[..., l : 2 * l])
    g = np.tanh(a[..., 2 * l : 3 * l])
    o = _sigmoid(a[..., 3 * l :])
    c = f * c_prev + i * g
    return o * np.tanh(c), c


def _lstm_forward(x, mask, W, U, b):
    B, n, _ = x.shape
    l = U.shape[1]
    xw = x @ W.T + b
    h = np.zeros((B, l), dtype=x.dtype)
    c = np.zeros((B, l), dtype=x.dtype)
    gates = np.empty((B, n, 4 * l), dtype=x.dtype)  # activated i, f, g, o
    h_prev = np.empty((B, n, l), dtype=x.dtype)
    c_prev = np.empty((B, n, l), dtype=x.dtype)
    tanh_c = np.empty((B, n, l), dtype=x.dtype)
    hs = np.empty((B, n, l), dtype=x.dtype)
    UT = U.T
    for t in range(n):
        h_prev[:, t] = h
        c_prev[:, t] = c
        a = xw[:, t] + h @ UT
        gt = gates[:, t]
        gt[:, : 2 * l] = _sigmoid(a[:, : 2 * l])
        gt[:, 2 * l : 3 * l] = np.tanh(a[:, 2 * l : 3 * l])
        gt[:, 3 * l :] = _sigmoid(a[:, 3 * l :])
        c = gt[:, l : 2 * l] * c + gt[:, :l] * gt[:, 2 * l : 3 * l]
        tanh_c[:, t] = np.tanh(c)
        h = gt[:, 3 * l :] * tanh_c[:, t]
        hs[:, t] = h
    out = hs * mask[..., None]
    cache = (x, mask, W, U, gates, h_prev, c_prev, tanh_c)
    return out, cache


def _lstm_backward(d_out, cache):
    x, mask, W, U, gates, h_prev, c_prev, tanh_c = cache
    B, n, l = h_prev.shape
    d_out = d_out * mask[..., None]
    dA = np.empty((B, n, 4 * l), dtype=x.dtype)
    dh_next = np.zeros((B, l), dtype=x.dtype)
    dc_next = np.zeros((B, l), dtype=x.dtype)
    for t in range(n - 1, -1, -1):
        gt = gates[:, t]
        i, f, g, o = gt[:, :l], gt[:, l : 2 * l], gt[:, 2 * l : 3 * l], gt[:, 3 * l :]
        tc = tanh_c[:, t]
        dh = d_out[:, t] + dh_next
        dc = dh * o * (1.0 - tc * tc) + dc_next
        da = dA[:, t]
        da[:, :l] = dc * g * i * (1.0 - i)
        da[:, l : 2 * l] = dc * c_prev[:, t] * f * (1.0 - f)
        da[:, 2 * l : 3 * l] = dc * i * (1.0 - g * g)
        da[:, 3 * l :] = dh * tc * o * (1.0 - o)
        dc_next = dc * f
        dh_next = da @ U
    flat = dA.reshape(B * n, 4 * l)
    dW = flat.T @ x.reshape(B * n, -1)
    dU = flat.T @ h_prev.reshape(B * n, l)
    db = flat.sum(axis=0)
    dx = dA @ W
    return dx, dW, dU, db


def _reverse_index(lengths, n):
    """Per-row permutation reversing the first ``length`` positions (an involution)."""
    t = np.arange(n)[None, :]
    L = np.asarray(lengths)[:, None]
    return np.where(t < L, L - 1 - t, t)


def bilstm_batch(x, lengths, params: Params):
    B, n, _ = x.shape
    mask = (np.arange(n)[None, :] < np.asarray(lengths)[:, None]).astype(x.dtype)
    rows = np.arange(B)[:, None]
    rev = _reverse_index(lengths, n)
    hf, cf = _lstm_forward(x, mask, params["lstm_fwd_W"], params["lstm_fwd_U"], params["lstm_fwd_b"])
    hb_rev, cb = _lstm_forward(x[rows, rev], mask, params["lstm_bwd_W"], params["lstm_bwd_U"], params["lstm_bwd_b"])
    h = np.concatenate([hf, hb_rev[rows, rev]], axis=-1)
    return h, (cf, cb, rev)


def bilstm_batch_backward(dh, cache):
    cf, cb, rev = cache
    l = dh.shape[-1] // 2
    rows = np.arange(dh.shape[0])[:, None]
    dxf, dWf, dUf, dbf = _lstm_backward(dh[..., :l], cf)
    dxb_rev, dWb, dUb, dbb = _lstm_backward(dh[..., l:][rows, rev], cb)
    grads = {
        "lstm_fwd_W": dWf, "lstm_fwd_U": dUf, "lstm_fwd_b": dbf,
        "lstm_bwd_W": dWb, "lstm_bwd_U": dUb, "lstm_bwd_b": dbb,
    }
    return dxf + dxb_rev[rows, rev], grads


def bilstm(x, true_len, weights_fwd, weights_bwd):
    """Single example: ``x`` is (n, d); returns (n, 2l), zero beyond ``true_len``.

    ``weights_*`` are ``(W, U, b)`` triples.
    """
    p = {}
    for side, (W, U, b) in (("fwd", weights_fwd), ("bwd", weights_bwd)):
        p[f"lstm_{side}_W"], p[f"lstm_{side}_U"], p[f"lstm_{side}_b"] = W, U, b
    h, _ = bilstm_batch(np.asarray(x)[None], np.array([true_len]), p)
    return h[0]


# ---------------------------------------------------------------- CNN


def _conv_forward(z, W, bias, pool_size):
    B, n, C = z.shape
    f, _, w = W.shape
    zpad = np.concatenate([np.zeros((B, w - 1, C), dtype=z.dtype), z], axis=1)
    cols = sliding_window_view(zpad, w, axis=1).reshape(B * n, C * w)  # (c, tap) order
    Wm = W.reshape(f, C * w)
    pre = (cols @ Wm.T + bias).reshape(B, n, f)
    r = np.maximum(pre, 0.0)
    stacked = np.full((pool_size, B, n, f), -np.inf, dtype=z.dtype)
    for k in range(min(pool_size, n)):
        stacked[k, :, k:] = r[:, : n - k]
    arg = np.argmax(stacked, axis=0)  # ties go to the current position
    out = np.take_along_axis(stacked, arg[None], axis=0)[0]
    return out, (cols, Wm, pre, arg, pool_size, z.shape, W.shape)


def _conv_backward(d_out, cache):
    cols, Wm, pre, arg, pool_size, (B, n, C), (f, _, w) = cache
    dr = np.zeros_like(d_out)
    for k in range(min(pool_size, n)):
        dr[:, : n - k] += (d_out * (arg == k))[:, k:]
    dpre = (dr * (pre > 0)).reshape(B * n, f)
    dW = (dpre.T @ cols).reshape(f, C, w)
    db = dpre.sum(axis=0)
    dcols = (dpre @ Wm).reshape(B, n, C, w)
    dzpad = np.zeros((B, n + w - 1, C), dtype=d_out.dtype)
    for j in range(w):
        dzpad[:, j : j + n] += dcols[..., j]
    return dzpad[:, w - 1 :], dW, db


def conv_block(x, W, bias, pool_size):
    """Single example: left-padded width-w convolution, ReLU, causal max-pool.

    ``x`` is (n, C); returns (n, f).
    """
    out, _ = _conv_forward(np.asarray(x)[None], W, bias, pool_size)
    return out[0]


# ---------------------------------------------------------------- full encoder


def embed(indices, params: Params):
    E = params["embeddings"]
    idx = np.asarray(indices)
    if idx.size and (idx.min() < 0 or idx.max() >= E.shape[0]):
        raise IndexError(f"phone index out of range for vocabulary of size {E.shape[0]}")
    return E[idx]


@dataclass
class Batch:
    indices: np.ndarray  # (B, n) int
    labels: np.ndarray  # (B, n) int
    lengths: np.ndarray  # (B,) int

    def __len__(self):
        return len(self.lengths)


def encode_batch(indices, lengths, params: Params, config: ModelConfig, mode: Mode = "eval", rng: Rng | None = None):
    """Emissions (B, n, 2) and the cache needed for :func:`backward`."""
    x = embed(indices, params)
    if mode == "train" and config.dropout_rate > 0:
        if rng is None:
            raise ValueError("train mode needs an rng for dropout")
        drop = dropout_mask(x.shape, config.dropout_rate, rng, dtype=x.dtype)
        x_lstm = x * drop
    else:
        drop = None
        x_lstm = x
    h, lstm_cache = bilstm_batch(x_lstm, lengths, params)
    z = x
    conv_caches = []
    for k in range(1, config.conv_blocks + 1):
        z, cc = _conv_forward(z, params[f"conv{k}_W"], params[f"conv{k}_b"], config.pool_size)
        conv_caches.append(cc)
    o = np.concatenate([h, z], axis=-1)
    emissions = o @ params["proj_W"] + params["proj_b"]
    cache = (np.asarray(indices), drop, lstm_cache, conv_caches, o)
    return emissions, cache


def backward(d_emissions, cache, params: Params, config: ModelConfig) -> Params:
    indices, drop, lstm_cache, conv_caches, o = cache
    grads: Params = {}
    D = o.shape[-1]
    grads["proj_W"] = o.reshape(-1, D).T @ d_emissions.reshape(-1, 2)
    grads["proj_b"] = d_emissions.sum(axis=(0, 1))
    do = d_emissions @ params["proj_W"].T
    two_l = 2 * config.lstm_dim
    dh, dz = do[..., :two_l], do[..., two_l:]
    for k in range(config.conv_blocks, 0, -1):
        dz, grads[f"conv{k}_W"], grads[f"conv{k}_b"] = _conv_backward(dz, conv_caches[k - 1])
    dx_lstm, lstm_grads = bilstm_batch_backward(dh, lstm_cache)
    grads.update(lstm_grads)
    dx = dz + (dx_lstm * drop if drop is not None else dx_lstm)
    dE = np.zeros_like(params["embeddings"])
    np.add.at(dE, indices.reshape(-1), dx.reshape(-1, dx.shape[-1]))
    grads["embeddings"] = dE
    return grads


def encode(indices, true_len, params: Params, config: ModelConfig, mode: Mode = "eval", rng: Rng | None = None):
    """Single example emissions, shape (n, 2)."""
    em, _ = encode_batch(np.asarray(indices)[None], np.array([true_len]), params, config, mode, rng)
    return em[0]


def loss_and_grads(params: Params, config: ModelConfig, batch: Batch, mode: Mode = "train", rng: Rng | None = None):
    """Mean per-word loss over the batch and its gradient for every parameter."""
    em, cache = encode_batch(batch.indices, batch.lengths, params, config, mode, rng)
    B = len(batch)
    if config.output_head == "crf":
        losses, d_em, d_trans, d_start = crf_nll_batch(em, batch.labels, batch.lengths, crf_of(params))
    else:
        losses, d_em = softmax_nll_batch(em, batch.labels, batch.lengths)
    grads = backward(d_em / B, cache, params, config)
    if config.output_head == "crf":
        grads["crf_transition"] = d_trans / B
        grads["crf_start"] = d_start / B
    ordered = {name: grads[name] for name in params}
    return float(np.mean(losses)), ordered


def word_losses(params: Params, config: ModelConfig, batch: Batch) -> np.ndarray:
    em, _ = encode_batch(batch.indices, batch.lengths, params, config, "eval")
    if config.output_head == "crf":
        return crf_nll_batch(em, batch.labels, batch.lengths, crf_of(params))[0]
    return softmax_nll_batch(em, batch.labels, batch.lengths)[0]
