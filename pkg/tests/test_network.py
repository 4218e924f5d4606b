import numpy as np
import pytest

from syllabnet.config import BASE, SMALL, ModelConfig
from syllabnet.engine import make_rng, relative_errors
from syllabnet.network import (
    Batch,
    _lstm_backward,
    _lstm_forward,
    _conv_backward,
    _conv_forward,
    bilstm,
    conv_block,
    count_parameters,
    embed,
    encode,
    encode_batch,
    init_parameters,
    loss_and_grads,
    lstm_cell,
    parameter_shapes,
)

TOY = ModelConfig(embedding_dim=4, lstm_dim=3, conv_blocks=1, conv_filters=2, conv_width=3,
                  dropout_rate=0.0, batch_size=4)


def toy_params(config=TOY, V=6, seed=0, scale=0.5):
    rng = make_rng(seed)
    params = init_parameters(config, V, rng)
    for k in params:
        params[k] = rng.normal(0, scale, params[k].shape)
    return params


def test_embed_lookup():
    params = toy_params()
    cols = embed([0, 0, 0], params)
    assert cols.shape == (3, 4)
    np.testing.assert_array_equal(cols, np.tile(params["embeddings"][0], (3, 1)))
    params["embeddings"][3] = [0, 0, 1, 0]
    np.testing.assert_array_equal(embed([3], params)[0], [0, 0, 1, 0])
    with pytest.raises(IndexError):
        embed([6], params)


def test_embedding_gradient_accumulates_repeated_phone():
    params = toy_params()
    batch = Batch(np.array([[2, 3, 2, 4]]), np.array([[0, 1, 0, 0]]), np.array([4]))
    names = list(params)

    def f(plist):
        loss, g = loss_and_grads(dict(zip(names, plist)), TOY, batch, "eval")
        return loss, [g[k] for k in names]

    emb_err = relative_errors(f, [params[k] for k in names])[0]
    assert emb_err < 1e-6
    _, g = loss_and_grads(params, TOY, batch, "eval")
    assert np.all(g["embeddings"][0] == 0)  # PAD unused
    assert np.all(g["embeddings"][5] == 0)  # phone absent from batch


def test_lstm_cell_zero_weights():
    l, d = 3, 4
    h, c = lstm_cell(np.ones(d), np.zeros(l), np.zeros(l), np.zeros((4 * l, d)), np.zeros((4 * l, l)), np.zeros(4 * l))
    np.testing.assert_array_equal(h, 0)
    np.testing.assert_array_equal(c, 0)


def test_lstm_cell_forget_saturation_keeps_cell():
    l, d = 2, 3
    b = np.zeros(4 * l)
    b[:l] = -50.0  # input gate shut
    b[l : 2 * l] = 50.0  # forget gate open
    c_prev = np.array([0.7, -0.3])
    rng = np.random.default_rng(0)
    _, c = lstm_cell(rng.normal(size=d), rng.normal(size=l), c_prev,
                     rng.normal(size=(4 * l, d)) * 0.1, rng.normal(size=(4 * l, l)) * 0.1, b)
    np.testing.assert_allclose(c, c_prev, atol=1e-12)


def test_lstm_batch_matches_cell_loop():
    rng = np.random.default_rng(1)
    l, d, n = 3, 4, 5
    W, U, b = rng.normal(size=(4 * l, d)), rng.normal(size=(4 * l, l)), rng.normal(size=4 * l)
    x = rng.normal(size=(1, n, d))
    out, _ = _lstm_forward(x, np.ones((1, n)), W, U, b)
    h, c = np.zeros(l), np.zeros(l)
    for t in range(n):
        h, c = lstm_cell(x[0, t], h, c, W, U, b)
        np.testing.assert_allclose(out[0, t], h, rtol=1e-13)


def test_lstm_gradients_finite_differences():
    rng = np.random.default_rng(2)
    l, d, n = 3, 2, 4
    W, U, b = rng.normal(size=(4 * l, d)), rng.normal(size=(4 * l, l)), rng.normal(size=4 * l)
    x = rng.normal(size=(2, n, d))
    mask = np.array([[1, 1, 1, 1], [1, 1, 0, 0]], dtype=float)
    R = rng.normal(size=(2, n, l))

    def f(ps):
        x_, W_, U_, b_ = ps
        out, cache = _lstm_forward(x_, mask, W_, U_, b_)
        dx, dW, dU, db = _lstm_backward(R, cache)
        return float(np.sum(out * R)), [dx, dW, dU, db]

    assert max(relative_errors(f, [x, W, U, b])) < 1e-6


def test_bilstm_zero_weights():
    l, d = 3, 4
    z = (np.zeros((4 * l, d)), np.zeros((4 * l, l)), np.zeros(4 * l))
    h = bilstm(np.random.default_rng(0).normal(size=(5, d)), 5, z, z)
    assert h.shape == (5, 6)
    np.testing.assert_array_equal(h, 0)


def test_bilstm_palindrome_symmetry():
    rng = np.random.default_rng(3)
    l, d = 3, 4
    w = (rng.normal(size=(4 * l, d)), rng.normal(size=(4 * l, l)), rng.normal(size=4 * l))
    half = rng.normal(size=(3, d))
    x = np.concatenate([half, half[-2::-1], rng.normal(size=(2, d))])  # palindrome of length 5, then padding
    h = bilstm(x, 5, w, w)
    fwd, bwd = h[:5, :l], h[:5, l:]
    np.testing.assert_allclose(fwd, bwd[::-1], rtol=1e-12)
    np.testing.assert_array_equal(h[5:], 0)


def test_bilstm_single_step():
    rng = np.random.default_rng(4)
    l, d = 2, 3
    wf = (rng.normal(size=(4 * l, d)), rng.normal(size=(4 * l, l)), rng.normal(size=4 * l))
    wb = (rng.normal(size=(4 * l, d)), rng.normal(size=(4 * l, l)), rng.normal(size=4 * l))
    x = rng.normal(size=(3, d))
    h = bilstm(x, 1, wf, wb)
    zero = np.zeros(l)
    np.testing.assert_allclose(h[0, :l], lstm_cell(x[0], zero, zero, *wf)[0])
    np.testing.assert_allclose(h[0, l:], lstm_cell(x[0], zero, zero, *wb)[0])
    np.testing.assert_array_equal(h[1:], 0)


def test_conv_block_worked_example():
    x = np.array([[1.0], [2.0], [3.0]])
    W = np.ones((1, 1, 3))
    out = conv_block(x, W, np.zeros(1), pool_size=1)
    np.testing.assert_array_equal(out[:, 0], [1, 3, 6])
    out = conv_block(x, W, np.zeros(1), pool_size=2)
    np.testing.assert_array_equal(out[:, 0], [1, 3, 6])


def test_conv_block_pool_takes_left_max():
    x = np.array([[5.0], [0.0], [0.0], [1.0]])
    W = np.zeros((1, 1, 2))
    W[0, 0, 1] = 1.0  # identity on the current position
    out = conv_block(x, W, np.zeros(1), pool_size=2)
    np.testing.assert_array_equal(out[:, 0], [5, 5, 0, 1])


def test_conv_block_relu_floor():
    x = np.abs(np.random.default_rng(0).normal(size=(5, 3)))
    out = conv_block(x, -np.ones((4, 3, 3)), -np.ones(4), pool_size=2)
    np.testing.assert_array_equal(out, 0)


def test_conv_gradient_finite_differences():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(2, 5, 4))
    W = rng.normal(size=(3, 4, 3))
    b = rng.normal(size=3)
    R = rng.normal(size=(2, 5, 3))

    def f(ps):
        x_, W_, b_ = ps
        out, cache = _conv_forward(x_, W_, b_, 2)
        dx, dW, db = _conv_backward(R, cache)
        return float(np.sum(out * R)), [dx, dW, db]

    assert max(relative_errors(f, [x, W, b])) < 1e-6


def test_encode_eval_deterministic_and_shapes():
    params = toy_params()
    a = encode([2, 3, 4, 0], 3, params, TOY)
    b = encode([2, 3, 4, 0], 3, params, TOY)
    assert a.shape == (4, 2)
    np.testing.assert_array_equal(a, b)


def test_encode_train_mode_seeded():
    cfg = TOY.replace(dropout_rate=0.25)
    params = toy_params(cfg)
    a = encode([2, 3, 4, 5], 4, params, cfg, "train", make_rng(9))
    b = encode([2, 3, 4, 5], 4, params, cfg, "train", make_rng(9))
    c = encode([2, 3, 4, 5], 4, params, cfg, "eval")
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_base_concat_dimension():
    params = init_parameters(BASE, 5, make_rng(0))
    em, cache = encode_batch(np.array([[2, 3, 4]]), np.array([3]), params, BASE)
    assert cache[-1].shape == (1, 3, 800)
    assert em.shape == (1, 3, 2)
    assert np.all(np.isfinite(em))


@pytest.mark.parametrize("n", [1, 2, 7, 20])
@pytest.mark.parametrize("cfg", [TOY, TOY.replace(conv_blocks=2, pool_size=3, output_head="softmax")])
def test_shape_contract(cfg, n):
    params = toy_params(cfg)
    idx = np.random.default_rng(n).integers(0, 6, size=n)
    em = encode(idx, n, params, cfg)
    assert em.shape == (n, 2) and np.all(np.isfinite(em))


def test_padding_never_matters():
    params = toy_params(TOY.replace(conv_blocks=2))
    cfg = TOY.replace(conv_blocks=2)
    idx = np.array([[2, 3, 4, 0, 0, 0], [5, 2, 0, 0, 0, 0]])
    lab = np.array([[1, 0, 0, 0, 0, 0], [0, 0, 0, 0, 0, 0]])
    lengths = np.array([3, 2])
    loss, g = loss_and_grads(params, cfg, Batch(idx, lab, lengths), "eval")
    idx2 = idx.copy()
    idx2[0, 3:] = [5, 4, 3]
    idx2[1, 2:] = [2, 2, 2, 2]
    lab2 = lab.copy()
    lab2[0, 3:] = 1
    loss2, g2 = loss_and_grads(params, cfg, Batch(idx2, lab2, lengths), "eval")
    assert loss == loss2
    for k in g:
        np.testing.assert_array_equal(g[k], g2[k])
    # and a trimmed batch agrees with the padded one
    loss3, _ = loss_and_grads(params, cfg, Batch(idx[:, :3], lab[:, :3], lengths), "eval")
    assert loss3 == pytest.approx(loss, abs=1e-14)


def test_batch_rows_match_single_examples():
    params = toy_params()
    idx = np.array([[2, 3, 4, 5], [4, 4, 0, 0]])
    em, _ = encode_batch(idx, np.array([4, 2]), params, TOY)
    np.testing.assert_allclose(em[1, :2], encode([4, 4], 2, params, TOY), rtol=1e-13)


def test_count_parameters_toy_by_hand():
    cfg = ModelConfig(embedding_dim=2, lstm_dim=2, conv_filters=2, conv_width=2, conv_blocks=1)
    emb = 4 * 2
    lstm = 2 * (8 * 2 + 8 * 2 + 8)
    conv = 2 * 2 * 2 + 2
    proj = (2 * 2 + 2) * 2 + 2
    crf = 4 + 2
    assert count_parameters(cfg, 4) == emb + lstm + conv + proj + crf == 118
    assert count_parameters(cfg.replace(output_head="softmax"), 4) == 112


def test_count_parameters_relations():
    assert count_parameters(SMALL, 50) < count_parameters(BASE, 50)
    assert count_parameters(BASE, 51) - count_parameters(BASE, 50) == BASE.embedding_dim
    params = init_parameters(SMALL, 50, make_rng(0))
    assert sum(p.size for p in params.values()) == count_parameters(SMALL, 50)
    assert list(params) == list(parameter_shapes(SMALL, 50))


def test_init_conventions():
    params = init_parameters(SMALL, 10, make_rng(0))
    l = SMALL.lstm_dim
    for side in ("fwd", "bwd"):
        b = params[f"lstm_{side}_b"]
        assert np.all(b[l : 2 * l] == 1.0) and np.all(b[:l] == 0) and np.all(b[2 * l :] == 0)
    assert np.all(params["crf_transition"] == 0)
    W = params["lstm_fwd_W"]
    assert np.max(np.abs(W)) <= np.sqrt(6 / (SMALL.embedding_dim + 4 * l))


def test_float32_mode_runs():
    cfg = TOY.replace(dtype="float32")
    params = init_parameters(cfg, 6, make_rng(0))
    assert params["proj_W"].dtype == np.float32
    batch = Batch(np.array([[2, 3, 4]]), np.array([[1, 0, 0]]), np.array([3]))
    loss, g = loss_and_grads(params, cfg, batch, "eval")
    assert np.isfinite(loss)
