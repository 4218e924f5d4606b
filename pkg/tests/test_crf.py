import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from syllabnet.crf import (
    CrfParameters,
    brute_force_paths,
    crf_log_partition,
    crf_nll,
    crf_nll_batch,
    path_score,
    softmax_decode,
    softmax_decode_batch,
    softmax_nll_batch,
    softmax_position,
    viterbi_decode,
    viterbi_decode_batch,
)


def random_instance(rng, L, n=None):
    n = n or L
    em = rng.normal(size=(n, 2))
    crf = CrfParameters(rng.normal(size=(2, 2)), rng.normal(size=2))
    return em, crf


# ---------------------------------------------------------------- softmax head


def test_softmax_position():
    np.testing.assert_allclose(softmax_position([0.0, 0.0]), [0.5, 0.5])
    e = math.e
    np.testing.assert_allclose(softmax_position([1.0, 0.0]), [e / (e + 1), 1 / (e + 1)], rtol=1e-15)
    p = softmax_position([1000.0, 0.0])
    assert np.all(np.isfinite(p)) and p[0] == pytest.approx(1.0) and p[1] < 1e-300


def test_softmax_decode_ties_and_logprob():
    path = softmax_decode(np.zeros((3, 2)), 3)
    assert path.labels.tolist() == [0, 0, 0]
    assert path.log_probability == pytest.approx(3 * math.log(0.5))
    em = np.tile([2.0, -1.0], (4, 1))
    assert softmax_decode(em, 4).labels.tolist() == [0, 0, 0, 0]


def test_softmax_decode_matches_enumeration():
    rng = np.random.default_rng(0)
    for _ in range(50):
        L = int(rng.integers(1, 8))
        em = rng.normal(size=(L, 2))
        logp = em - np.log(np.exp(em).sum(1, keepdims=True))
        best, best_lp = None, -np.inf
        for bits in range(2**L):
            y = [(bits >> (L - 1 - i)) & 1 for i in range(L)]
            lp = sum(logp[i, y[i]] for i in range(L))
            if lp > best_lp:
                best, best_lp = y, lp
        path = softmax_decode(em, L)
        assert path.labels.tolist() == best
        assert path.log_probability == pytest.approx(best_lp, abs=1e-12)


def test_softmax_nll_batch_gradient():
    rng = np.random.default_rng(1)
    em = rng.normal(size=(3, 5, 2))
    lab = rng.integers(0, 2, size=(3, 5))
    lengths = np.array([5, 2, 1])
    losses, d = softmax_nll_batch(em, lab, lengths)
    eps = 1e-6
    num = np.zeros_like(em)
    for idx in np.ndindex(em.shape):
        ep, emn = em.copy(), em.copy()
        ep[idx] += eps
        emn[idx] -= eps
        num[idx] = (softmax_nll_batch(ep, lab, lengths)[0].sum() - softmax_nll_batch(emn, lab, lengths)[0].sum()) / (2 * eps)
    np.testing.assert_allclose(d, num, atol=1e-8)
    assert np.all(d[1, 2:] == 0) and np.all(d[2, 1:] == 0)


# ---------------------------------------------------------------- CRF head


def test_log_partition_uniform():
    for L in (1, 3, 7):
        assert crf_log_partition(np.zeros((L, 2)), CrfParameters.zeros(), L) == pytest.approx(L * math.log(2))


def test_log_partition_single_position():
    em = np.array([[0.3, -1.2]])
    assert crf_log_partition(em, CrfParameters.zeros(), 1) == pytest.approx(math.log(math.exp(0.3) + math.exp(-1.2)))


def test_log_partition_ignores_padding():
    rng = np.random.default_rng(2)
    em, crf = random_instance(rng, 4, n=9)
    ref = crf_log_partition(em, crf, 4)
    em[4:] = rng.normal(size=(5, 2)) * 100
    assert crf_log_partition(em, crf, 4) == ref


@pytest.mark.parametrize("seed", range(4))
def test_partition_and_viterbi_match_brute_force(seed):
    rng = np.random.default_rng(100 + seed)
    for _ in range(50):
        L = int(rng.integers(1, 9))
        em, crf = random_instance(rng, L)
        bf = brute_force_paths(em, crf, L)
        assert abs(crf_log_partition(em, crf, L) - bf.log_z) <= 1e-8
        path = viterbi_decode(em, crf, L)
        np.testing.assert_array_equal(path.labels, bf.best)
        assert path.score == pytest.approx(bf.best_score, abs=1e-10)
        assert path.log_probability == pytest.approx(bf.best_score - bf.log_z, abs=1e-10)
        assert path.log_probability <= 0


def test_viterbi_ties_go_to_zero():
    path = viterbi_decode(np.zeros((5, 2)), CrfParameters.zeros(), 5)
    assert path.labels.tolist() == [0] * 5
    bf = brute_force_paths(np.zeros((5, 2)), CrfParameters.zeros(), 5)
    assert bf.best.tolist() == [0] * 5


def test_viterbi_zero_transitions_is_argmax():
    rng = np.random.default_rng(3)
    em = rng.normal(size=(6, 2))
    path = viterbi_decode(em, CrfParameters.zeros(), 6)
    np.testing.assert_array_equal(path.labels, np.argmax(em, axis=1))


def test_viterbi_avoids_penalized_transition():
    em = np.tile([0.0, 1.0], (4, 1))
    crf = CrfParameters(np.array([[0.0, 0.0], [0.0, -5.0]]), np.zeros(2))
    path = viterbi_decode(em, crf, 4)
    bf = brute_force_paths(em, crf, 4)
    np.testing.assert_array_equal(path.labels, bf.best)
    assert path.labels.tolist() == [1, 0, 1, 0] or path.labels.tolist() == [0, 1, 0, 1]
    assert not any(a == b == 1 for a, b in zip(path.labels, path.labels[1:]))


def test_nll_certain_path():
    em = np.array([[50.0, -50.0], [-50.0, 50.0], [50.0, -50.0]])
    assert crf_nll(em, CrfParameters.zeros(), [0, 1, 0], 3) == pytest.approx(0.0, abs=1e-12)


def test_nll_uniform():
    for labels in ([0, 0, 0, 0], [1, 0, 1, 1]):
        assert crf_nll(np.zeros((4, 2)), CrfParameters.zeros(), labels, 4) == pytest.approx(4 * math.log(2))


def test_brute_force_guard_and_sizes():
    em = np.zeros((13, 2))
    with pytest.raises(ValueError):
        brute_force_paths(em, CrfParameters.zeros(), 13)
    assert len(brute_force_paths(em, CrfParameters.zeros(), 1).scores) == 2
    bf = brute_force_paths(np.random.default_rng(0).normal(size=(3, 2)), CrfParameters.zeros(), 3)
    assert len(bf.scores) == 8
    assert bf.probabilities.sum() == pytest.approx(1.0, abs=1e-12)


def _batch(rng, B=6, n=7):
    em = rng.normal(size=(B, n, 2))
    lengths = rng.integers(1, n + 1, size=B)
    lengths[0] = n
    lab = rng.integers(0, 2, size=(B, n))
    crf = CrfParameters(rng.normal(size=(2, 2)), rng.normal(size=2))
    return em, lab, lengths, crf


def test_batch_nll_matches_single():
    rng = np.random.default_rng(5)
    em, lab, lengths, crf = _batch(rng)
    losses, *_ = crf_nll_batch(em, lab, lengths, crf)
    for b in range(len(lengths)):
        assert losses[b] == pytest.approx(crf_nll(em[b], crf, lab[b], lengths[b]), abs=1e-12)


def test_batch_nll_gradient_finite_differences():
    rng = np.random.default_rng(6)
    em, lab, lengths, crf = _batch(rng)

    def total(e, T, s):
        return crf_nll_batch(e, lab, lengths, CrfParameters(T, s))[0].mean()

    _, d_em, d_T, d_s = crf_nll_batch(em, lab, lengths, crf)
    B = len(lengths)
    eps = 1e-5
    for arr, analytic in ((em, d_em / B), (crf.transition, d_T / B), (crf.start, d_s / B)):
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + eps
            fp = total(em, crf.transition, crf.start)
            arr[idx] = old - eps
            fm = total(em, crf.transition, crf.start)
            arr[idx] = old
            num = (fp - fm) / (2 * eps)
            err = abs(analytic[idx] - num) / max(1e-8, abs(analytic[idx]) + abs(num))
            assert err < 1e-4, (idx, analytic[idx], num)


def test_batch_viterbi_matches_single():
    rng = np.random.default_rng(7)
    em, _, lengths, crf = _batch(rng, B=20, n=9)
    labels = viterbi_decode_batch(em, lengths, crf)
    for b in range(20):
        L = lengths[b]
        np.testing.assert_array_equal(labels[b, :L], viterbi_decode(em[b], crf, L).labels)
        assert np.all(labels[b, L:] == 0)


def test_batch_softmax_decode_masks_padding():
    em = np.tile([0.0, 1.0], (2, 3, 1))
    out = softmax_decode_batch(em, np.array([3, 1]))
    assert out.tolist() == [[1, 1, 1], [1, 0, 0]]


# ---------------------------------------------------------------- properties

instance = st.tuples(st.integers(1, 10), st.integers(0, 2**32 - 1))


@settings(max_examples=60, deadline=None)
@given(instance)
def test_normalization(inst):
    L, seed = inst
    em, crf = random_instance(np.random.default_rng(seed), L)
    bf = brute_force_paths(em, crf, L)
    total = np.sum(np.exp(bf.scores - crf_log_partition(em, crf, L)))
    assert abs(total - 1.0) <= 1e-8


@settings(max_examples=60, deadline=None)
@given(instance, st.floats(-20, 20), st.integers(0, 9))
def test_shift_invariance(inst, c, pos):
    L, seed = inst
    pos = pos % L
    em, crf = random_instance(np.random.default_rng(seed), L)
    shifted = em.copy()
    shifted[pos] += c
    assert crf_log_partition(shifted, crf, L) == pytest.approx(crf_log_partition(em, crf, L) + c, abs=1e-9)
    np.testing.assert_array_equal(viterbi_decode(shifted, crf, L).labels, viterbi_decode(em, crf, L).labels)


@settings(max_examples=60, deadline=None)
@given(instance, st.integers(0, 2**12 - 1))
def test_nll_is_minus_log_prob(inst, bits):
    L, seed = inst
    em, crf = random_instance(np.random.default_rng(seed), L)
    y = [(bits >> i) & 1 for i in range(L)]
    nll = crf_nll(em, crf, y, L)
    assert nll >= -1e-12
    bf = brute_force_paths(em, crf, L)
    assert nll == pytest.approx(bf.log_z - path_score(em, crf, y, L), abs=1e-10)


@settings(max_examples=100, deadline=None)
@given(instance)
def test_softmax_equals_viterbi_without_transitions(inst):
    L, seed = inst
    em = np.random.default_rng(seed).normal(size=(L, 2))
    np.testing.assert_array_equal(viterbi_decode(em, CrfParameters.zeros(), L).labels, softmax_decode(em, L).labels)
