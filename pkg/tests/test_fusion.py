import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cimsim.fixedpoint import FixedPointMatrix
from cimsim.fusion import FusedWeights, WeightMode, fuse, load_fused, requantize, save_fused
from cimsim.oracle import naive_matmul, oracle_bilinear, oracle_scores

from conftest import rand_fp


def test_identity_fusion():
    eye = FixedPointMatrix(np.eye(2, dtype=int), 4)
    assert fuse(eye, eye).values.tolist() == [[1, 0], [0, 1]]


def test_zero_annihilates(rng):
    wq = rand_fp(rng, 3, 3, 8)
    assert not fuse(wq, FixedPointMatrix(np.zeros((3, 3), int), 8)).values.any()


def test_two_by_two_example():
    wq = FixedPointMatrix([[1, 2], [3, 4]], 8)
    wk = FixedPointMatrix([[5, 6], [7, 8]], 8)
    expected = naive_matmul([[1, 2], [3, 4]], [[5, 7], [6, 8]])
    assert expected == [[17, 23], [39, 53]]
    assert fuse(wq, wk).values.tolist() == expected


def test_shape_and_width_mismatch():
    with pytest.raises(ValueError):
        fuse(FixedPointMatrix(np.zeros((2, 2), int), 8), FixedPointMatrix(np.zeros((3, 3), int), 8))
    with pytest.raises(ValueError):
        fuse(FixedPointMatrix(np.zeros((2, 2), int), 8), FixedPointMatrix(np.zeros((2, 2), int), 4))


def test_fuse_with_identity_is_wq(rng):
    wq = rand_fp(rng, 6, 6, 8)
    eye = FixedPointMatrix(np.eye(6, dtype=int), 8)
    assert np.array_equal(fuse(wq, eye).values, wq.data)


def test_exact_bound(rng):
    for bits in (2, 8, 16):
        d = 16
        wq, wk = rand_fp(rng, d, d, bits), rand_fp(rng, d, d, bits)
        assert fuse(wq, wk).max_abs <= d * 2 ** (2 * bits - 2)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 16), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_fusion_equivalence(d, n, seed):
    rng = np.random.default_rng(seed)
    x, wq, wk = rand_fp(rng, n, d, 8), rand_fp(rng, d, d, 8), rand_fp(rng, d, d, 8)
    assert oracle_bilinear(x, fuse(wq, wk).values) == oracle_scores(x, wq, wk)


def test_requantize_examples():
    z = requantize(FusedWeights(np.zeros((2, 2), int)), 8)
    assert z.scale == 1.0 and not z.values.any()
    q = requantize(FusedWeights([[-254, 127], [0, 0]]), 8)
    assert q.scale == 2.0
    assert q.values.tolist() == [[-127, 64], [0, 0]]
    same = requantize(FusedWeights([[-127, 5], [127, 0]]), 8)
    assert same.scale == 1.0 and same.values.tolist() == [[-127, 5], [127, 0]]
    assert np.array_equal(same.dequantized(), [[-127, 5], [127, 0]])


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 8), st.sampled_from([2, 4, 8, 12]), st.integers(0, 2**32 - 1))
def test_requantize_error_bound(d, bits, seed):
    rng = np.random.default_rng(seed)
    exact = FusedWeights(rng.integers(-(2**20), 2**20, size=(d, d)))
    q = requantize(exact, bits)
    assert q.mode is WeightMode.REQUANTIZED
    err = np.abs(q.dequantized() - exact.values)
    assert err.max() <= q.scale / 2 * (1 + 1e-12)


def test_requantize_needs_exact():
    q = requantize(FusedWeights([[4, 2], [1, 0]]), 4)
    with pytest.raises(ValueError):
        requantize(q, 4)


@pytest.mark.parametrize("fmt", ["bin", "csv", "json"])
def test_persist_roundtrip(tmp_path, rng, fmt):
    fw = fuse(rand_fp(rng, 5, 5, 8), rand_fp(rng, 5, 5, 8))
    for w in (fw, requantize(fw, 8)):
        path = save_fused(w, tmp_path / f"w.{fmt}", fmt)
        back = load_fused(path)
        assert np.array_equal(back.values, w.values)
        assert back.mode == w.mode and back.scale == w.scale and back.weight_bits == w.weight_bits


def test_extreme_16bit_weights_exact():
    d = 64
    wq = FixedPointMatrix(np.full((d, d), -(2**15)), 16)
    wk = FixedPointMatrix(np.full((d, d), -(2**15)), 16)
    assert fuse(wq, wk).values.tolist() == naive_matmul(wq.tolist(), [list(r) for r in zip(*wk.tolist())])
