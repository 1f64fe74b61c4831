import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cimsim.accumulators import GroupAccumulators, combine_groups
from cimsim.config import MacroConfig, SkipMode
from cimsim.fixedpoint import FixedPointMatrix, int_range
from cimsim.fusion import FusedWeights, fuse, requantize
from cimsim.near_memory import NearMemoryEngine, attention_scores, check_overflow, score_element
from cimsim.oracle import oracle_bilinear, oracle_scores

from conftest import rand_fp


def eq_oracle(scores, expected):
    return scores.values.tolist() == expected


def test_combine_zero():
    assert combine_groups(GroupAccumulators(8), 8) == 0


def test_combine_scalar_example():
    acc = GroupAccumulators(2)
    acc.add(1, 0, 3)  # sign(i) x bit0(j): shift K-1+0
    assert combine_groups(acc, 2) == -6


def test_combine_width_mismatch():
    with pytest.raises(ValueError):
        combine_groups(GroupAccumulators(4), 8)


def test_combine_random_int8(rng):
    w = rng.integers(-128, 128, size=(8, 8))
    eng = NearMemoryEngine(FusedWeights(w))
    for _ in range(50):
        xi, xj = rng.integers(-128, 128, 8), rng.integers(-128, 128, 8)
        acc = eng.pair_groups(xi, xj, 8)
        assert combine_groups(acc, 8) == int(xi @ w @ xj)


def test_decomposition_identity_k4_exhaustive(rng):
    # every (a, b) in the 4-bit range, d = 1, summed through the four groups
    for w in rng.integers(-128, 128, size=6):
        eng = NearMemoryEngine(FusedWeights([[int(w)]]))
        for a in range(-8, 8):
            for b in range(-8, 8):
                assert eng.score_element([a], [b], 4) == a * int(w) * b


def test_score_element_one_hot(rng):
    w = rng.integers(-100, 100, size=(5, 5))
    eng = NearMemoryEngine(FusedWeights(w))
    e1, e2 = np.eye(5, dtype=int)[0], np.eye(5, dtype=int)[1]
    assert score_element(eng, e1, e2, 8) == w[0, 1]


def test_score_element_quadratic_form(rng):
    a = rng.integers(-10, 10, size=(6, 6))
    w = a @ a.T  # symmetric positive semidefinite
    eng = NearMemoryEngine(FusedWeights(w))
    x = rng.integers(-128, 128, 6)
    s = eng.score_element(x, x, 8)
    assert s == int(x @ w @ x) and s >= 0


def test_score_element_tiled_128(rng):
    w = rng.integers(-128, 128, size=(128, 128))
    eng = NearMemoryEngine(FusedWeights(w))
    assert len(eng.tiles) == 4
    xi, xj = rng.integers(-128, 128, 128), rng.integers(-128, 128, 128)
    assert eng.score_element(xi, xj, 8) == int(xi.astype(object) @ w.astype(object) @ xj.astype(object))


def test_score_element_dimension_mismatch():
    eng = NearMemoryEngine(FusedWeights(np.eye(3, dtype=int)))
    with pytest.raises(ValueError):
        eng.score_element([1, 2], [1, 2, 3], 8)


def test_identity_tokens_return_weights(rng):
    w = rng.integers(-1000, 1000, size=(6, 6))
    x = FixedPointMatrix(np.eye(6, dtype=int), 8)
    s, _ = attention_scores(x, FusedWeights(w))
    assert np.array_equal(s.values, w)


def test_single_token(rng):
    w = rng.integers(-128, 128, size=(4, 4))
    x = rand_fp(rng, 1, 4, 8)
    s, _ = attention_scores(x, FusedWeights(w))
    assert s.values.shape == (1, 1) and s.values[0, 0] == int(x.data[0] @ w @ x.data[0])


def test_random_n8_d16(rng):
    x = rand_fp(rng, 8, 16, 8)
    wq, wk = rand_fp(rng, 16, 16, 8), rand_fp(rng, 16, 16, 8)
    s, _ = attention_scores(x, fuse(wq, wk))
    assert eq_oracle(s, oracle_scores(x, wq, wk))


@pytest.mark.parametrize("rows,cols", [(64, 64), (16, 16), (7, 5), (1, 3)])
@pytest.mark.parametrize("mode", list(SkipMode))
def test_every_tiling_and_mode(rows, cols, mode, rng):
    x = rand_fp(rng, 6, 19, 4)
    w = rng.integers(-(2**12), 2**12, size=(19, 19))
    cfg = MacroConfig(array_rows=rows, array_cols=cols, skip_mode=mode)
    s, rep = attention_scores(x, FusedWeights(w), cfg)
    assert eq_oracle(s, oracle_bilinear(x, w))
    assert rep["access"]["measured_weight_bit_writes"] == 19 * 19 * cfg.weight_bits


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 12), st.integers(1, 40), st.sampled_from([2, 4, 8]), st.integers(0, 2**32 - 1))
def test_end_to_end_property(n, d, bits, seed):
    rng = np.random.default_rng(seed)
    x, wq, wk = rand_fp(rng, n, d, bits), rand_fp(rng, d, d, bits), rand_fp(rng, d, d, bits)
    cfg = MacroConfig(array_rows=16, array_cols=16, skip_mode=SkipMode.ELEMENT)
    s, _ = attention_scores(x, fuse(wq, wk), cfg)
    assert eq_oracle(s, oracle_scores(x, wq, wk))


def test_symmetric_weights_give_symmetric_scores(rng):
    a = rng.integers(-20, 20, size=(10, 10))
    x = rand_fp(rng, 9, 10, 8)
    s, _ = attention_scores(x, FusedWeights(a + a.T))
    assert np.array_equal(s.values, s.values.T)


def test_skip_modes_identical_scores_different_counters(rng):
    x = FixedPointMatrix(rng.integers(-8, 8, size=(10, 12)) * (rng.random((10, 12)) < 0.3), 4)
    w = FusedWeights(rng.integers(-128, 128, size=(12, 12)))
    runs = {m: attention_scores(x, w, MacroConfig(skip_mode=m)) for m in SkipMode}
    vals = [r[0].values for r in runs.values()]
    assert all(np.array_equal(vals[0], v) for v in vals)
    assert runs[SkipMode.NONE][1]["cost"]["cycles"] > runs[SkipMode.PLANE][1]["cost"]["cycles"]
    assert (
        runs[SkipMode.ELEMENT][1]["cost"]["counters"]["adder_ops"]
        < runs[SkipMode.PLANE][1]["cost"]["counters"]["adder_ops"]
    )


def test_batched_and_scalar_counters_agree(rng):
    x = FixedPointMatrix(rng.integers(-8, 8, size=(5, 9)) * (rng.random((5, 9)) < 0.5), 4)
    w = FusedWeights(rng.integers(-128, 128, size=(9, 9)))
    cfg = MacroConfig(array_rows=4, array_cols=6)
    batched = NearMemoryEngine(w, cfg)
    s = batched.run(x)
    scalar = NearMemoryEngine(w, cfg)
    for i in range(5):
        for j in range(5):
            assert scalar.score_element(x.data[i], x.data[j], 4) == s.values[i, j]
    assert batched.event_counts() == scalar.event_counts()


def test_thread_count_does_not_change_output(rng):
    x = rand_fp(rng, 30, 20, 8)
    w = FusedWeights(rng.integers(-128, 128, size=(20, 20)))
    a, ra = attention_scores(x, w, threads=1)
    b, rb = attention_scores(x, w, threads=4)
    assert np.array_equal(a.values, b.values) and ra == rb


def test_requantized_scores_dequantize(rng):
    x, wq, wk = rand_fp(rng, 4, 8, 8), rand_fp(rng, 8, 8, 8), rand_fp(rng, 8, 8, 8)
    fw = requantize(fuse(wq, wk), 8)
    s, _ = attention_scores(x, fw)
    assert np.array_equal(s.values, np.array(oracle_bilinear(x, fw.values)))
    assert np.allclose(s.dequantized(), s.values * fw.scale)


def test_shape_mismatch_and_overflow():
    with pytest.raises(ValueError):
        attention_scores(FixedPointMatrix(np.zeros((2, 3), int), 8), FusedWeights(np.eye(4, dtype=int)))
    with pytest.raises(OverflowError):
        check_overflow(1024, 16, 2**30)
    big = FusedWeights(np.full((4, 4), 2**60))
    with pytest.raises(OverflowError):
        attention_scores(FixedPointMatrix(np.ones((1, 4), int), 8), big)
