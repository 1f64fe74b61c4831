import numpy as np
import pytest

from cimsim.fixedpoint import FixedPointMatrix
from cimsim.fusion import fuse
from cimsim.near_memory import attention_scores
from cimsim.oracle import baseline_ops, baseline_trace, naive_matmul, oracle_scores, proposed_trace

from conftest import rand_fp


def test_identity():
    eye = FixedPointMatrix(np.eye(3, dtype=int), 4)
    assert oracle_scores(eye, eye, eye) == np.eye(3, dtype=int).tolist()


def test_scalar_expansion():
    # (2*3) * (2*5) = 60
    assert oracle_scores([[2]], [[3]], [[5]]) == [[60]]


def test_agrees_with_simulator(rng):
    x, wq, wk = rand_fp(rng, 4, 4, 8), rand_fp(rng, 4, 4, 8), rand_fp(rng, 4, 4, 8)
    s, _ = attention_scores(x, fuse(wq, wk))
    assert s.values.tolist() == oracle_scores(x, wq, wk)


def test_wide_integers_do_not_overflow():
    big = [[2**40]]
    assert oracle_scores(big, big, big) == [[2**160]]


def test_shape_mismatch():
    with pytest.raises(ValueError):
        oracle_scores([[1, 2]], [[1]], [[1]])
    with pytest.raises(ValueError):
        naive_matmul([[1, 2]], [[1, 2]])


def test_baseline_dynamic_writes_example():
    t = baseline_trace(64, 64, 8, 8)
    assert t.dynamic_writes.bits == 64 * 64 * 8 == 32768
    assert t.weight_writes.bits == 2 * 64 * 64 * 8


def test_baseline_zero_tokens():
    t = baseline_trace(0, 64, 8, 8)
    for f in ("dynamic_writes", "input_reads", "output_writes", "buffer_reads", "buffer_writes"):
        assert getattr(t, f).bits == 0 and getattr(t, f).words == 0


@pytest.mark.parametrize("n", [0, 1, 8, 16, 32, 64, 1000])
def test_proposed_never_writes_dynamically(n):
    t = proposed_trace(n, 64, 8, 8)
    assert t.dynamic_writes.bits == 0
    assert t.weight_writes.bits == 64 * 64 * 8


def test_baseline_dynamic_linear_in_nd():
    per = [baseline_trace(n, d, 8, 8).dynamic_writes.bits / (n * d) for n in (8, 16, 32, 64) for d in (16, 64)]
    assert len(set(per)) == 1


def test_trace_descriptions_present():
    assert "dynamic write" in baseline_trace(4, 4, 8, 8).description
    assert "no array" in proposed_trace(4, 4, 8, 8).description
    d = baseline_trace(4, 4, 8, 8).as_dict()
    assert d["array_bits"] + d["buffer_reads"]["bits"] + d["buffer_writes"]["bits"] == d["total_bits"]


def test_baseline_ops_scalar_case():
    # N=d=1, K=8: 3 MACs * 8 planes * 2 ops + 3 outputs * 8 shift-adds
    assert baseline_ops(1, 1, 8) == 3 * 8 * 2 + 3 * 8
