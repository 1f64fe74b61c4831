"""Seeded synthetic inputs for benches and tests."""

from __future__ import annotations

import numpy as np

from .fixedpoint import FixedPointMatrix, int_range
from .fusion import FusedWeights


def _rng(seed: int, *tags) -> np.random.Generator:
    return np.random.default_rng([int(seed)] + [int(t) for t in tags])


def sparse_tokens(n: int, d: int, bits: int, sparsity: float, seed: int = 0) -> FixedPointMatrix:
    """Token matrix whose two's-complement bits are each zero with probability ``sparsity``."""
    if not 0.0 <= sparsity <= 1.0:
        raise ValueError(f"sparsity must be in [0, 1], got {sparsity}")
    rng = _rng(seed, 1, n, d, bits, round(sparsity * 1_000_000))
    ones = rng.random((bits, n, d)) >= sparsity
    weights = np.array([1 << k for k in range(bits - 1)] + [-(1 << (bits - 1))], dtype=np.int64)
    return FixedPointMatrix(np.tensordot(weights, ones.astype(np.int64), axes=1), bits)


def padded_tokens(n: int, d: int, bits: int, valid: int, seed: int = 0) -> FixedPointMatrix:
    """Uniform random tokens in the first ``valid`` rows, zero padding after."""
    rng = _rng(seed, 2, n, d, bits, valid)
    lo, hi = int_range(bits)
    data = rng.integers(lo, hi + 1, size=(n, d))
    data[valid:] = 0
    return FixedPointMatrix(data, bits)


def random_matrix(rows: int, cols: int, bits: int, seed: int = 0, tag: int = 3) -> FixedPointMatrix:
    lo, hi = int_range(bits)
    return FixedPointMatrix(_rng(seed, tag, rows, cols, bits).integers(lo, hi + 1, size=(rows, cols)), bits)


def random_fused(d: int, weight_bits: int, seed: int = 0) -> FusedWeights:
    """A stored-width W_QK drawn directly (no projection pair behind it)."""
    return FusedWeights(random_matrix(d, d, weight_bits, seed, tag=4).data)
