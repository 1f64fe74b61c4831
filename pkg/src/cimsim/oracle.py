"""
Reference implementations kept independent of the simulator.

``oracle_scores`` runs the unfused two-step Q.K^T pipeline with naive loops
over Python ints, so it can never overflow and shares no code path with the
bit-serial engine.  The trace generators are closed-form counting models of
array and buffer traffic for the fused (weight-stationary) scheme and for a
conventional CIM baseline that stores W_Q and W_K and must write K^T into an
array at run time.
"""

from __future__ import annotations

from dataclasses import dataclass
from operator import mul

import numpy as np


def _as_rows(m) -> list[list[int]]:
    data = getattr(m, "data", m)
    return [[int(v) for v in row] for row in np.asarray(data).tolist()]


def naive_matmul(a: list[list[int]], b: list[list[int]]) -> list[list[int]]:
    if a and b and len(a[0]) != len(b):
        raise ValueError(f"inner dimensions differ: {len(a[0])} vs {len(b)}")
    cols = [list(c) for c in zip(*b)] if b else []
    return [[sum(map(mul, row, col)) for col in cols] for row in a]


def transpose(a: list[list[int]]) -> list[list[int]]:
    return [list(c) for c in zip(*a)]


def oracle_scores(x, w_q, w_k) -> list[list[int]]:
    """S = (X.W_Q).(X.W_K)^T in exact integers."""
    xs, wq, wk = _as_rows(x), _as_rows(w_q), _as_rows(w_k)
    d = len(xs[0]) if xs else 0
    if len(wq) != d or len(wk) != d or any(len(r) != len(wq[0]) for r in wq + wk):
        raise ValueError(
            f"X has {d} columns but W_Q is {len(wq)}x{len(wq[0]) if wq else 0}, "
            f"W_K is {len(wk)}x{len(wk[0]) if wk else 0}"
        )
    q = naive_matmul(xs, wq)
    k = naive_matmul(xs, wk)
    return naive_matmul(q, transpose(k))


def oracle_bilinear(x, w) -> list[list[int]]:
    """S = X.W.X^T directly, for fused-weight checks."""
    xs, ws = _as_rows(x), _as_rows(w)
    return naive_matmul(naive_matmul(xs, ws), transpose(xs))


# ---------------------------------------------------------------------------
# access traces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Traffic:
    words: int
    bits: int

    def as_dict(self) -> dict:
        return {"words": int(self.words), "bits": int(self.bits)}


@dataclass(frozen=True)
class BaselineTrace:
    """Per-inference traffic under one counting model.

    Array-level fields: ``weight_writes`` (one-time), ``dynamic_writes``,
    ``input_reads``, ``output_writes``.  Buffer-level fields are kept apart
    because published comparisons differ on whether buffers count.
    """

    scheme: str
    weight_writes: Traffic
    dynamic_writes: Traffic
    input_reads: Traffic
    output_writes: Traffic
    buffer_reads: Traffic
    buffer_writes: Traffic
    description: str

    ARRAY_FIELDS = ("weight_writes", "dynamic_writes", "input_reads", "output_writes")
    BUFFER_FIELDS = ("buffer_reads", "buffer_writes")

    def array_bits(self) -> int:
        return sum(getattr(self, f).bits for f in self.ARRAY_FIELDS)

    def total_bits(self) -> int:
        return self.array_bits() + sum(getattr(self, f).bits for f in self.BUFFER_FIELDS)

    def as_dict(self) -> dict:
        out = {f: getattr(self, f).as_dict() for f in self.ARRAY_FIELDS + self.BUFFER_FIELDS}
        out["scheme"] = self.scheme
        out["array_bits"] = self.array_bits()
        out["total_bits"] = self.total_bits()
        out["description"] = self.description
        return out


BASELINE_MODEL = (
    "baseline: two arrays store W_Q and W_K (2*d^2 words of W bits, written once); "
    "X is streamed into both arrays (2*N*d words of K bits) producing Q and K, which "
    "are parked in a buffer (2*N*d words written); K^T is then written into a CIM "
    "array (N*d words of W bits per inference, the dynamic write) and Q is streamed "
    "into it (N*d words read from the buffer and driven into the array); the N^2 "
    "scores are written out (output_bits each)."
)

PROPOSED_MODEL = (
    "proposed: W_QK is written once (d^2 words of W bits); X is loaded into the "
    "input buffer once (N*d words of K bits, counted as input_reads); no array "
    "is written at run time; for every token pair and weight tile the buffer "
    "drives the K bit planes of both token segments (K*(rows+cols) bits); the N^2 "
    "scores are written out (output_bits each)."
)


def _tiles(d: int, size: int) -> list[int]:
    return [min(size, d - s) for s in range(0, d, size)] if d else []


def baseline_trace(n: int, d: int, k_bits: int, w_bits: int, output_bits: int = 32) -> BaselineTrace:
    if n < 0 or d < 1 or k_bits < 1 or w_bits < 1:
        raise ValueError("dimensions must be positive (n may be zero)")
    nd = n * d
    return BaselineTrace(
        scheme="baseline",
        weight_writes=Traffic(2 * d * d, 2 * d * d * w_bits),
        dynamic_writes=Traffic(nd, nd * w_bits),
        input_reads=Traffic(3 * nd, 3 * nd * k_bits),
        output_writes=Traffic(n * n, n * n * output_bits),
        buffer_reads=Traffic(2 * nd, 2 * nd * k_bits),
        buffer_writes=Traffic(2 * nd, 2 * nd * k_bits),
        description=BASELINE_MODEL,
    )


def proposed_trace(
    n: int,
    d: int,
    k_bits: int,
    w_bits: int,
    output_bits: int = 32,
    array_rows: int = 64,
    array_cols: int = 64,
) -> BaselineTrace:
    if n < 0 or d < 1 or k_bits < 1 or w_bits < 1:
        raise ValueError("dimensions must be positive (n may be zero)")
    rows, cols = _tiles(d, array_rows), _tiles(d, array_cols)
    # sum over tile pairs of (segment rows + segment cols)
    per_pair = sum(r + c for r in rows for c in cols)
    plane_bits = n * n * k_bits * per_pair
    return BaselineTrace(
        scheme="proposed",
        weight_writes=Traffic(d * d, d * d * w_bits),
        dynamic_writes=Traffic(0, 0),
        input_reads=Traffic(n * d, n * d * k_bits),
        output_writes=Traffic(n * n, n * n * output_bits),
        buffer_reads=Traffic(2 * n * n * k_bits * len(rows) * len(cols), plane_bits),
        buffer_writes=Traffic(n * d, n * d * k_bits),
        description=PROPOSED_MODEL,
    )


def baseline_ops(n: int, d: int, k_bits: int) -> int:
    """Operation count of the baseline on a bit-serial CIM, in the engine's units.

    Each K-bit by stored-weight MAC takes K gated accumulations (1 multiply +
    1 add each); projections cost 2*N*d^2 MACs and Q.K^T another N^2*d.
    Per-plane shift-adds add K per output element of each stage.
    """
    macs = 2 * n * d * d + n * n * d
    outputs = 2 * n * d + n * n
    return 2 * k_bits * macs + k_bits * outputs


def ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def tile_count(d: int, array_rows: int, array_cols: int) -> int:
    return ceil_div(d, array_rows) * ceil_div(d, array_cols)


__all__ = [
    "naive_matmul",
    "oracle_scores",
    "oracle_bilinear",
    "Traffic",
    "BaselineTrace",
    "baseline_trace",
    "proposed_trace",
    "baseline_ops",
    "tile_count",
]
