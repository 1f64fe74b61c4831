"""
Functional model of one weight-stationary CIM bank.

The bank holds a tile of fused weights.  One array cycle processes one
(i*, j*) bit-plane pair over the whole tile: input bit a[r] gates word line r,
column bit b[c] gates the contribution of column c, and the accumulator sums
every gated weight.

Event accounting per executed cycle, tile of R x C:

=========== ================= ======================== ===================
skip mode   cycle skipped if  wordline_activations     bitline_reads/adder
=========== ================= ======================== ===================
none        never             R                        R*C
plane       a or b all zero   R                        R*C
element     a or b all zero   popcount(a)              popcount(a)*popcount(b)
=========== ================= ======================== ===================

Only the counters depend on the mode; the MAC value never does.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import NamedTuple

import numpy as np

from .accumulators import GroupAccumulators
from .config import MacroConfig, SkipMode
from .fixedpoint import BitPlane, extract_plane, int_range


@dataclass
class BankCounters:
    cycles: int = 0
    skipped_cycles: int = 0
    wordline_activations: int = 0
    bitline_reads: int = 0
    adder_ops: int = 0
    weight_bit_writes: int = 0

    def __iadd__(self, other: "BankCounters") -> "BankCounters":
        for f in fields(self):
            setattr(self, f.name, getattr(self, f.name) + getattr(other, f.name))
        return self

    def __add__(self, other: "BankCounters") -> "BankCounters":
        out = BankCounters(**asdict(self))
        out += other
        return out

    def as_dict(self) -> dict:
        return {k: int(v) for k, v in asdict(self).items()}


class BlockResult(NamedTuple):
    raw: np.ndarray  # (K, n, K, m) raw MAC per plane pair and token pair
    counters: BankCounters
    executed: np.ndarray  # (n, m) executed plane pairs per token pair


class CimBank:
    """Single-owner bank state: one stationary weight tile plus event counters."""

    def __init__(self, cfg: MacroConfig | None = None):
        self.cfg = cfg or MacroConfig()
        self.tile: np.ndarray | None = None
        self.counters = BankCounters()

    @property
    def loaded(self) -> bool:
        return self.tile is not None

    def load_weights(self, tile) -> "CimBank":
        tile = np.array(getattr(tile, "values", tile), dtype=np.int64)
        if tile.ndim != 2:
            raise ValueError("weight tile must be 2-D")
        r, c = tile.shape
        if r > self.cfg.array_rows or c > self.cfg.array_cols:
            raise ValueError(
                f"tile {r}x{c} exceeds array {self.cfg.array_rows}x{self.cfg.array_cols}"
            )
        tile.setflags(write=False)
        self.tile = tile
        self.counters.weight_bit_writes += r * c * self.cfg.weight_bits
        return self

    def _require(self, rows: int, cols: int) -> None:
        if not self.loaded:
            raise RuntimeError("bank has no weights loaded")
        if (rows, cols) != self.tile.shape:
            raise ValueError(f"plane lengths ({rows}, {cols}) do not match tile {self.tile.shape}")

    def bit_plane_mac(self, a, b) -> int:
        """Sum over r, c of a[r]*b[c]*w[r][c] for 0/1 vectors a and b."""
        a_bits = np.asarray(a.bits if isinstance(a, BitPlane) else a, dtype=np.int64)
        b_bits = np.asarray(b.bits if isinstance(b, BitPlane) else b, dtype=np.int64)
        self._require(a_bits.shape[0], b_bits.shape[0])
        rows, cols = self.tile.shape
        pa, pb = int(a_bits.sum()), int(b_bits.sum())
        mode = self.cfg.skip_mode
        if mode is not SkipMode.NONE and (pa == 0 or pb == 0):
            self.counters.skipped_cycles += 1
            return 0
        self.counters.cycles += 1
        if mode is SkipMode.ELEMENT:
            self.counters.wordline_activations += pa
            self.counters.bitline_reads += pa * pb
            self.counters.adder_ops += pa * pb
        else:
            self.counters.wordline_activations += rows
            self.counters.bitline_reads += rows * cols
            self.counters.adder_ops += rows * cols
        total = 0
        for r in np.flatnonzero(a_bits):
            for c in np.flatnonzero(b_bits):
                total += int(self.tile[r, c])
        return total

    def plane_block(self, a_planes: np.ndarray, b_planes: np.ndarray) -> BlockResult:
        """Batched bit-plane MACs for every (i*, row) x (j*, column-token) combination.

        ``a_planes`` is (K, n, R) and ``b_planes`` (K, m, C), both 0/1.  Pure:
        the returned counters are a delta for the caller to ``absorb`` so that
        blocks may run on worker threads and merge in a fixed order.
        """
        ka, n, rows = a_planes.shape
        kb, m, cols = b_planes.shape
        self._require(rows, cols)
        raw = (a_planes.reshape(ka * n, rows) @ self.tile @ b_planes.reshape(kb * m, cols).T)
        raw = raw.reshape(ka, n, kb, m)
        pa = a_planes.sum(axis=2)  # (K, n)
        pb = b_planes.sum(axis=2)  # (K, m)
        mode = self.cfg.skip_mode
        c = BankCounters()
        # a plane-pair cycle is active iff both planes are non-zero (always, with no skipping);
        # the mask is an outer product, so every counter factorizes
        if mode is SkipMode.NONE:
            act_a = np.ones(pa.shape, dtype=np.int64)
            act_b = np.ones(pb.shape, dtype=np.int64)
        else:
            # skipped cycles contribute nothing: a zero plane already yields a zero partial sum
            act_a = (pa > 0).astype(np.int64)
            act_b = (pb > 0).astype(np.int64)
        c.cycles = int(act_a.sum()) * int(act_b.sum())
        c.skipped_cycles = raw.size - c.cycles
        if mode is SkipMode.ELEMENT:
            c.wordline_activations = int(pa.sum()) * int(act_b.sum())
            gated = int(pa.sum()) * int(pb.sum())
            c.bitline_reads = gated
            c.adder_ops = gated
        else:
            c.wordline_activations = rows * c.cycles
            c.bitline_reads = rows * cols * c.cycles
            c.adder_ops = rows * cols * c.cycles
        return BlockResult(raw, c, np.outer(act_a.sum(axis=0), act_b.sum(axis=0)))

    def absorb(self, delta: BankCounters) -> None:
        self.counters += delta


def process_pair(bank: CimBank, xi, xj, bits: int) -> GroupAccumulators:
    """All K x K bit-plane MACs of one token pair, routed into the four groups."""
    xi = np.asarray(xi, dtype=np.int64).reshape(-1)
    xj = np.asarray(xj, dtype=np.int64).reshape(-1)
    lo, hi = int_range(bits)
    for v in (xi, xj):
        if v.size and (v.min() < lo or v.max() > hi):
            raise ValueError(f"input outside {bits}-bit range")
    a_planes = [extract_plane(xi, k, bits) for k in range(bits)]
    b_planes = [extract_plane(xj, k, bits) for k in range(bits)]
    acc = GroupAccumulators(bits)
    for i_bit, a in enumerate(a_planes):
        for j_bit, b in enumerate(b_planes):
            acc.add(i_bit, j_bit, bank.bit_plane_mac(a, b))
    return acc
