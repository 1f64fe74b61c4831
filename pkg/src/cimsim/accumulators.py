"""Four-group partial sums of one score element and their signed combination."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def group_of(i_bit: int, j_bit: int, bits: int) -> int:
    """Group index 1..4 for a plane pair: 1 sign*sign, 2 sign*mag, 3 mag*sign, 4 mag*mag."""
    si, sj = i_bit == bits - 1, j_bit == bits - 1
    if si and sj:
        return 1
    if si:
        return 2
    if sj:
        return 3
    return 4


def group_shift(i_bit: int, j_bit: int, bits: int) -> int:
    """Shift exponent applied at accumulation time.

    g1 is held unshifted (its 2^(2K-2) is applied in ``combine_groups``); the
    cross groups carry K-1+j* or K-1+i*, the magnitude group i*+j*.
    """
    g = group_of(i_bit, j_bit, bits)
    if g == 1:
        return 0
    if g == 2:
        return bits - 1 + j_bit
    if g == 3:
        return bits - 1 + i_bit
    return i_bit + j_bit


@dataclass
class GroupAccumulators:
    bits: int
    g1: int = 0
    g2: int = 0
    g3: int = 0
    g4: int = 0
    # raw bit-plane MAC per (i*, j*), kept only by the scalar path
    raw: dict = field(default_factory=dict)

    def add(self, i_bit: int, j_bit: int, value: int) -> None:
        value = int(value)
        self.raw[(i_bit, j_bit)] = self.raw.get((i_bit, j_bit), 0) + value
        shifted = value << group_shift(i_bit, j_bit, self.bits)
        g = group_of(i_bit, j_bit, self.bits)
        if g == 1:
            self.g1 += shifted
        elif g == 2:
            self.g2 += shifted
        elif g == 3:
            self.g3 += shifted
        else:
            self.g4 += shifted

    def __iadd__(self, other: "GroupAccumulators") -> "GroupAccumulators":
        if other.bits != self.bits:
            raise ValueError("cannot merge accumulators of different bit widths")
        self.g1 += other.g1
        self.g2 += other.g2
        self.g3 += other.g3
        self.g4 += other.g4
        for k, v in other.raw.items():
            self.raw[k] = self.raw.get(k, 0) + v
        return self


def combine_groups(acc: GroupAccumulators, bits: int):
    """2^(2K-2)*g1 - g2 - g3 + g4.  Works elementwise on array-valued groups too."""
    if acc.bits != bits:
        raise ValueError(f"accumulators built for K={acc.bits}, combined with K={bits}")
    return (acc.g1 << (2 * bits - 2)) - acc.g2 - acc.g3 + acc.g4


def group_weights(bits: int) -> dict[int, np.ndarray]:
    """Per-group K x K shift-weight masks for the batched path; entry [i*, j*] is 2^shift or 0."""
    masks = {g: np.zeros((bits, bits), dtype=np.int64) for g in (1, 2, 3, 4)}
    for i in range(bits):
        for j in range(bits):
            masks[group_of(i, j, bits)][i, j] = 1 << group_shift(i, j, bits)
    return masks
