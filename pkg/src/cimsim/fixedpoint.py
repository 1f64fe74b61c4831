"""
Signed fixed-width integer matrices and two's-complement bit slicing.

Every matrix that flows through the simulator (token matrix X, projection
weights, fused weights in requantized form) is a FixedPointMatrix: a
row-major int64 array plus the declared bit width K.  Values must lie in
[-2^(K-1), 2^(K-1) - 1].

Accumulation bound: with K <= 16 and vector length d <= 1024 the worst-case
bilinear form x.W.y over K-bit x, y and K-bit W is d^2 * 2^(3K-3) = 2^65 in
the extreme corner, so the engine checks the concrete bound against int64
before computing rather than relying on the type limit here.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MIN_BITS = 2
MAX_BITS = 16

BIN_MAGIC = b"CIMX"
_HEADER = struct.Struct("<4sIII")


def _check_bits(bits: int) -> None:
    if not MIN_BITS <= bits <= MAX_BITS:
        raise ValueError(f"bit width must be in {MIN_BITS}..{MAX_BITS}, got {bits}")


def int_range(bits: int) -> tuple[int, int]:
    """Inclusive (lo, hi) of a signed two's-complement word of ``bits`` bits."""
    return -(1 << (bits - 1)), (1 << (bits - 1)) - 1


def round_half_away(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    return np.sign(values) * np.floor(np.abs(values) + 0.5)


@dataclass(frozen=True)
class FixedPointMatrix:
    """Immutable signed integer matrix with a declared two's-complement width."""

    data: np.ndarray
    bit_width: int

    def __post_init__(self) -> None:
        _check_bits(self.bit_width)
        arr = np.array(self.data, dtype=np.int64, copy=True)
        if arr.ndim == 1:
            arr = arr.reshape(1, -1)
        if arr.ndim != 2:
            raise ValueError(f"matrix must be 2-D, got shape {arr.shape}")
        lo, hi = int_range(self.bit_width)
        bad = np.argwhere((arr < lo) | (arr > hi))
        if bad.size:
            r, c = bad[0]
            raise ValueError(
                f"element ({r}, {c}) = {arr[r, c]} outside {self.bit_width}-bit range [{lo}, {hi}]"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def row(self, i: int) -> np.ndarray:
        return self.data[i]

    def tolist(self) -> list[list[int]]:
        return [[int(v) for v in r] for r in self.data]


@dataclass(frozen=True)
class BitPlane:
    """One bit position across a vector: ``bits[d]`` is bit ``plane_index`` of element d."""

    plane_index: int
    is_sign: bool
    bits: np.ndarray

    def __post_init__(self) -> None:
        bits = np.array(self.bits, dtype=np.int64, copy=True).reshape(-1)
        if np.any((bits != 0) & (bits != 1)):
            raise ValueError("bit plane may only contain 0/1")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @property
    def popcount(self) -> int:
        return int(self.bits.sum())

    def __len__(self) -> int:
        return self.bits.shape[0]


def quantize(values, bits: int, scale: float) -> FixedPointMatrix:
    """Map a real matrix onto ``bits``-bit integers: clamp(round(v / scale)).

    Rounding is half away from zero.  Non-finite inputs are rejected with the
    offending coordinates.
    """
    _check_bits(bits)
    if not scale > 0:
        raise ValueError(f"scale must be positive, got {scale}")
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    bad = np.argwhere(~np.isfinite(arr))
    if bad.size:
        r, c = bad[0]
        raise ValueError(f"non-finite value {arr[r, c]} at ({r}, {c})")
    lo, hi = int_range(bits)
    q = np.clip(round_half_away(arr / scale), lo, hi).astype(np.int64)
    return FixedPointMatrix(q, bits)


def bit_slice(x: int, k: int, bits: int) -> int:
    """Bit ``k`` of the ``bits``-wide two's-complement encoding of ``x``."""
    if not 0 <= k < bits:
        raise IndexError(f"bit index {k} out of range for {bits}-bit value")
    lo, hi = int_range(bits)
    if not lo <= x <= hi:
        raise ValueError(f"{x} outside {bits}-bit range")
    return ((x + (1 << bits)) % (1 << bits)) >> k & 1


def extract_plane(v, k: int, bits: int) -> BitPlane:
    if not 0 <= k < bits:
        raise IndexError(f"bit index {k} out of range for {bits}-bit value")
    return BitPlane(k, k == bits - 1, [bit_slice(int(x), k, bits) for x in np.asarray(v).reshape(-1)])


def reassemble(planes: list[BitPlane], bits: int) -> np.ndarray:
    """Inverse of bit slicing: -2^(K-1)*sign_plane + sum 2^k * plane_k."""
    out = None
    for p in planes:
        weight = -(1 << (bits - 1)) if p.is_sign else 1 << p.plane_index
        term = weight * p.bits
        out = term if out is None else out + term
    return out


def plane_stack(m: np.ndarray, bits: int) -> np.ndarray:
    """All bit planes of an integer array at once, shape (bits, *m.shape).

    Arithmetic right shift on int64 reproduces the K-bit two's-complement
    bits for every in-range value, including the sign plane.
    """
    m = np.asarray(m, dtype=np.int64)
    shifts = np.arange(bits, dtype=np.int64).reshape((bits,) + (1,) * m.ndim)
    return (m[np.newaxis] >> shifts) & 1


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------


def read_csv(path, bits: int) -> FixedPointMatrix:
    try:
        with open(path, newline="") as fh:
            rows = [[int(tok) for tok in row] for row in csv.reader(fh) if row]
    except (csv.Error, UnicodeDecodeError) as exc:
        raise ValueError(f"{path}: not a CSV integer matrix ({exc})") from exc
    if not rows:
        raise ValueError(f"{path}: empty matrix")
    width = len(rows[0])
    for i, r in enumerate(rows):
        if len(r) != width:
            raise ValueError(f"{path}: row {i} has {len(r)} columns, expected {width}")
    return FixedPointMatrix(np.array(rows, dtype=np.int64), bits)


def write_csv(path, data) -> None:
    arr = np.asarray(data)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for r in arr:
            w.writerow([int(v) for v in r])


def _payload_dtype(bits: int) -> str:
    # int32 payload for widths that fit, int64 otherwise (exact fused weights, scores)
    return "<i4" if bits <= 32 else "<i8"


def write_bin(path, data, bits: int) -> None:
    arr = np.asarray(data, dtype=np.int64)
    rows, cols = arr.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(BIN_MAGIC, rows, cols, bits))
        fh.write(arr.astype(_payload_dtype(bits)).tobytes())


def read_bin_raw(path) -> tuple[np.ndarray, int]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, rows, cols, bits = _HEADER.unpack_from(raw)
    if magic != BIN_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    dtype = np.dtype(_payload_dtype(bits))
    expected = rows * cols * dtype.itemsize
    body = raw[_HEADER.size:]
    if len(body) != expected:
        raise ValueError(f"{path}: payload is {len(body)} bytes, expected {expected}")
    return np.frombuffer(body, dtype=dtype).astype(np.int64).reshape(rows, cols), bits


def read_bin(path) -> FixedPointMatrix:
    data, bits = read_bin_raw(path)
    return FixedPointMatrix(data, bits)


def load_matrix(path, bits: int | None = None) -> FixedPointMatrix:
    """Load CSV (needs ``bits``) or CIMX binary (width from header)."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == BIN_MAGIC:
        m = read_bin(path)
        if bits is not None and bits != m.bit_width:
            m = FixedPointMatrix(m.data, bits)
        return m
    if bits is None:
        raise ValueError(f"{path}: CSV input needs an explicit bit width")
    return read_csv(path, bits)
