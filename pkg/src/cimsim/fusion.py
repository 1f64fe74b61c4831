"""Offline fusion of the query/key projections into one stationary weight matrix."""

from __future__ import annotations

import csv
import enum
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fixedpoint import (
    FixedPointMatrix,
    _check_bits,
    int_range,
    read_bin_raw,
    round_half_away,
    write_bin,
    write_csv,
)


class WeightMode(str, enum.Enum):
    EXACT = "exact"
    REQUANTIZED = "requantized"


@dataclass(frozen=True)
class FusedWeights:
    """W_QK = W_Q . W_K^T, either exact (wide ints) or narrowed to ``weight_bits``.

    ``scale`` maps a stored value back to the exact domain
    (exact ~= stored * scale); it is 1.0 in exact mode.
    """

    values: np.ndarray
    mode: WeightMode = WeightMode.EXACT
    weight_bits: int | None = None
    scale: float = 1.0

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=np.int64, copy=True)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"fused weights must be square, got shape {v.shape}")
        mode = WeightMode(self.mode)
        if mode is WeightMode.REQUANTIZED:
            if self.weight_bits is None:
                raise ValueError("requantized weights need weight_bits")
            lo, hi = int_range(self.weight_bits)
            if v.size and (v.min() < lo or v.max() > hi):
                raise ValueError(f"stored weights exceed {self.weight_bits}-bit range")
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "mode", mode)

    @property
    def d(self) -> int:
        return self.values.shape[0]

    @property
    def max_abs(self) -> int:
        return int(np.abs(self.values).max()) if self.values.size else 0

    def storage_bits(self) -> int:
        """Smallest two's-complement width holding every stored value."""
        if self.weight_bits is not None:
            return self.weight_bits
        return max(2, int(self.max_abs).bit_length() + 1)

    def dequantized(self) -> np.ndarray:
        return self.values.astype(np.float64) * self.scale

    def metadata(self) -> dict:
        return {
            "d": self.d,
            "mode": self.mode.value,
            "weight_bits": self.weight_bits,
            "scale": self.scale,
        }


def fuse(w_q: FixedPointMatrix, w_k: FixedPointMatrix) -> FusedWeights:
    """Exact integer W_Q . W_K^T."""
    if w_q.rows != w_q.cols or w_k.rows != w_k.cols or w_q.shape != w_k.shape:
        raise ValueError(
            f"W_Q {w_q.rows}x{w_q.cols} and W_K {w_k.rows}x{w_k.cols} must be square and equal"
        )
    if w_q.bit_width != w_k.bit_width:
        raise ValueError(f"bit widths differ: W_Q {w_q.bit_width}, W_K {w_k.bit_width}")
    # |entry| <= d * max|wq| * max|wk|; at 16-bit widths that is d * 2^30
    bound = w_q.rows * int(np.abs(w_q.data).max(initial=0)) * int(np.abs(w_k.data).max(initial=0))
    if bound >= 1 << 63:
        raise OverflowError(f"fused weights may exceed int64 (bound {bound})")
    return FusedWeights(w_q.data @ w_k.data.T, WeightMode.EXACT)


def requantize(fw: FusedWeights, bits: int) -> FusedWeights:
    """Symmetric per-matrix max-abs narrowing to ``bits`` bits."""
    if fw.mode is not WeightMode.EXACT:
        raise ValueError("requantize expects exact fused weights")
    _check_bits(bits)
    peak = fw.max_abs
    scale = peak / ((1 << (bits - 1)) - 1) if peak else 1.0
    lo, hi = int_range(bits)
    stored = np.clip(round_half_away(fw.values / scale), lo, hi).astype(np.int64)
    return FusedWeights(stored, WeightMode.REQUANTIZED, bits, scale)


# ---------------------------------------------------------------------------
# persistence: matrix file + JSON sidecar
# ---------------------------------------------------------------------------


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def save_fused(fw: FusedWeights, path, fmt: str = "bin") -> Path:
    path = Path(path)
    if fmt == "bin":
        write_bin(path, fw.values, fw.storage_bits())
    elif fmt == "csv":
        write_csv(path, fw.values)
    elif fmt == "json":
        path.write_text(json.dumps(fw.values.tolist()) + "\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")
    meta = dict(fw.metadata(), format=fmt)
    sidecar_path(path).write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    return path


def load_fused(path) -> FusedWeights:
    path = Path(path)
    side = sidecar_path(path)
    meta = json.loads(side.read_text()) if side.exists() else {"mode": "exact"}
    fmt = meta.get("format")
    if fmt == "json":
        values = np.array(json.loads(path.read_text()), dtype=np.int64)
    elif fmt == "csv":
        # widest range; the exact-mode width is implied by the data
        values = _read_csv_wide(path)
    else:
        try:
            values, _ = read_bin_raw(path)
        except ValueError:
            values = _read_csv_wide(path)
    return FusedWeights(
        values,
        WeightMode(meta.get("mode", "exact")),
        meta.get("weight_bits"),
        float(meta.get("scale", 1.0)),
    )


def _read_csv_wide(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [[int(t) for t in r] for r in csv.reader(fh) if r]
    return np.array(rows, dtype=np.int64)

