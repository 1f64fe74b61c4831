"""
Cost accounting: event counters -> operations, latency, energy, efficiency.

Operation convention: one addition or one multiplication is one op.  A gated
weight accumulation in the array is a multiply plus an add (2 ops); every
near-memory shift-add is 1 op.  Energy is ``total_ops * e_op`` plus any
fine-grained per-event prices.

The analytic half of this module (``analytic_counts``,
``estimate_workload_energy``) predicts the same counters from per-plane
popcount marginals or from an aggregate bit-sparsity rate without running
the bank model.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from .config import EnergyCoefficients, MacroConfig, SkipMode
from .fixedpoint import plane_stack

# Reference figures of the 65 nm silicon; printed beside simulated numbers,
# never used as pass/fail constants.
REFERENCE_FIGURES = {
    "memory_access_reduction_vs_baseline": 6.9,
    "energy_reduction_vs_baseline": 4.9,
    "peak_ops_per_s": 42.27e9,
    "power_w": 1.24e-3,
    "efficiency_ops_per_j": 34.09e12,
    "area_mm2": 0.35,
    "area_efficiency_ops_per_s_mm2": 120.77e9,
    "scaled_28nm_power_w": 0.26e-3,
    "scaled_28nm_area_mm2": 0.064,
    "scaled_28nm_efficiency_ops_per_j": 161.5e12,
    "cpu_energy_ratio_image_recognition": 25.2,
    "gpu_energy_ratio_image_recognition": 12.9,
    "cpu_energy_ratio_segmentation": 26.8,
    "gpu_energy_ratio_segmentation": 13.3,
    "skip_reduction_lower_bound": 0.55,
}


@dataclass
class EventCounts:
    cycles: float = 0
    skipped_cycles: float = 0
    wordline_activations: float = 0
    bitline_reads: float = 0
    adder_ops: float = 0
    weight_bit_writes: float = 0
    near_memory_ops: float = 0
    buffer_bit_reads: float = 0

    @property
    def mac_ops(self):
        return 2 * self.adder_ops

    @property
    def total_ops(self):
        return self.mac_ops + self.near_memory_ops

    def scaled(self, factor) -> "EventCounts":
        return EventCounts(**{k: v * factor for k, v in asdict(self).items()})

    def as_dict(self) -> dict:
        return {k: _num(v) for k, v in asdict(self).items()}


def _num(v):
    if isinstance(v, (int, np.integer)):
        return int(v)
    f = float(v)
    return int(f) if f.is_integer() and abs(f) < 2**53 else f


@dataclass(frozen=True)
class CostReport:
    total_ops: float
    mac_ops: float
    near_memory_ops: float
    cycles: float
    skipped_cycles: float
    latency_s: float
    energy_j: float
    power_w: float
    throughput_ops_per_s: float
    efficiency_ops_per_j: float
    ops_per_cycle: float
    counters: dict
    energy_breakdown_j: dict

    def as_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = v if isinstance(v, dict) else _num(v)
        return out


def _energy_breakdown(c: EventCounts, coeff: EnergyCoefficients) -> dict:
    return {
        "array_ops": c.mac_ops * coeff.e_op,
        "near_memory_ops": c.near_memory_ops * coeff.e_op,
        "wordline": c.wordline_activations * coeff.e_wordline,
        "bitline_read": c.bitline_reads * coeff.e_bitline_read,
        "adder": c.adder_ops * coeff.e_adder,
        "buffer": c.buffer_bit_reads * coeff.e_buffer_access,
    }


def price(counts: EventCounts, cfg: MacroConfig | None = None, coeff: EnergyCoefficients | None = None) -> CostReport:
    """Turn counters from a finished run (or an analytic estimate) into a CostReport."""
    cfg = cfg or MacroConfig()
    coeff = coeff or cfg.energy
    breakdown = _energy_breakdown(counts, coeff)
    energy = sum(breakdown.values())
    ops = counts.total_ops
    latency = counts.cycles / cfg.clock_hz
    throughput = ops / latency if latency > 0 else 0.0
    power = energy / latency if latency > 0 else 0.0
    efficiency = ops / energy if energy > 0 else 0.0
    return CostReport(
        total_ops=ops,
        mac_ops=counts.mac_ops,
        near_memory_ops=counts.near_memory_ops,
        cycles=counts.cycles,
        skipped_cycles=counts.skipped_cycles,
        latency_s=latency,
        energy_j=energy,
        power_w=power,
        throughput_ops_per_s=throughput,
        efficiency_ops_per_j=efficiency,
        ops_per_cycle=ops / counts.cycles if counts.cycles else 0.0,
        counters=counts.as_dict(),
        energy_breakdown_j={k: float(v) for k, v in breakdown.items()},
    )


# ---------------------------------------------------------------------------
# process-node scaling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NodeScalingParams:
    l_from: float = 65.0
    l_to: float = 65.0
    v_from: float = 1.0
    v_to: float = 1.0
    f_from: float = 100e6
    f_to: float = 100e6

    def __post_init__(self) -> None:
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ValueError(f"{f.name} must be positive")

    def inverse(self) -> "NodeScalingParams":
        return NodeScalingParams(self.l_to, self.l_from, self.v_to, self.v_from, self.f_to, self.f_from)


def scale_power(power_w: float, p: NodeScalingParams) -> float:
    """P * (L_to/L_from) * (V_to/V_from)^2 * (f_to/f_from)."""
    return power_w * (p.l_to / p.l_from) * (p.v_to / p.v_from) ** 2 * (p.f_to / p.f_from)


def scale_area(area: float, p: NodeScalingParams) -> float:
    return area * (p.l_to / p.l_from) ** 2


# ---------------------------------------------------------------------------
# analytic counter model
# ---------------------------------------------------------------------------


def segments(d: int, size: int) -> list[int]:
    return [min(size, d - s) for s in range(0, d, size)]


@dataclass(frozen=True)
class BitProfile:
    """Per-token, per-segment, per-plane popcounts of a token matrix.

    ``row_pc[n, t, k]`` counts set bits of plane k in token n restricted to
    the t-th row-tile segment (word-line side); ``col_pc`` likewise for the
    column-tile segmentation.
    """

    n: int
    d: int
    bits: int
    row_pc: np.ndarray
    col_pc: np.ndarray
    nonzero_tokens: int


def bit_profile(x, cfg: MacroConfig | None = None) -> BitProfile:
    cfg = cfg or MacroConfig()
    data = np.asarray(getattr(x, "data", x), dtype=np.int64)
    bits = getattr(x, "bit_width", cfg.input_bits)
    n, d = data.shape
    planes = plane_stack(data, bits)  # (K, n, d)

    def per_segment(size):
        segs = [planes[:, :, s:s + size].sum(axis=2) for s in range(0, d, size)]
        return np.stack(segs, axis=0).transpose(2, 0, 1)  # (n, t, K)

    return BitProfile(
        n=n,
        d=d,
        bits=bits,
        row_pc=per_segment(cfg.array_rows),
        col_pc=per_segment(cfg.array_cols),
        nonzero_tokens=int(np.any(data != 0, axis=1).sum()),
    )


def analytic_counts(
    n: int,
    d: int,
    cfg: MacroConfig | None = None,
    sparsity: float = 0.0,
    profile: BitProfile | None = None,
) -> EventCounts:
    """Predict one head's counters without simulating.

    With ``profile`` the prediction is exact: every counter factorizes into
    products of per-segment marginals over token rows and token columns.
    Otherwise each input bit is taken to be zero with probability
    ``sparsity`` independently, giving expected counts.
    """
    cfg = cfg or MacroConfig()
    if not 0.0 <= sparsity <= 1.0:
        raise ValueError(f"sparsity must be in [0, 1], got {sparsity}")
    bits = profile.bits if profile is not None else cfg.input_bits
    if profile is not None:
        n, d = profile.n, profile.d
    rlen = np.array(segments(d, cfg.array_rows), dtype=np.float64)
    clen = np.array(segments(d, cfg.array_cols), dtype=np.float64)

    if profile is not None:
        # per segment: tokens with a non-empty plane, summed over planes; and summed popcounts
        nz_r = (profile.row_pc > 0).sum(axis=(0, 2)).astype(object)
        nz_c = (profile.col_pc > 0).sum(axis=(0, 2)).astype(object)
        pop_r = profile.row_pc.sum(axis=(0, 2)).astype(object)
        pop_c = profile.col_pc.sum(axis=(0, 2)).astype(object)
        active_tokens = profile.nonzero_tokens
        rlen = rlen.astype(np.int64).astype(object)
        clen = clen.astype(np.int64).astype(object)
    else:
        s = float(sparsity)
        nz_r = n * bits * (1.0 - s ** rlen)
        nz_c = n * bits * (1.0 - s ** clen)
        pop_r = n * bits * rlen * (1.0 - s)
        pop_c = n * bits * clen * (1.0 - s)
        active_tokens = n * (1.0 - s ** (d * bits))

    total = n * n * bits * bits * len(rlen) * len(clen)
    mode = cfg.skip_mode
    if mode is SkipMode.NONE:
        cycles = total
        wordlines = n * n * bits * bits * sum(rlen) * len(clen)
        gated = n * n * bits * bits * sum(rlen) * sum(clen)
        active_pairs = n * n
    else:
        cycles = sum(nz_r) * sum(nz_c)
        active_pairs = active_tokens * active_tokens
        if mode is SkipMode.PLANE:
            wordlines = sum(r * a for r, a in zip(rlen, nz_r)) * sum(nz_c)
            gated = sum(r * a for r, a in zip(rlen, nz_r)) * sum(c * b for c, b in zip(clen, nz_c))
        else:
            wordlines = sum(pop_r) * sum(nz_c)
            gated = sum(pop_r) * sum(pop_c)

    return EventCounts(
        cycles=cycles,
        skipped_cycles=total - cycles,
        wordline_activations=wordlines,
        bitline_reads=gated,
        adder_ops=gated,
        weight_bit_writes=d * d * cfg.weight_bits,
        near_memory_ops=cycles + 3 * active_pairs,
        buffer_bit_reads=n * n * bits * (sum(rlen) * len(clen) + sum(clen) * len(rlen)),
    )


@dataclass(frozen=True)
class Workload:
    n: int
    d: int
    heads: int = 1
    layers: int = 1
    sparsity: float = 0.0
    name: str = ""
    profile: BitProfile | None = None

    def __post_init__(self) -> None:
        if min(self.n, self.d, self.heads, self.layers) < 1:
            raise ValueError("workload dimensions must be positive")
        if not 0.0 <= self.sparsity <= 1.0:
            raise ValueError(f"sparsity must be in [0, 1], got {self.sparsity}")


def estimate_workload_energy(
    workloads, coeff: EnergyCoefficients | None = None, cfg: MacroConfig | None = None
) -> list[dict]:
    """Energy table for attention-score workloads: ops x per-op energy (+ events).

    Weight loading is a one-time cost per head and layer and is reported
    separately from the per-inference compute energy.
    """
    cfg = cfg or MacroConfig()
    coeff = coeff or cfg.energy
    rows = []
    for w in workloads:
        per_head = analytic_counts(w.n, w.d, cfg, w.sparsity, w.profile)
        counts = per_head.scaled(w.heads * w.layers)
        report = price(counts, cfg, coeff)
        rows.append(
            {
                "name": w.name,
                "n": w.n,
                "d": w.d,
                "heads": w.heads,
                "layers": w.layers,
                "sparsity": w.sparsity,
                "total_ops": report.total_ops,
                "cycles": report.cycles,
                "latency_s": report.latency_s,
                "energy_j": report.energy_j,
                "compute_energy_j": report.energy_breakdown_j["array_ops"] + report.energy_breakdown_j["near_memory_ops"],
            }
        )
    return rows


def measured_sparsity(x) -> float:
    """Fraction of zero bits over all K bit planes of a token matrix."""
    data = np.asarray(getattr(x, "data", x), dtype=np.int64)
    bits = getattr(x, "bit_width", 8)
    planes = plane_stack(data, bits)
    return 1.0 - float(planes.mean()) if planes.size else 0.0
