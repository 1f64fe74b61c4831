"""Bit-exact simulator and cost model of a weight-stationary digital CIM macro for attention scores."""

from .accumulators import GroupAccumulators, combine_groups
from .cim_bank import BankCounters, CimBank, process_pair
from .config import EnergyCoefficients, MacroConfig, SkipMode, load_config
from .cost_model import (
    CostReport,
    EventCounts,
    NodeScalingParams,
    Workload,
    analytic_counts,
    bit_profile,
    estimate_workload_energy,
    price,
    scale_area,
    scale_power,
)
from .fixedpoint import BitPlane, FixedPointMatrix, bit_slice, extract_plane, quantize
from .fusion import FusedWeights, WeightMode, fuse, requantize
from .near_memory import NearMemoryEngine, ScoreMatrix, attention_scores, score_element
from .oracle import baseline_trace, oracle_scores, proposed_trace

__version__ = "0.1.0"
