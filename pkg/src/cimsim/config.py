"""
Macro configuration.

Defaults describe the 65 nm reference macro: a 64x64 array of 8-bit weights
clocked at 100 MHz from a 1.0 V supply, occupying 0.35 mm^2 and drawing
1.24 mW.  Energy per operation defaults to 29.33 fJ, the reciprocal of the
reported 34.09 TOPS/W.

Config files are flat INI (``key = value`` under sections); any key left out
keeps its default.  See ``configs/default.ini`` for an annotated copy.
"""

from __future__ import annotations

import configparser
import enum
from dataclasses import dataclass, field, fields, replace
from pathlib import Path


class SkipMode(str, enum.Enum):
    NONE = "none"
    PLANE = "plane"
    ELEMENT = "element"

    @classmethod
    def parse(cls, text: str) -> "SkipMode":
        aliases = {"planeskip": "plane", "elementskip": "element", "off": "none"}
        t = text.strip().lower()
        return cls(aliases.get(t, t))


@dataclass(frozen=True)
class EnergyCoefficients:
    """Per-event prices in joules.

    ``e_op`` prices the aggregate operation count; the fine-grained prices
    are added on top and default to zero (folded into ``e_op``).
    """

    e_op: float = 29.33e-15
    e_wordline: float = 0.0
    e_bitline_read: float = 0.0
    e_adder: float = 0.0
    e_buffer_access: float = 0.0  # per bit moved through the input buffer

    def __post_init__(self) -> None:
        for f in fields(self):
            v = getattr(self, f.name)
            if not v >= 0:
                raise ValueError(f"{f.name} must be >= 0, got {v}")

    @property
    def fine_grained(self) -> bool:
        return any(getattr(self, n) > 0 for n in ("e_wordline", "e_bitline_read", "e_adder", "e_buffer_access"))


@dataclass(frozen=True)
class MacroConfig:
    array_rows: int = 64
    array_cols: int = 64
    weight_bits: int = 8
    input_bits: int = 8
    clock_hz: float = 100e6
    skip_mode: SkipMode = SkipMode.ELEMENT
    energy: EnergyCoefficients = field(default_factory=EnergyCoefficients)
    # width of one score word written back; not given for the reference macro
    output_bits: int = 32
    # reference operating point, used only for reporting/scaling
    node_nm: float = 65.0
    supply_v: float = 1.0
    area_mm2: float = 0.35
    power_w: float = 1.24e-3
    peak_ops_per_s: float = 42.27e9

    def __post_init__(self) -> None:
        object.__setattr__(self, "skip_mode", SkipMode(self.skip_mode))
        if self.array_rows < 1 or self.array_cols < 1:
            raise ValueError("array dimensions must be positive")
        for name in ("weight_bits", "input_bits"):
            if not 2 <= getattr(self, name) <= 16:
                raise ValueError(f"{name} must be in 2..16")
        if not self.clock_hz > 0:
            raise ValueError("clock_hz must be positive")

    def with_overrides(self, **kw) -> "MacroConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        energy_keys = {f.name for f in fields(EnergyCoefficients)}
        ekw = {k: kw.pop(k) for k in list(kw) if k in energy_keys}
        cfg = replace(self, **kw)
        if ekw:
            cfg = replace(cfg, energy=replace(cfg.energy, **ekw))
        return cfg


_INT_KEYS = {"array_rows", "array_cols", "weight_bits", "input_bits", "output_bits"}


def load_config(path=None) -> MacroConfig:
    """Read an INI config; section names are ignored, keys are MacroConfig/EnergyCoefficients fields."""
    cfg = MacroConfig()
    if path is None:
        return cfg
    path = Path(path)
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    with open(path) as fh:
        parser.read_file(fh)
    known = {f.name for f in fields(MacroConfig)} | {f.name for f in fields(EnergyCoefficients)}
    overrides: dict = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            if key not in known or key == "energy":
                raise ValueError(f"{path}: unknown key [{section}] {key}")
            if key == "skip_mode":
                overrides[key] = SkipMode.parse(raw)
            elif key in _INT_KEYS:
                overrides[key] = int(raw)
            else:
                overrides[key] = float(raw)
    return cfg.with_overrides(**overrides)
