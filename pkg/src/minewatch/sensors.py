"""Synthetic ambient readings: mean-reverting bounded random walks per
(node, kind), quantized to each channel's fixed-point grid, with scripted
hazard ramps layered on top.

Storage units: temperature in degrees C on a 0.5 grid, light in raw
0..65535 counts, methane/oxygen as integer %vol*100, CO as integer ppm.
The walk itself runs in engineering units (%vol for gases).
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass, field
from enum import Enum

LIGHT_MAX = 65535


class SensorKind(Enum):
    TEMPERATURE = "temperature"
    LIGHT = "light"
    METHANE = "methane"
    CARBON_MONOXIDE = "co"
    OXYGEN = "oxygen"


GAS_KINDS = {SensorKind.METHANE, SensorKind.CARBON_MONOXIDE, SensorKind.OXYGEN}
PERCENT_VOL_KINDS = {SensorKind.METHANE, SensorKind.OXYGEN}


@dataclass(frozen=True)
class Reading:
    node: int
    kind: SensorKind
    value: float | int  # fixed-point storage value, see module docstring
    t: int  # simulation time, ms
    seq: int  # per-(node, kind) counter, wraps at 2**16


@dataclass(frozen=True)
class ChannelModel:
    baseline: float
    walk_sigma: float
    min_value: float
    max_value: float


@dataclass(frozen=True)
class SensorModel:
    channels: dict[SensorKind, ChannelModel]
    kappa: float = 0.1  # mean-reversion strength, [0, 1]

    @staticmethod
    def default() -> "SensorModel":
        return SensorModel(channels={
            SensorKind.TEMPERATURE: ChannelModel(23.0, 0.2, -20.0, 80.0),
            SensorKind.LIGHT: ChannelModel(12000.0, 150.0, 0.0, LIGHT_MAX),
            SensorKind.METHANE: ChannelModel(0.05, 0.005, 0.0, 100.0),
            SensorKind.CARBON_MONOXIDE: ChannelModel(4.0, 0.5, 0.0, 10000.0),
            SensorKind.OXYGEN: ChannelModel(20.9, 0.02, 0.0, 100.0),
        })


@dataclass(frozen=True)
class HazardEvent:
    kind: SensorKind
    node: int
    start_ms: int
    end_ms: int
    ramp_rate: float  # engineering units per second

    def __post_init__(self):
        if self.start_ms >= self.end_ms:
            raise ValueError("hazard start must precede end")

    def offset_at(self, t: int) -> float:
        """Additive contribution at sim time t; zero once the event is over."""
        if self.start_ms <= t <= self.end_ms:
            return self.ramp_rate * (t - self.start_ms) / 1000.0
        return 0.0


def _round_half_away(x: float) -> int:
    return int(math.floor(abs(x) + 0.5)) * (1 if x >= 0 else -1)


def quantize(kind: SensorKind, raw: float) -> float | int:
    """Snap an engineering-unit value onto the channel's storage grid.

    Temperature: nearest 0.5 C, ties away from zero. Light: nearest count,
    clamped to 16 bits. Gases: nearest storage unit, clamped at zero.
    """
    if not math.isfinite(raw):
        raise ValueError(f"non-finite raw value {raw!r}")
    if kind is SensorKind.TEMPERATURE:
        return _round_half_away(raw * 2.0) / 2.0
    if kind is SensorKind.LIGHT:
        return min(max(_round_half_away(raw), 0), LIGHT_MAX)
    if kind in PERCENT_VOL_KINDS:
        return max(_round_half_away(raw * 100.0), 0)
    return max(_round_half_away(raw), 0)  # CO, integer ppm


def substream(seed: int, *names) -> random.Random:
    """Independent named RNG substream derived from one root seed, so adding
    nodes or kinds never perturbs other streams."""
    h = hashlib.sha256()
    h.update(str(seed).encode())
    for name in names:
        h.update(b"/")
        h.update(str(name).encode())
    return random.Random(int.from_bytes(h.digest()[:8], "big"))


@dataclass
class _ChannelState:
    walk: float
    seq: int = 0
    rng: random.Random = None


class SensorField:
    """All sensor state for one simulation run: one walk + seq counter +
    RNG substream per (node, kind)."""

    def __init__(self, model: SensorModel, seed: int,
                 hazards: list[HazardEvent] | None = None):
        self.model = model
        self.seed = seed
        self.hazards = list(hazards or [])
        self._state: dict[tuple[int, SensorKind], _ChannelState] = {}

    def _channel(self, node: int, kind: SensorKind) -> _ChannelState:
        key = (node, kind)
        st = self._state.get(key)
        if st is None:
            ch = self.model.channels[kind]
            st = _ChannelState(walk=ch.baseline,
                               rng=substream(self.seed, "sensor", node, kind.value))
            self._state[key] = st
        return st

    def hazard_offset(self, node: int, kind: SensorKind, t: int) -> float:
        return sum(h.offset_at(t) for h in self.hazards
                   if h.node == node and h.kind == kind)

    def sample(self, node: int, kind: SensorKind, t: int) -> Reading:
        """Advance the walk one step and emit a quantized reading."""
        ch = self.model.channels[kind]
        st = self._channel(node, kind)
        noise = st.rng.gauss(0.0, ch.walk_sigma) if ch.walk_sigma > 0 else 0.0
        st.walk += self.model.kappa * (ch.baseline - st.walk) + noise
        st.walk = min(max(st.walk, ch.min_value), ch.max_value)
        raw = st.walk + self.hazard_offset(node, kind, t)
        raw = min(max(raw, ch.min_value), ch.max_value)
        seq = st.seq
        st.seq = (st.seq + 1) & 0xFFFF
        return Reading(node=node, kind=kind, value=quantize(kind, raw), t=t, seq=seq)
