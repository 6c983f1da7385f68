"""Run configuration and the channel timing model."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from ecasim.mac import ProtocolParams, Variant


class ConfigError(ValueError):
    """Raised for invalid simulation or sweep parameters."""


@dataclass(frozen=True)
class TimingModel:
    """Slot durations in microseconds and frame sizes in bits.

    Defaults approximate 802.11b DSSS at 11 Mbps with a 1500-byte payload.
    """

    sigma_us: float = 20.0
    difs_us: float = 50.0
    sifs_us: float = 10.0
    payload_bits: int = 12000
    header_bits: int = 400
    ack_bits: int = 304
    data_rate_bps: float = 11e6

    def __post_init__(self):
        for name in ("sigma_us", "difs_us", "sifs_us", "payload_bits",
                     "header_bits", "ack_bits", "data_rate_bps"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ConfigError(f"{name} must be positive and finite, got {value}")

    @property
    def data_us(self) -> float:
        return (self.header_bits + self.payload_bits) / self.data_rate_bps * 1e6

    @property
    def ack_us(self) -> float:
        return self.ack_bits / self.data_rate_bps * 1e6


@dataclass(frozen=True)
class SimConfig:
    variant: Variant = Variant.CSMA_ECA
    n_nodes: int = 2
    cw_min: int = 32
    m: int = 5
    timing: TimingModel = field(default_factory=TimingModel)
    duration_s: float = 10.0
    seed: int = 0
    trace_enabled: bool = False
    # fraction of final slots that must be collision-free to count as converged
    convergence_tail: float = 0.2

    def __post_init__(self):
        if not isinstance(self.variant, Variant):
            raise ConfigError(f"variant must be a Variant, got {self.variant!r}")
        if self.n_nodes < 1:
            raise ConfigError(f"number of nodes must be >= 1, got {self.n_nodes}")
        if not (self.duration_s > 0 and math.isfinite(self.duration_s)):
            raise ConfigError(f"duration must be positive and finite, got {self.duration_s}")
        if self.cw_min < 2 or self.cw_min & (self.cw_min - 1):
            raise ConfigError(f"cw_min must be a power of two >= 2, got {self.cw_min}")
        if self.m < 0:
            raise ConfigError(f"maximum stage must be >= 0, got {self.m}")
        if not 0 < self.convergence_tail <= 1:
            raise ConfigError(f"convergence_tail must lie in (0, 1], got {self.convergence_tail}")

    @property
    def params(self) -> ProtocolParams:
        return ProtocolParams(self.cw_min, self.m)

    @property
    def duration_us(self) -> float:
        return self.duration_s * 1e6

    def to_dict(self) -> dict:
        d = asdict(self)
        d["variant"] = self.variant.value
        return d
