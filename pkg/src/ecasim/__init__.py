"""Slotted contention simulator for CSMA/CA and CSMA/ECA variants."""

from ecasim.mac import NodeState, ProtocolParams, Variant
from ecasim.config import SimConfig, TimingModel, ConfigError
from ecasim.channel import Channel, SlotKind, SlotOutcome, run
from ecasim.metrics import RunMetrics, SweepResult, jain_index, confidence_interval
from ecasim.experiment import SweepSpec, derive_seed, run_sweep

__version__ = "0.1.0"

__all__ = [
    "Channel",
    "ConfigError",
    "NodeState",
    "ProtocolParams",
    "RunMetrics",
    "SimConfig",
    "SlotKind",
    "SlotOutcome",
    "SweepResult",
    "SweepSpec",
    "TimingModel",
    "Variant",
    "confidence_interval",
    "derive_seed",
    "jain_index",
    "run",
    "run_sweep",
]
