"""Per-node contention state machines.

Each transition is a pure function ``(state, params, variant, rng) -> state``.
A node never sees the other contenders or how many there are; the channel
engine decides which event a node experiences in every slot.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass


class Variant(enum.Enum):
    CSMA_CA = "ca"
    CSMA_ECA = "eca"
    ECA_HYSTERESIS = "eca-hys"
    ECA_HYSTERESIS_FAIR_SHARE = "eca-hys-fs"

    @property
    def hysteresis(self) -> bool:
        return self in (Variant.ECA_HYSTERESIS, Variant.ECA_HYSTERESIS_FAIR_SHARE)

    @property
    def fair_share(self) -> bool:
        return self is Variant.ECA_HYSTERESIS_FAIR_SHARE

    @classmethod
    def parse(cls, name: str) -> "Variant":
        try:
            return cls(name.strip().lower())
        except ValueError:
            choices = ", ".join(v.value for v in cls)
            raise ValueError(f"unknown variant {name!r} (choose from {choices})") from None


@dataclass(frozen=True)
class ProtocolParams:
    cw_min: int = 32
    m: int = 5

    def __post_init__(self):
        if self.cw_min < 2 or self.cw_min & (self.cw_min - 1):
            raise ValueError(f"cw_min must be a power of two >= 2, got {self.cw_min}")
        if self.m < 0:
            raise ValueError(f"maximum backoff stage must be >= 0, got {self.m}")


@dataclass(frozen=True, slots=True)
class NodeState:
    backoff: int
    stage: int = 0
    pending_burst: int = 1
    delivered_payload: int = 0  # bits


def cw(params: ProtocolParams, stage: int) -> int:
    """Contention window at ``stage``: ``2**stage * cw_min``."""
    if not 0 <= stage <= params.m:
        raise ValueError(f"stage {stage} outside [0, {params.m}]")
    return params.cw_min << stage


def sample_random_backoff(params: ProtocolParams, stage: int, rng: random.Random) -> int:
    """Uniform draw from ``[0, cw(stage) - 1]``."""
    window = cw(params, stage)
    # window is a power of two, so raw bits are exactly uniform
    return rng.getrandbits(window.bit_length() - 1)


def deterministic_backoff(params: ProtocolParams, variant: Variant, stage: int) -> int:
    """Backoff picked after a success.

    Plain CSMA/ECA always uses ``cw_min / 2``; the hysteresis variants use
    half of the window at the node's current stage.
    """
    if variant is Variant.CSMA_CA:
        raise ValueError("CSMA/CA has no deterministic backoff")
    if variant is Variant.CSMA_ECA:
        return params.cw_min // 2
    return cw(params, stage) // 2


def burst_size(variant: Variant, stage: int) -> int:
    return 1 << stage if variant.fair_share else 1


def initial_state(params: ProtocolParams, variant: Variant, rng: random.Random) -> NodeState:
    return NodeState(
        backoff=sample_random_backoff(params, 0, rng),
        stage=0,
        pending_burst=burst_size(variant, 0),
    )


def on_success(state: NodeState, params: ProtocolParams, variant: Variant,
               rng: random.Random) -> NodeState:
    if variant is Variant.CSMA_CA:
        return NodeState(sample_random_backoff(params, 0, rng), 0, 1, state.delivered_payload)
    if variant is Variant.CSMA_ECA:
        return NodeState(params.cw_min // 2, 0, 1, state.delivered_payload)
    # hysteresis: keep the stage
    stage = state.stage
    return NodeState(
        deterministic_backoff(params, variant, stage),
        stage,
        burst_size(variant, stage),
        state.delivered_payload,
    )


def on_collision(state: NodeState, params: ProtocolParams, variant: Variant,
                 rng: random.Random) -> NodeState:
    stage = min(state.stage + 1, params.m)
    return NodeState(
        sample_random_backoff(params, stage, rng),
        stage,
        burst_size(variant, stage),
        state.delivered_payload,
    )


def on_empty_slot(state: NodeState) -> NodeState:
    if state.backoff <= 0:
        raise ValueError("a node with zero backoff transmits; it cannot see an empty slot")
    return NodeState(state.backoff - 1, state.stage, state.pending_burst,
                     state.delivered_payload)


def wants_to_transmit(state: NodeState) -> bool:
    return state.backoff == 0
