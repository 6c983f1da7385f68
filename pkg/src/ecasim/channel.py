"""Slotted channel engine.

Two engines share the per-node transitions in :mod:`ecasim.mac` and consume
the random generator in the same order, so they produce identical results:

* :class:`Channel` advances one system slot at a time and can record a
  per-slot trace.
* :func:`run` without tracing jumps over runs of empty slots. Counters only
  move on empty slots, so a node scheduled with backoff ``b`` while ``c``
  empty slots have elapsed fires when the empty-slot count reaches ``c + b``.
  A heap keyed on that firing count replaces the per-slot decrement loop.
"""

from __future__ import annotations

import enum
import heapq
import math
import random
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from ecasim import mac
from ecasim.config import SimConfig, TimingModel
from ecasim.mac import NodeState
from ecasim.metrics import RunMetrics, run_metrics


class SlotKind(enum.Enum):
    EMPTY = "E"
    SUCCESS = "S"
    COLLISION = "C"


@dataclass(frozen=True)
class SlotOutcome:
    kind: SlotKind
    transmitters: tuple[int, ...]
    duration_us: float
    packets_delivered: int = 0
    stages: tuple[int, ...] = ()  # stage of each transmitter when it transmitted


def classify_slot(transmitters: Iterable[int]) -> SlotKind:
    n = len(set(transmitters))
    if n == 0:
        return SlotKind.EMPTY
    return SlotKind.SUCCESS if n == 1 else SlotKind.COLLISION


def slot_duration(kind: SlotKind, burst_sizes: Sequence[int], timing: TimingModel) -> float:
    """Airtime of one slot in microseconds.

    A success with burst ``n`` is DIFS followed by ``n`` data/SIFS/ACK
    exchanges. A collision lasts DIFS, the longest colliding burst's data
    airtime, and an ACK timeout of SIFS plus one ACK.
    """
    if kind is SlotKind.EMPTY:
        if burst_sizes:
            raise ValueError("an empty slot has no transmitters")
        return timing.sigma_us
    if kind is SlotKind.SUCCESS:
        if len(burst_sizes) != 1 or burst_sizes[0] < 1:
            raise ValueError(f"a success needs exactly one burst of >= 1 packet, got {burst_sizes}")
        n = burst_sizes[0]
        return timing.difs_us + n * (timing.data_us + timing.sifs_us + timing.ack_us)
    if len(burst_sizes) < 2 or min(burst_sizes) < 1:
        raise ValueError(f"a collision needs two or more bursts, got {burst_sizes}")
    return (timing.difs_us + max(burst_sizes) * timing.data_us
            + timing.sifs_us + timing.ack_us)


def convergence_index(kinds: Sequence[SlotKind], window: int) -> Optional[int]:
    """First slot after the last collision, if at least ``window`` slots
    (counting that one) remain in the trace; otherwise None."""
    if window < 1:
        raise ValueError("window must be >= 1")
    last = -1
    for i, k in enumerate(kinds):
        if k is SlotKind.COLLISION:
            last = i
    return _convergence(last, len(kinds), window)


def _convergence(last_collision: int, total_slots: int, window: int) -> Optional[int]:
    start = last_collision + 1
    return start if total_slots - start >= window else None


def convergence_window(total_slots: int, tail: float) -> int:
    return max(1, math.ceil(tail * total_slots))


def format_trace_line(slot_index: int, outcome: SlotOutcome) -> str:
    """``slot kind transmitters duration_us stages``, tab separated.

    Transmitter and stage lists are comma separated, ``-`` when empty.
    """
    tx = ",".join(map(str, outcome.transmitters)) or "-"
    stages = ",".join(map(str, outcome.stages)) or "-"
    return f"{slot_index}\t{outcome.kind.value}\t{tx}\t{outcome.duration_us:.3f}\t{stages}"


class Channel:
    """Slot-by-slot simulation state for one run."""

    def __init__(self, config: SimConfig, trace: Optional[bool] = None):
        self.config = config
        self.params = config.params
        self.variant = config.variant
        self.timing = config.timing
        self.rng = random.Random(config.seed)
        self.nodes: list[NodeState] = [
            mac.initial_state(self.params, self.variant, self.rng)
            for _ in range(config.n_nodes)
        ]
        self.slot_index = 0
        self.counts = {SlotKind.EMPTY: 0, SlotKind.SUCCESS: 0, SlotKind.COLLISION: 0}
        self.busy_us = 0.0
        self.last_collision = -1
        self._snapshot = [0] * config.n_nodes
        record = config.trace_enabled if trace is None else trace
        self.trace: Optional[list[SlotOutcome]] = [] if record else None

    @property
    def elapsed_us(self) -> float:
        # kept as count * sigma + busy time so both engines round identically
        return self.counts[SlotKind.EMPTY] * self.timing.sigma_us + self.busy_us

    def step(self) -> SlotOutcome:
        nodes = self.nodes
        tx = tuple(i for i, s in enumerate(nodes) if mac.wants_to_transmit(s))
        kind = classify_slot(tx)
        bursts = [nodes[i].pending_burst for i in tx]
        duration = slot_duration(kind, bursts, self.timing)
        stages = tuple(nodes[i].stage for i in tx)
        delivered = 0
        if kind is SlotKind.EMPTY:
            self.nodes = [mac.on_empty_slot(s) for s in nodes]
        elif kind is SlotKind.SUCCESS:
            i = tx[0]
            delivered = bursts[0]
            s = nodes[i]
            credited = NodeState(s.backoff, s.stage, s.pending_burst,
                                 s.delivered_payload + delivered * self.timing.payload_bits)
            nodes[i] = mac.on_success(credited, self.params, self.variant, self.rng)
        else:
            for i in tx:
                nodes[i] = mac.on_collision(nodes[i], self.params, self.variant, self.rng)
            self.last_collision = self.slot_index
            self._snapshot = [s.delivered_payload for s in nodes]
        if kind is not SlotKind.EMPTY:
            self.busy_us += duration
        self.counts[kind] += 1
        self.slot_index += 1
        outcome = SlotOutcome(kind, tx, duration, delivered, stages)
        if self.trace is not None:
            self.trace.append(outcome)
        return outcome

    def run(self) -> RunMetrics:
        deadline = self.config.duration_us
        while self.elapsed_us < deadline:
            self.step()
        return self.metrics()

    def metrics(self) -> RunMetrics:
        return _metrics(self.config, [s.delivered_payload for s in self.nodes],
                        self.elapsed_us, self.counts, self.last_collision, self._snapshot)


def _metrics(config: SimConfig, delivered: list[int], elapsed_us: float,
             counts: dict, last_collision: int, snapshot: list[int]) -> RunMetrics:
    slot_counts = (counts[SlotKind.EMPTY], counts[SlotKind.SUCCESS], counts[SlotKind.COLLISION])
    total = sum(slot_counts)
    conv = _convergence(last_collision, total, convergence_window(total, config.convergence_tail))
    steady = None
    if conv is not None:
        steady = [d - s for d, s in zip(delivered, snapshot)]
    return run_metrics(delivered, elapsed_us, slot_counts, conv, steady)


def _empties_to_deadline(empties: int, busy_us: float, sigma: float, deadline: float) -> int:
    """Number of further empty slots until elapsed time reaches the deadline."""
    k = max(1, math.ceil((deadline - busy_us) / sigma - empties))
    while (empties + k) * sigma + busy_us < deadline:
        k += 1
    while k > 1 and (empties + k - 1) * sigma + busy_us >= deadline:
        k -= 1
    return k


def _run_fast(config: SimConfig) -> RunMetrics:
    params, variant, timing = config.params, config.variant, config.timing
    payload = timing.payload_bits
    sigma = timing.sigma_us
    deadline = config.duration_us
    rng = random.Random(config.seed)
    on_success, on_collision = mac.on_success, mac.on_collision

    nodes = [mac.initial_state(params, variant, rng) for _ in range(config.n_nodes)]
    heap = [(s.backoff, i) for i, s in enumerate(nodes)]
    heapq.heapify(heap)
    delivered = [0] * config.n_nodes  # packets
    snapshot = [0] * config.n_nodes
    clock = 0  # empty slots so far
    busy = 0.0
    successes = collisions = 0
    last_collision = -1

    success_us = {1 << k: slot_duration(SlotKind.SUCCESS, [1 << k], timing)
                  for k in range(params.m + 1)}
    # a collision's airtime depends only on its longest burst
    collision_us = {1 << k: slot_duration(SlotKind.COLLISION, [1 << k, 1], timing)
                    for k in range(params.m + 1)}

    while clock * sigma + busy < deadline:
        fire = heap[0][0]
        if fire > clock:
            if fire * sigma + busy >= deadline:
                k = _empties_to_deadline(clock, busy, sigma, deadline)
                if k <= fire - clock:
                    clock += k
                    break
            clock = fire
        slot = clock + successes + collisions
        i = heapq.heappop(heap)[1]
        if not heap or heap[0][0] != fire:
            s = nodes[i]
            n = s.pending_burst
            busy += success_us[n]
            delivered[i] += n
            s = on_success(s, params, variant, rng)
            nodes[i] = s
            heapq.heappush(heap, (clock + s.backoff, i))
            successes += 1
            continue
        tx = [i]
        while heap and heap[0][0] == fire:
            tx.append(heapq.heappop(heap)[1])
        tx.sort()
        busy += collision_us[max(nodes[j].pending_burst for j in tx)]
        for j in tx:
            s = on_collision(nodes[j], params, variant, rng)
            nodes[j] = s
            heapq.heappush(heap, (clock + s.backoff, j))
        collisions += 1
        last_collision = slot
        snapshot = delivered.copy()

    counts = {SlotKind.EMPTY: clock, SlotKind.SUCCESS: successes, SlotKind.COLLISION: collisions}
    return _metrics(config, [d * payload for d in delivered], clock * sigma + busy,
                    counts, last_collision, [d * payload for d in snapshot])


def run(config: SimConfig) -> RunMetrics:
    """Simulate one saturated run for ``config.duration_s`` seconds.

    A slot that starts before the deadline always completes, and throughput
    is measured over the actual elapsed time.
    """
    if config.trace_enabled:
        return Channel(config).run()
    return _run_fast(config)
