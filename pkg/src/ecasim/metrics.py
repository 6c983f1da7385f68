"""Fairness, throughput and replication statistics."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from scipy import stats

from ecasim.config import ConfigError
from ecasim.mac import Variant


def jain_index(x: Sequence[float]) -> Optional[float]:
    """Jain's fairness index ``(sum x)^2 / (n * sum x^2)``.

    Returns None when nothing was allocated to anyone, since the index is
    undefined there.
    """
    if len(x) == 0:
        raise ValueError("jain_index needs at least one value")
    if any(v < 0 for v in x):
        raise ValueError("jain_index is defined for non-negative values only")
    top = math.fsum(x)
    if top == 0:
        return None
    # normalise first so huge or tiny magnitudes cannot overflow
    peak = max(x)
    scaled = [v / peak for v in x]
    s = math.fsum(scaled)
    return min(1.0, s * s / (len(x) * math.fsum(v * v for v in scaled)))


def confidence_interval(samples: Sequence[float], level: float = 0.95) -> tuple[float, float]:
    """Sample mean and Student-t half-width at the given confidence level."""
    n = len(samples)
    if n < 2:
        raise statistics.StatisticsError("confidence interval needs at least two samples")
    mean = statistics.fmean(samples)
    sd = statistics.stdev(samples)
    if sd == 0:
        return mean, 0.0
    t = stats.t.ppf(0.5 + level / 2, n - 1)
    return mean, float(t * sd / math.sqrt(n))


@dataclass(frozen=True)
class RunMetrics:
    per_node_throughput: tuple[float, ...]  # bit/s
    aggregate_throughput: float  # bit/s
    jfi: Optional[float]
    convergence_slot: Optional[int]
    slot_counts: tuple[int, int, int]  # (empty, success, collision)
    elapsed_us: float
    delivered_bits: tuple[int, ...]
    # JFI over the collision-free tail only; None when the run never converged
    steady_jfi: Optional[float] = None

    @property
    def total_slots(self) -> int:
        return sum(self.slot_counts)

    @property
    def collisions(self) -> int:
        return self.slot_counts[2]

    @property
    def converged(self) -> bool:
        return self.convergence_slot is not None


def run_metrics(delivered_bits: Sequence[int], elapsed_us: float,
                slot_counts: tuple[int, int, int], convergence_slot: Optional[int],
                steady_delivered: Optional[Sequence[int]] = None) -> RunMetrics:
    seconds = elapsed_us * 1e-6
    per_node = tuple(b / seconds for b in delivered_bits)
    return RunMetrics(
        per_node_throughput=per_node,
        aggregate_throughput=math.fsum(per_node),
        jfi=jain_index(per_node),
        convergence_slot=convergence_slot,
        slot_counts=slot_counts,
        elapsed_us=elapsed_us,
        delivered_bits=tuple(delivered_bits),
        steady_jfi=jain_index(steady_delivered) if steady_delivered is not None else None,
    )


@dataclass(frozen=True)
class CellSummary:
    variant: Variant
    n_nodes: int
    replications: int
    mean_throughput: float
    ci_throughput: float
    mean_jfi: float
    ci_jfi: float
    converged_fraction: float


@dataclass
class SweepResult:
    cells: dict[tuple[Variant, int], CellSummary] = field(default_factory=dict)
    complete: bool = True
    # raw replications per cell, filled only on request
    runs: dict[tuple[Variant, int], list[RunMetrics]] = field(default_factory=dict)

    def __getitem__(self, key: tuple[Variant, int]) -> CellSummary:
        return self.cells[key]

    def variants(self) -> list[Variant]:
        seen = []
        for v, _ in self.cells:
            if v not in seen:
                seen.append(v)
        return seen

    def series(self, variant: Variant) -> list[CellSummary]:
        return sorted((c for (v, _), c in self.cells.items() if v is variant),
                      key=lambda c: c.n_nodes)


def summarize_cell(variant: Variant, n_nodes: int, runs: Sequence[RunMetrics],
                   jfi_window: str = "whole") -> CellSummary:
    if not runs:
        raise ConfigError(f"no replications for cell ({variant.value}, N={n_nodes})")
    if jfi_window not in ("whole", "steady"):
        raise ConfigError(f"jfi_window must be 'whole' or 'steady', got {jfi_window!r}")
    thr_mean, thr_ci = confidence_interval([r.aggregate_throughput for r in runs])
    jfis = [r.jfi if jfi_window == "whole" else r.steady_jfi for r in runs]
    jfis = [j for j in jfis if j is not None]
    if len(jfis) >= 2:
        jfi_mean, jfi_ci = confidence_interval(jfis)
    elif jfis:
        jfi_mean, jfi_ci = jfis[0], math.nan
    else:
        jfi_mean = jfi_ci = math.nan
    return CellSummary(
        variant=variant,
        n_nodes=n_nodes,
        replications=len(runs),
        mean_throughput=thr_mean,
        ci_throughput=thr_ci,
        mean_jfi=jfi_mean,
        ci_jfi=jfi_ci,
        converged_fraction=sum(r.converged for r in runs) / len(runs),
    )


def aggregate(cells: Mapping[tuple[Variant, int], Iterable[RunMetrics]],
              jfi_window: str = "whole") -> SweepResult:
    """Reduce replications to per-(variant, N) means and 95% intervals.

    The reduction is independent of the order in which cells were given.
    """
    result = SweepResult()
    for key in sorted(cells, key=lambda k: (list(Variant).index(k[0]), k[1])):
        result.cells[key] = summarize_cell(key[0], key[1], list(cells[key]), jfi_window)
    return result
