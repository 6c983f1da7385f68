"""Replicated parameter sweeps and figure datasets."""

from __future__ import annotations

import json
import logging
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from ecasim.channel import run
from ecasim.config import ConfigError, SimConfig, TimingModel
from ecasim.mac import Variant
from ecasim.metrics import CellSummary, RunMetrics, SweepResult, summarize_cell

log = logging.getLogger(__name__)

CSV_HEADER = "variant,N,mean_throughput_bps,ci_throughput_bps,mean_jfi,ci_jfi,converged_fraction"
METADATA_NAME = "sweep_metadata.json"

# dataset name -> variants plotted together
FIGURES: dict[str, tuple[Variant, ...]] = {
    "fig1_throughput": (Variant.CSMA_CA, Variant.CSMA_ECA),
    "fig2_fairshare": (Variant.ECA_HYSTERESIS, Variant.ECA_HYSTERESIS_FAIR_SHARE),
}

_VARIANT_CODE = {v: i for i, v in enumerate(Variant)}
_MASK64 = (1 << 64) - 1


def derive_seed(base: int, variant: Variant, n_nodes: int, replication: int) -> int:
    """Stateless 64-bit seed for one replication of one cell.

    The tuple is hashed through numpy's SeedSequence, so every input bit
    reaches every output bit and cells can run in any order.
    """
    seq = np.random.SeedSequence(base & _MASK64,
                                 spawn_key=(_VARIANT_CODE[variant], n_nodes, replication))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class SweepSpec:
    variants: tuple[Variant, ...] = tuple(Variant)
    n_values: tuple[int, ...] = tuple(range(2, 51))
    replications: int = 100
    base_seed: int = 0
    output_dir: Optional[Path] = None
    cw_min: int = 32
    m: int = 5
    timing: TimingModel = field(default_factory=TimingModel)
    duration_s: float = 10.0
    convergence_tail: float = 0.2
    jfi_window: str = "whole"
    workers: int = 1

    def __post_init__(self):
        if not self.variants:
            raise ConfigError("sweep needs at least one variant")
        if not self.n_values:
            raise ConfigError("sweep needs at least one N value")
        if min(self.n_values) < 1:
            raise ConfigError(f"N values must be >= 1, got {min(self.n_values)}")
        if self.replications < 2:
            raise ConfigError("confidence intervals need at least 2 replications per cell")
        if self.jfi_window not in ("whole", "steady"):
            raise ConfigError(f"jfi_window must be 'whole' or 'steady', got {self.jfi_window!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        # validates the shared protocol and timing fields
        self.config(self.variants[0], self.n_values[0], 0)

    def config(self, variant: Variant, n_nodes: int, replication: int) -> SimConfig:
        return SimConfig(
            variant=variant,
            n_nodes=n_nodes,
            cw_min=self.cw_min,
            m=self.m,
            timing=self.timing,
            duration_s=self.duration_s,
            seed=derive_seed(self.base_seed, variant, n_nodes, replication),
            convergence_tail=self.convergence_tail,
        )

    def cells(self) -> list[tuple[Variant, int]]:
        return [(v, n) for v in self.variants for n in self.n_values]


def check_seed_collisions(spec: SweepSpec) -> None:
    seeds = {}
    for v, n in spec.cells():
        for r in range(spec.replications):
            s = derive_seed(spec.base_seed, v, n, r)
            if s in seeds:
                raise RuntimeError(f"seed collision between {seeds[s]} and {(v.value, n, r)}")
            seeds[s] = (v.value, n, r)


def run_cell(spec: SweepSpec, variant: Variant, n_nodes: int) -> list[RunMetrics]:
    return [run(spec.config(variant, n_nodes, r)) for r in range(spec.replications)]


def _run_cell_task(args) -> list[RunMetrics]:
    return run_cell(*args)


def _check_writable(directory: Path) -> None:
    try:
        directory.mkdir(parents=True, exist_ok=True)
        with tempfile.NamedTemporaryFile(dir=directory):
            pass
    except OSError as exc:
        raise OSError(f"output directory {directory} is not writable: {exc}") from exc


def run_sweep(spec: SweepSpec,
              on_cell: Optional[Callable[[CellSummary], None]] = None,
              keep_runs: bool = False) -> SweepResult:
    """Run every (variant, N) cell and reduce to means and 95% intervals.

    Datasets are written when ``spec.output_dir`` is set. If a cell fails, the
    completed cells are written to ``*.incomplete.csv`` files and the error
    propagates.
    """
    if spec.output_dir is not None:
        _check_writable(Path(spec.output_dir))
    check_seed_collisions(spec)

    result = SweepResult()
    runs: dict[tuple[Variant, int], list[RunMetrics]] = {}

    def collect(cell, cell_runs):
        summary = summarize_cell(cell[0], cell[1], cell_runs, spec.jfi_window)
        result.cells[cell] = summary
        if keep_runs:
            runs[cell] = cell_runs
        log.info("%s N=%d: %.4g bit/s, JFI %.4f, converged %.2f", cell[0].value, cell[1],
                 summary.mean_throughput, summary.mean_jfi, summary.converged_fraction)
        if on_cell is not None:
            on_cell(summary)

    cells = spec.cells()
    try:
        if spec.workers == 1:
            for cell in cells:
                collect(cell, run_cell(spec, *cell))
        else:
            with ProcessPoolExecutor(max_workers=spec.workers) as pool:
                tasks = [(spec, v, n) for v, n in cells]
                for cell, cell_runs in zip(cells, pool.map(_run_cell_task, tasks)):
                    collect(cell, cell_runs)
    except BaseException:
        result.complete = False
        if spec.output_dir is not None:
            write_datasets(result, spec)
        raise

    if keep_runs:
        result.runs = runs
    if spec.output_dir is not None:
        write_datasets(result, spec)
    return result


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def dataset_rows(result: SweepResult, variants: Sequence[Variant]) -> list[str]:
    rows = []
    for v in variants:
        for c in result.series(v):
            rows.append(",".join([
                v.value, str(c.n_nodes), _fmt(c.mean_throughput), _fmt(c.ci_throughput),
                _fmt(c.mean_jfi), _fmt(c.ci_jfi), _fmt(c.converged_fraction),
            ]))
    return rows


def write_datasets(result: SweepResult, spec: SweepSpec) -> list[Path]:
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    suffix = ".csv" if result.complete else ".incomplete.csv"
    written = []
    for name, variants in FIGURES.items():
        wanted = [v for v in variants if v in spec.variants]
        if not wanted:
            continue
        path = out / f"{name}{suffix}"
        lines = [CSV_HEADER, *dataset_rows(result, wanted)]
        path.write_text("\n".join(lines) + "\n")
        written.append(path)
    meta = sweep_metadata(spec, result, [p.name for p in written])
    meta_path = out / (METADATA_NAME if result.complete else "sweep_metadata.incomplete.json")
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    written.append(meta_path)
    return written


def sweep_metadata(spec: SweepSpec, result: SweepResult, files: Sequence[str]) -> dict:
    from ecasim import __version__

    template = replace(spec.config(spec.variants[0], spec.n_values[0], 0), seed=0).to_dict()
    for key in ("variant", "n_nodes", "seed"):
        template.pop(key)
    return {
        "tool": "ecasim",
        "version": __version__,
        "complete": result.complete,
        "files": list(files),
        "variants": [v.value for v in spec.variants],
        "n_values": list(spec.n_values),
        "replications": spec.replications,
        "base_seed": spec.base_seed,
        "seed_derivation": "numpy SeedSequence(base_seed, spawn_key=(variant_code, N, replication))"
                           ".generate_state(1, uint64)",
        "variant_codes": {v.value: c for v, c in _VARIANT_CODE.items()},
        "jfi_window": spec.jfi_window,
        "sim_config": template,
        "cells_completed": len(result.cells),
    }
