"""Render sweep datasets as figures next to the CSV files."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from ecasim.experiment import FIGURES  # noqa: E402
from ecasim.mac import Variant  # noqa: E402
from ecasim.metrics import SweepResult  # noqa: E402

LABELS = {
    Variant.CSMA_CA: "CSMA/CA",
    Variant.CSMA_ECA: "CSMA/ECA",
    Variant.ECA_HYSTERESIS: "CSMA/ECA + hysteresis",
    Variant.ECA_HYSTERESIS_FAIR_SHARE: "CSMA/ECA + hysteresis + fair-share",
}
STYLE = {
    Variant.CSMA_CA: dict(color="tab:red", marker="o"),
    Variant.CSMA_ECA: dict(color="tab:blue", marker="s"),
    Variant.ECA_HYSTERESIS: dict(color="tab:orange", marker="^"),
    Variant.ECA_HYSTERESIS_FAIR_SHARE: dict(color="tab:green", marker="D"),
}


def _throughput_axis(ax, result: SweepResult, variants: Sequence[Variant]):
    for v in variants:
        cells = result.series(v)
        if not cells:
            continue
        ax.errorbar([c.n_nodes for c in cells], [c.mean_throughput / 1e6 for c in cells],
                    yerr=[c.ci_throughput / 1e6 for c in cells], label=LABELS[v],
                    markersize=3, capsize=2, linewidth=1, **STYLE[v])
    ax.set_xlabel("Number of contenders N")
    ax.set_ylabel("Throughput (Mbit/s)")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=8)


def plot_throughput(result: SweepResult, path: Path, variants: Sequence[Variant]) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    _throughput_axis(ax, result, variants)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_fairness(result: SweepResult, path: Path, variants: Sequence[Variant]) -> Path:
    """Throughput on top, Jain's index below, sharing the N axis."""
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(6, 6), sharex=True)
    _throughput_axis(top, result, variants)
    top.set_xlabel("")
    for v in variants:
        cells = result.series(v)
        if not cells:
            continue
        bottom.errorbar([c.n_nodes for c in cells], [c.mean_jfi for c in cells],
                        yerr=[c.ci_jfi for c in cells], label=LABELS[v],
                        markersize=3, capsize=2, linewidth=1, **STYLE[v])
    bottom.set_xlabel("Number of contenders N")
    bottom.set_ylabel("Jain's fairness index")
    bottom.set_ylim(top=1.02)
    bottom.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_figures(result: SweepResult, out_dir: Path) -> list[Path]:
    out_dir = Path(out_dir)
    written = []
    present = set(result.variants())
    for name, variants in FIGURES.items():
        wanted = [v for v in variants if v in present]
        if not wanted:
            continue
        path = out_dir / f"{name}.png"
        if name == "fig1_throughput":
            written.append(plot_throughput(result, path, wanted))
        else:
            written.append(plot_fairness(result, path, wanted))
    return written
