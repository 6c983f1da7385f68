"""Command line front end: ``ecasim run|sweep|trace``.

Settings come from built-in defaults, then an optional ``--config`` file of
``key = value`` lines (SimConfig field names), then command line flags.
Later sources win.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from ecasim.channel import Channel, format_trace_line, run
from ecasim.config import ConfigError, SimConfig, TimingModel
from ecasim.experiment import SweepSpec, run_sweep
from ecasim.mac import Variant

OUTPUT_ENV = "ECASIM_OUTPUT_DIR"
DEFAULT_OUTPUT = "results"

TIMING_KEYS = {
    "sigma_us": float, "difs_us": float, "sifs_us": float, "payload_bits": int,
    "header_bits": int, "ack_bits": int, "data_rate_bps": float,
}
RUN_KEYS = {
    "variant": str, "n_nodes": int, "cw_min": int, "m": int, "duration_s": float,
    "seed": int, "convergence_tail": float, **TIMING_KEYS,
}
SWEEP_KEYS = {
    **{k: t for k, t in RUN_KEYS.items() if k not in ("variant", "n_nodes")},
    "variants": str, "n_values": str, "replications": int, "output_dir": str,
    "workers": int, "jfi_window": str,
}


class UsageError(Exception):
    pass


def parse_config_file(path: str, allowed: dict) -> dict:
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        if key not in allowed:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = allowed[key](value.strip())
        except ValueError:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {value.strip()!r}") from None
    return values


def parse_n_values(text: str) -> tuple[int, ...]:
    """``"2-50"``, ``"2,4,8"`` or a mix such as ``"2-5,10"``."""
    out = []
    try:
        for part in text.split(","):
            part = part.strip()
            if "-" in part:
                lo, hi = (int(x) for x in part.split("-", 1))
                if hi < lo:
                    raise ValueError
                out.extend(range(lo, hi + 1))
            else:
                out.append(int(part))
    except ValueError:
        raise UsageError(f"bad N list {text!r}; use e.g. 2-50 or 2,4,8") from None
    if not out or min(out) < 1:
        raise UsageError(f"N values must be >= 1, got {text!r}")
    return tuple(out)


def parse_variants(text: str) -> tuple[Variant, ...]:
    try:
        variants = tuple(Variant.parse(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if not variants:
        raise UsageError("no variants given")
    return variants


def _add_protocol_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key = value file with defaults for these flags")
    p.add_argument("--duration", dest="duration_s", type=float, help="simulated seconds (10)")
    p.add_argument("--seed", type=int, help="random seed (0)")
    p.add_argument("--cw-min", dest="cw_min", type=int, help="minimum contention window (32)")
    p.add_argument("--max-stage", dest="m", type=int, help="maximum backoff stage (5)")
    p.add_argument("--convergence-tail", dest="convergence_tail", type=float,
                   help="fraction of final slots that must be collision-free (0.2)")
    t = p.add_argument_group("timing overrides")
    t.add_argument("--sigma-us", dest="sigma_us", type=float, help="empty slot length (20)")
    t.add_argument("--difs-us", dest="difs_us", type=float, help="DIFS (50)")
    t.add_argument("--sifs-us", dest="sifs_us", type=float, help="SIFS (10)")
    t.add_argument("--payload-bits", dest="payload_bits", type=int, help="payload per packet (12000)")
    t.add_argument("--header-bits", dest="header_bits", type=int, help="MAC+PHY header (400)")
    t.add_argument("--ack-bits", dest="ack_bits", type=int, help="ACK frame (304)")
    t.add_argument("--rate-bps", dest="data_rate_bps", type=float, help="channel bit rate (11e6)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ecasim", description="Slotted CSMA/CA and CSMA/ECA contention simulator")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    variant_help = "protocol: " + ", ".join(v.value for v in Variant)
    p_run = sub.add_parser("run", help="simulate one replication")
    p_run.add_argument("--variant", help=variant_help + " (eca)")
    p_run.add_argument("--nodes", dest="n_nodes", type=int, help="number of contenders (2)")
    _add_protocol_flags(p_run)
    p_run.add_argument("--json", action="store_true", help="also print a JSON record")

    p_trace = sub.add_parser("trace", help="dump the per-slot trace of one replication")
    p_trace.add_argument("--variant", help=variant_help + " (eca)")
    p_trace.add_argument("--nodes", dest="n_nodes", type=int, help="number of contenders (2)")
    _add_protocol_flags(p_trace)
    p_trace.add_argument("--slots", type=int, help="stop after this many slots")
    p_trace.add_argument("-o", "--output", help="write the trace here instead of stdout")

    p_sweep = sub.add_parser("sweep", help="replicated sweep over N, writes figure datasets")
    p_sweep.add_argument("--variants", help="comma separated (all four)")
    p_sweep.add_argument("--nodes", dest="n_values", help="N values, e.g. 2-50 (2-50)")
    p_sweep.add_argument("--replications", type=int, help="runs per cell (100)")
    _add_protocol_flags(p_sweep)
    p_sweep.add_argument("--output-dir", dest="output_dir",
                         help=f"dataset directory (${OUTPUT_ENV} or {DEFAULT_OUTPUT})")
    p_sweep.add_argument("--workers", type=int, help="parallel worker processes (1)")
    p_sweep.add_argument("--jfi-window", dest="jfi_window", choices=("whole", "steady"),
                         help="measure JFI over the whole run or the collision-free tail")
    p_sweep.add_argument("--plots", action="store_true", help="render PNG figures next to the CSVs")
    return parser


def _merged(args: argparse.Namespace, allowed: dict) -> dict:
    values = parse_config_file(args.config, allowed) if args.config else {}
    for key in allowed:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    return values


def _timing(values: dict) -> TimingModel:
    return TimingModel(**{k: values[k] for k in TIMING_KEYS if k in values})


def sim_config_from(args: argparse.Namespace) -> SimConfig:
    values = _merged(args, RUN_KEYS)
    try:
        variant = Variant.parse(values.pop("variant", "eca"))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    timing = _timing(values)
    for k in TIMING_KEYS:
        values.pop(k, None)
    return SimConfig(variant=variant, timing=timing, **values)


def sweep_spec_from(args: argparse.Namespace) -> SweepSpec:
    values = _merged(args, SWEEP_KEYS)
    kwargs = {}
    if "variants" in values:
        kwargs["variants"] = parse_variants(values.pop("variants"))
    if "n_values" in values:
        kwargs["n_values"] = parse_n_values(values.pop("n_values"))
    if "seed" in values:
        kwargs["base_seed"] = values.pop("seed")
    out = values.pop("output_dir", None) or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT
    timing = _timing(values)
    for k in TIMING_KEYS:
        values.pop(k, None)
    return SweepSpec(output_dir=Path(out), timing=timing, **kwargs, **values)


def summary_lines(config: SimConfig, m) -> list[str]:
    empty, success, collision = m.slot_counts
    if m.convergence_slot is None:
        conv = "no (collisions continue into the final slots)"
    else:
        conv = f"yes, collision-free from slot {m.convergence_slot}"
    jfi = "n/a (no traffic)" if m.jfi is None else f"{m.jfi:.4f}"
    return [
        f"variant      {config.variant.value}",
        f"nodes        {config.n_nodes}",
        f"seed         {config.seed}",
        f"elapsed      {m.elapsed_us / 1e6:.6f} s",
        f"slots        {m.total_slots} (empty {empty}, success {success}, collision {collision})",
        f"throughput   {m.aggregate_throughput / 1e6:.4f} Mbit/s",
        f"JFI          {jfi}",
        f"converged    {conv}",
    ]


def metrics_record(config: SimConfig, m) -> dict:
    return {
        "config": config.to_dict(),
        "aggregate_throughput_bps": m.aggregate_throughput,
        "per_node_throughput_bps": list(m.per_node_throughput),
        "jfi": m.jfi,
        "steady_jfi": m.steady_jfi,
        "convergence_slot": m.convergence_slot,
        "slot_counts": {"empty": m.slot_counts[0], "success": m.slot_counts[1],
                        "collision": m.slot_counts[2]},
        "elapsed_us": m.elapsed_us,
    }


def cmd_run(args) -> int:
    config = sim_config_from(args)
    m = run(config)
    print("\n".join(summary_lines(config, m)))
    if args.json:
        print(json.dumps(metrics_record(config, m), sort_keys=True))
    return 0


def cmd_trace(args) -> int:
    config = sim_config_from(args)
    if args.slots is not None and args.slots < 0:
        raise UsageError("--slots must be >= 0")
    channel = Channel(config, trace=False)
    deadline = config.duration_us
    out = open(args.output, "w") if args.output else sys.stdout
    try:
        while channel.elapsed_us < deadline:
            if args.slots is not None and channel.slot_index >= args.slots:
                break
            index = channel.slot_index
            out.write(format_trace_line(index, channel.step()) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_sweep(args) -> int:
    spec = sweep_spec_from(args)
    total = len(spec.cells())
    done = 0

    def progress(cell):
        nonlocal done
        done += 1
        print(f"[{done}/{total}] {cell.variant.value} N={cell.n_nodes}: "
              f"{cell.mean_throughput / 1e6:.4f} Mbit/s, JFI {cell.mean_jfi:.4f}, "
              f"converged {cell.converged_fraction:.2f}", flush=True)

    result = run_sweep(spec, on_cell=progress)
    if args.plots:
        from ecasim.plotting import render_figures

        for path in render_figures(result, spec.output_dir):
            print(f"wrote {path}")
    print(f"datasets in {spec.output_dir}")
    return 0


COMMANDS = {"run": cmd_run, "trace": cmd_trace, "sweep": cmd_sweep}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        parser.print_usage(sys.stderr)
        print(f"ecasim {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, RuntimeError) as exc:
        print(f"ecasim {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
