import json
import os
import random

import pytest

from ecasim import experiment
from ecasim.config import ConfigError
from ecasim.experiment import CSV_HEADER, SweepSpec, derive_seed, run_cell, run_sweep
from ecasim.mac import Variant

SMALL = dict(n_values=(2, 5), replications=3, duration_s=0.2, base_seed=9)


def test_derive_seed_is_deterministic_and_64_bit():
    a = derive_seed(1, Variant.CSMA_ECA, 8, 3)
    assert a == derive_seed(1, Variant.CSMA_ECA, 8, 3)
    assert 0 <= a < 2**64


def test_derive_seed_has_no_collisions_over_default_sweep():
    seeds = {derive_seed(0, v, n, r) for v in Variant for n in range(2, 51) for r in range(100)}
    assert len(seeds) == 4 * 49 * 100


@pytest.mark.parametrize("base", [0, 1, 2**63 + 5])
def test_derive_seed_neighbours_differ(base):
    v = Variant.CSMA_CA
    assert derive_seed(base, v, 2, 0) != derive_seed(base, v, 3, 0)
    assert derive_seed(base, v, 2, 0) != derive_seed(base, v, 2, 1)
    assert derive_seed(base, v, 2, 0) != derive_seed(base, Variant.CSMA_ECA, 2, 0)
    assert derive_seed(base, v, 2, 0) != derive_seed(base + 1, v, 2, 0)


def test_sweep_spec_validation():
    with pytest.raises(ConfigError):
        SweepSpec(n_values=())
    with pytest.raises(ConfigError):
        SweepSpec(variants=())
    with pytest.raises(ConfigError):
        SweepSpec(replications=1)
    with pytest.raises(ConfigError):
        SweepSpec(n_values=(0, 3))
    with pytest.raises(ConfigError):
        SweepSpec(cw_min=24)


def test_sweep_writes_both_figure_datasets(tmp_path):
    spec = SweepSpec(output_dir=tmp_path, **SMALL)
    result = run_sweep(spec)
    assert len(result.cells) == 8
    fig1 = (tmp_path / "fig1_throughput.csv").read_text().splitlines()
    fig2 = (tmp_path / "fig2_fairshare.csv").read_text().splitlines()
    assert fig1[0] == fig2[0] == CSV_HEADER
    assert [r.split(",")[:2] for r in fig1[1:]] == [["ca", "2"], ["ca", "5"], ["eca", "2"], ["eca", "5"]]
    assert [r.split(",")[0] for r in fig2[1:]] == ["eca-hys"] * 2 + ["eca-hys-fs"] * 2
    row = fig1[1].split(",")
    assert len(row) == 7
    # 6 significant digits
    assert all(v == f"{float(v):.6g}" for v in row[2:])
    meta = json.loads((tmp_path / "sweep_metadata.json").read_text())
    assert meta["complete"] is True
    assert meta["replications"] == 3 and meta["base_seed"] == 9
    assert meta["sim_config"]["timing"]["data_rate_bps"] == 11e6


def test_sweep_output_is_byte_identical_on_rerun(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run_sweep(SweepSpec(output_dir=a, **SMALL))
    run_sweep(SweepSpec(output_dir=b, **SMALL))
    for name in ("fig1_throughput.csv", "fig2_fairshare.csv", "sweep_metadata.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_cell_results_do_not_depend_on_execution_order():
    spec = SweepSpec(**SMALL)
    cells = spec.cells()
    forward = {c: run_cell(spec, *c) for c in cells}
    shuffled = list(cells)
    random.Random(3).shuffle(shuffled)
    backward = {c: run_cell(spec, *c) for c in shuffled}
    assert forward == backward


def test_parallel_workers_match_serial(tmp_path):
    serial = run_sweep(SweepSpec(**SMALL))
    parallel = run_sweep(SweepSpec(workers=2, **SMALL))
    assert serial.cells == parallel.cells


def test_only_requested_figures_are_written(tmp_path):
    run_sweep(SweepSpec(output_dir=tmp_path, variants=(Variant.CSMA_CA,), **SMALL))
    assert (tmp_path / "fig1_throughput.csv").exists()
    assert not (tmp_path / "fig2_fairshare.csv").exists()


@pytest.mark.skipif(os.geteuid() == 0, reason="root ignores directory permissions")
def test_unwritable_output_fails_before_running(tmp_path, monkeypatch):
    locked = tmp_path / "locked"
    locked.mkdir()
    locked.chmod(0o500)
    monkeypatch.setattr(experiment, "run_cell", pytest.fail)
    with pytest.raises(OSError):
        run_sweep(SweepSpec(output_dir=locked / "out", **SMALL))


def test_output_path_that_is_a_file_fails_before_running(tmp_path, monkeypatch):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    monkeypatch.setattr(experiment, "run_cell", lambda *a: pytest.fail("ran a cell"))
    with pytest.raises(OSError):
        run_sweep(SweepSpec(output_dir=blocker / "out", **SMALL))


def test_failed_cell_leaves_incomplete_files(tmp_path, monkeypatch):
    real = experiment.run_cell
    calls = []

    def flaky(spec, variant, n):
        calls.append((variant, n))
        if len(calls) == 3:
            raise RuntimeError("boom")
        return real(spec, variant, n)

    monkeypatch.setattr(experiment, "run_cell", flaky)
    with pytest.raises(RuntimeError):
        run_sweep(SweepSpec(output_dir=tmp_path, **SMALL))
    assert not (tmp_path / "fig1_throughput.csv").exists()
    partial = (tmp_path / "fig1_throughput.incomplete.csv").read_text().splitlines()
    assert len(partial) == 1 + 2
    meta = json.loads((tmp_path / "sweep_metadata.incomplete.json").read_text())
    assert meta["complete"] is False and meta["cells_completed"] == 2


def test_keep_runs_exposes_replications():
    result = run_sweep(SweepSpec(**SMALL), keep_runs=True)
    runs = result.runs[(Variant.CSMA_ECA, 5)]
    assert len(runs) == 3
    assert len({r.elapsed_us for r in runs}) > 1


def test_seed_collision_check_passes_for_default_spec():
    experiment.check_seed_collisions(SweepSpec())
