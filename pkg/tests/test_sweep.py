import csv
import json
import math

import numpy as np
import pytest

from gch.errors import BlowUpError, ConfigurationError
from gch.grid import Grid, Trajectory
from gch.initialdata import ic_peakon
from gch.solver import SolverConfig
from gch.sweep import (
    CAUCHY_COLUMNS, DEFAULT_EPSILONS, SweepBlowUp, SweepConfig, cauchy_table,
    run_sweep, shared_times, sweep_threads, window_distance, window_norm,
    write_cauchy_csv)

GRID = Grid(40, 512)


def small_config(epsilons, **kwargs):
    base = kwargs.pop("base", SolverConfig(epsilon=epsilons[0], t_final=0.5))
    kwargs.setdefault("mollifier_width", 0.4)
    kwargs.setdefault("n_bumps", 3)
    return SweepConfig(epsilons=tuple(epsilons), base=base, **kwargs)


@pytest.fixture(scope="module")
def ladder_report():
    return run_sweep(ic_peakon(0.5, 0.0, GRID), small_config((0.08, 0.04, 0.02)))


# {{{ configuration

def test_config_defaults():
    cfg = SweepConfig()
    assert cfg.epsilons == DEFAULT_EPSILONS
    assert cfg.base.output_interval == pytest.approx(cfg.base.t_final / 100)
    assert cfg.window == (-10.0, 10.0, 0.1, 1.0)
    assert cfg.member(0.01).epsilon == 0.01
    assert cfg.member(0.01).output_interval == cfg.base.output_interval
    json.dumps(cfg.to_dict())


@pytest.mark.parametrize("epsilons", [(), (0.01, 0.02), (0.01, 0.01), (0.02, 0.0), (0.02, -0.01)])
def test_config_rejects_bad_ladders(epsilons):
    with pytest.raises(ConfigurationError):
        SweepConfig(epsilons=epsilons)


def test_config_duplicates_only_in_test_mode():
    SweepConfig(epsilons=(0.01, 0.01), test_mode=True)
    with pytest.raises(ConfigurationError):
        SweepConfig(epsilons=(0.01, 0.02), test_mode=True)


@pytest.mark.parametrize("window", [(10.0, -10.0, 0.1, None), (-10.0, 10.0, 0.5, 0.2),
                                    (-10.0, 10.0, 0.1, 2.0), (-10.0, 10.0, -0.1, None)])
def test_config_rejects_bad_windows(window):
    with pytest.raises(ConfigurationError):
        SweepConfig(window=window)


def test_sweep_threads(monkeypatch):
    monkeypatch.delenv("GCH_THREADS", raising=False)
    assert 1 <= sweep_threads(4) <= 4
    monkeypatch.setenv("GCH_THREADS", "0")
    assert sweep_threads(4) == 0
    monkeypatch.setenv("GCH_THREADS", "2")
    assert sweep_threads(4) == 2 and sweep_threads(1) == 1
    monkeypatch.setenv("GCH_THREADS", "two")
    with pytest.raises(ConfigurationError):
        sweep_threads(4)
    monkeypatch.setenv("GCH_THREADS", "-1")
    with pytest.raises(ConfigurationError):
        sweep_threads(4)

# }}}


# {{{ differences

def test_window_distance_of_constants():
    g = Grid(40, 64)
    times = np.linspace(0, 1, 11)
    zero = Trajectory(g, times, np.zeros((11, 64)))
    const = Trajectory(g, times, np.full((11, 64), 2.0))
    window = (-10.0, 10.0, 0.2, 1.0)
    inside = np.count_nonzero((g.x >= -10) & (g.x <= 10))
    expected = 2.0 * math.sqrt(inside * g.h * 0.8)
    assert window_distance(zero, const, window) == pytest.approx(expected, rel=1e-12)
    assert window_distance(zero, const, window, derivative=True) == 0.0
    assert window_norm(const, window) == pytest.approx(expected, rel=1e-12)


def test_shared_times():
    g = Grid(40, 16)
    a = Trajectory(g, [0.0, 0.05, 0.1, 0.13, 0.2], np.zeros((5, 16)))
    b = Trajectory(g, [0.0, 0.1, 0.13, 0.2], np.zeros((4, 16)))
    ia, ib = shared_times(a, b)
    assert a.times[ia].tolist() == [0.0, 0.1, 0.13, 0.2]
    ia, ib = shared_times(a, b, interval=0.1)
    assert a.times[ia].tolist() == [0.0, 0.1, 0.2]
    assert b.times[ib].tolist() == [0.0, 0.1, 0.2]


def test_window_needs_two_times():
    g = Grid(40, 16)
    a = Trajectory(g, [0.0, 1.0], np.zeros((2, 16)))
    with pytest.raises(ConfigurationError):
        window_distance(a, a, (-10.0, 10.0, 0.1, 0.9))

# }}}


# {{{ sweeps

def test_duplicate_members_give_zero_row():
    cfg = small_config((0.04, 0.04), test_mode=True, certify_smallest=False)
    report = run_sweep(ic_peakon(0.5, 0.0, GRID), cfg)
    assert report.d == [0.0] and report.d_prime == [0.0]
    rows = cauchy_table(report)
    assert len(rows) == 1 and rows[0]["d"] == 0.0 and math.isnan(rows[0]["ratio"])


def test_zero_data_gives_zero_differences():
    cfg = small_config((0.08, 0.04, 0.02))
    report = run_sweep(GRID.zeros(), cfg)
    assert report.d == [0.0, 0.0] and report.d_prime == [0.0, 0.0]
    assert report.scale == 0.0
    assert report.monotone()
    assert report.certified


def test_single_member_gives_empty_table():
    report = run_sweep(ic_peakon(0.5, 0.0, GRID), small_config((0.04,), certify_smallest=False))
    assert cauchy_table(report) == []
    assert report.d == [] and len(report.trajectories) == 1
    assert report.monotone()


def test_ladder_behavior(ladder_report):
    report = ladder_report
    assert len(report.d) == 2 and len(report.d_prime) == 2
    assert report.d[1] < report.d[0] and report.d_prime[1] < report.d_prime[0]
    assert len(report.reference_distance) == 3
    assert set(report.bound_reports) == {"h1", "l1", "bv", "linf", "time_bv", "p_bounds"}
    assert len(report.certification.entries) == 4 * 3
    rows = cauchy_table(report)
    assert rows[1]["ratio"] == pytest.approx(report.d[1] / report.d[0])
    assert all(r < 1 for r in (rows[1]["ratio"], rows[1]["ratio_prime"]))
    # the coarse grid is flagged against the smallest viscosity
    assert any("under-resolved" in w for w in report.warnings)


def test_threaded_matches_sequential(monkeypatch, ladder_report):
    monkeypatch.setenv("GCH_THREADS", "0")
    seq = run_sweep(ic_peakon(0.5, 0.0, GRID), small_config((0.08, 0.04, 0.02)))
    monkeypatch.setenv("GCH_THREADS", "3")
    par = run_sweep(ic_peakon(0.5, 0.0, GRID), small_config((0.08, 0.04, 0.02)))
    assert seq.d == par.d == ladder_report.d
    assert seq.d_prime == par.d_prime
    for a, b in zip(seq.trajectories, par.trajectories):
        assert np.array_equal(a.values, b.values)
    assert seq.summary() == par.summary()


@pytest.mark.parametrize("threads", ["0", "2"])
def test_blowup_aborts_with_partial_report(monkeypatch, threads):
    monkeypatch.setenv("GCH_THREADS", threads)
    base = SolverConfig(epsilon=0.08, t_final=0.5, blowup_ceiling=3.0)
    cfg = small_config((0.08, 0.01), base=base)
    with pytest.raises(SweepBlowUp) as info:
        run_sweep(ic_peakon(0.5, 0.0, GRID), cfg)
    assert isinstance(info.value, BlowUpError)
    report = info.value.report
    assert report.aborted and "0.01" in report.aborted
    assert report.epsilons == [0.08] and len(report.trajectories) == 1
    assert not report.passed


def test_write_artifacts(tmp_path, ladder_report):
    paths = ladder_report.write(tmp_path, trajectories=True)
    with open(paths["sweep"]) as inf:
        summary = json.load(inf)
    assert summary["epsilons"] == [0.08, 0.04, 0.02]
    assert summary["d"] == ladder_report.d
    assert (tmp_path / "member_02" / "manifest.json").exists()
    assert (tmp_path / "certification.json").exists()
    assert (tmp_path / "bound_l1.csv").exists()

    with open(paths["cauchy"]) as inf:
        rows = list(csv.reader(inf))
    assert tuple(rows[0]) == CAUCHY_COLUMNS
    assert float(rows[1][1]) == ladder_report.d[0]
    assert rows[1][3] == "nan"


def test_cauchy_csv_round_trip(tmp_path):
    rows = [{"epsilon": 0.04, "d": 0.1, "d_prime": 0.3, "ratio": float("nan"),
             "ratio_prime": float("nan")},
            {"epsilon": 0.02, "d": 1 / 3, "d_prime": 0.2, "ratio": 10 / 3, "ratio_prime": 2 / 3}]
    path = tmp_path / "c.csv"
    write_cauchy_csv(rows, path)
    with open(path) as inf:
        back = list(csv.DictReader(inf))
    assert float(back[1]["d"]) == 1 / 3
    assert float(back[1]["ratio_prime"]) == 2 / 3

# }}}

# vim: foldmethod=marker
