"""Smoke suite of the exact, closed-form identities every module must
satisfy. Each case is small enough that the whole suite runs in a few
seconds; :func:`run_selftest` is what ``gch selftest`` executes."""

from __future__ import annotations

import json
import logging
import os
import tempfile
import time
from dataclasses import dataclass
from typing import Callable, List

import numpy as np

from gch import entropy, estimates, grid as gridmod, helmholtz, initialdata, solver, sweep
from gch.grid import Grid, GridFunction, Trajectory

CASES: List[Callable[[], None]] = []


def case(func: Callable[[], None]) -> Callable[[], None]:
    CASES.append(func)
    return func


@dataclass
class CaseResult:
    name: str
    passed: bool
    message: str
    seconds: float


def _close(a, b, tol=1.0e-12):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    err = float(np.max(np.abs(a - b))) if a.size else 0.0
    if not err <= tol * max(1.0, float(np.max(np.abs(b))) if b.size else 1.0):
        raise AssertionError(f"max deviation {err:.3e} exceeds {tol:.1e}")


def _check(condition: bool, message: str) -> None:
    if not condition:
        raise AssertionError(message)


G = Grid(40.0, 256)


def _zero_traj(n_times: int = 201, t_final: float = 1.0) -> Trajectory:
    return Trajectory(G, np.linspace(0.0, t_final, n_times), np.zeros((n_times, G.n)),
                      epsilon=0.01, dissipation=np.zeros(n_times))


def _constant_traj(c: float, n_times: int = 201, t_final: float = 1.0) -> Trajectory:
    return Trajectory(G, np.linspace(0.0, t_final, n_times), np.full((n_times, G.n), c),
                      epsilon=0.01, dissipation=np.zeros(n_times))


# {{{ grid

@case
def grid_derivative_of_constant():
    _close(gridmod.derivative(G.constant(3.0)).values, 0.0, 0.0)


@case
def grid_norms_of_zero():
    z = G.zeros()
    for f in (gridmod.norm_l1, gridmod.norm_l2, gridmod.norm_linf, gridmod.norm_h1):
        _check(f(z) == 0.0, f"{f.__name__}(0) != 0")


@case
def grid_discrete_delta():
    v = np.zeros(G.n)
    v[7] = 1.0 / G.h
    _close(gridmod.norm_l1(GridFunction(G, v)), 1.0)


@case
def grid_h1_of_constant():
    _close(gridmod.norm_h1(G.constant(2.5)), 2.5 * np.sqrt(G.length))


@case
def grid_bv_of_constant_and_spike():
    _check(gridmod.seminorm_bv(G.constant(1.7)) == 0.0, "TV of a constant")
    v = np.zeros(G.n)
    v[10] = 0.75
    _close(gridmod.seminorm_bv(GridFunction(G, v)), 1.5)

# }}}


# {{{ helmholtz

@case
def helmholtz_constant_fixed():
    _close(helmholtz.green_convolve(G.constant(1.0)).values, 1.0)


@case
def helmholtz_dx_of_constant():
    _close(helmholtz.green_dx(G.constant(2.0)).values, 0.0)


@case
def helmholtz_dx_commutes():
    f = GridFunction(G, np.random.default_rng(1).standard_normal(G.n))
    _close(helmholtz.green_dx(f).values,
           gridmod.derivative(helmholtz.green_convolve(f)).values, 1.0e-10)


@case
def helmholtz_dxx_of_one():
    _close(helmholtz.green_dxx(G.constant(1.0)).values, 0.0)


@case
def helmholtz_dxx_identity():
    f = GridFunction(G, np.random.default_rng(2).standard_normal(G.n))
    v = helmholtz.green_convolve(f)
    _close(helmholtz.green_dxx(f).values, gridmod.second_difference(v).values, 1.0e-10)

# }}}


# {{{ initial data

@case
def mollifier_unit_mass():
    for eps, n in ((0.5, 256), (0.2, 512), (1.3, 128)):
        g = Grid(40.0, n)
        k = initialdata.mollifier_kernel(eps, g)
        _close(g.h * np.sum(k.samples.values), 1.0)


@case
def mollify_constant():
    k = initialdata.mollifier_kernel(2.0, G)
    _close(initialdata.mollify(G.constant(0.8), k).values, 0.8)


@case
def peakon_peak_value():
    _check(initialdata.ic_peakon(1.0, 0.0, G).values[G.n // 2] == 1.0, "peak value")


@case
def gaussian_zero_amplitude():
    _close(initialdata.ic_gaussian(0.0, 1.0, G).values, 0.0, 0.0)


@case
def csv_round_trip():
    f = GridFunction(G, np.random.default_rng(3).standard_normal(G.n) * 1.0e3)
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "f.csv")
        gridmod.write_csv(f, path)
        g = initialdata.ic_from_csv(path, G)
    _check(np.array_equal(f.values, g.values), "CSV round trip is not bit-identical")

# }}}


# {{{ solver

@case
def p_fields_constant_and_zero():
    _close(solver.compute_p1(G.constant(0.5)).values, 6.0 * 0.25)
    _close(solver.compute_p1(G.zeros()).values, 0.0, 0.0)
    _close(solver.compute_p2(G.constant(0.5)).values, 0.0, 0.0)
    _close(solver.compute_p2(G.zeros()).values, 0.0, 0.0)


@case
def rhs_steady_states():
    for f in (solver.rhs, solver.rhs_conservative):
        _close(f(G.constant(0.7), 0.01).values, 0.0)
        _close(f(G.zeros(), 0.01).values, 0.0, 0.0)
    _close(solver.rhs_w(G.constant(0.7), 0.01).values, 0.0)
    _close(solver.rhs_w(G.zeros(), 0.01).values, 0.0, 0.0)


@case
def stable_dt_formula():
    cfg = solver.SolverConfig(epsilon=0.01, t_final=1.0)
    _close(solver.stable_dt(G.zeros(), cfg),
           min(cfg.dt_max, cfg.cfl * G.h**2 / (2.0 * cfg.epsilon)))
    dts = [solver.stable_dt(G.zeros(), solver.SolverConfig(epsilon=e, t_final=1.0))
           for e in (10.0, 20.0)]
    _close(dts[1], 0.5 * dts[0])


@case
def step_preserves_steady_state():
    c = G.constant(0.3)
    _close(solver.step_ssprk3(c, 0.01, 0.01).values, 0.3, 1.0e-13)
    u = initialdata.ic_gaussian(1.0, 2.0, G)
    _check(np.array_equal(solver.step_ssprk3(u, 0.0, 0.01).values, u.values), "dt = 0")


@case
def run_zero_and_constant():
    cfg = solver.SolverConfig(epsilon=0.05, t_final=0.1)
    zero = solver.run(G.zeros(), cfg)
    _check(not np.any(zero.values), "zero data must stay zero")
    const = solver.run(G.constant(0.4), cfg)
    _close(const.values, 0.4, 1.0e-13)

# }}}


# {{{ estimates

@case
def estimates_zero_trajectory():
    reports = estimates.run_checks(_zero_traj())
    for name, rep in reports.items():
        _check(rep.passed, f"{name} fails on zero data")
        _check(np.all(rep.measured == 0.0), f"{name} measured nonzero")
    _check(np.all(reports["h1"].margin == 0.0), "h1 margins")


@case
def estimates_constant_trajectory():
    traj = _constant_traj(0.6)
    rep = estimates.check_h1(traj)
    _check(np.all(rep.measured == rep.measured[0]), "E(t) not constant")
    _check(rep.extra["max_relative_energy_defect"] == 0.0, "nonzero defect")
    norms = estimates.InitialNorms.from_field(G.constant(0.6))
    bv = estimates.check_bv(traj, norms)
    _check(np.all(bv.measured == 0.0) and np.all(bv.bound >= 0.0), "bv of a constant")
    p = estimates.check_p_bounds(traj, norms)
    _close(p.components["p1_linf"][0], 6.0 * 0.36)
    _check(p.passed, "p bounds for a constant")


@case
def estimates_initial_l1():
    g = Grid(40.0, 512)
    u0 = initialdata.ic_peakon(1.0, 0.0, g)
    um = initialdata.mollify(u0, initialdata.mollifier_kernel(0.5, g))
    traj = Trajectory(g, [0.0], um.values[None, :])
    rep = estimates.check_l1(traj, estimates.InitialNorms.from_field(u0))
    _close(rep.bound[0], gridmod.norm_l1(gridmod.derivative(u0)))
    _check(rep.passed, "mollified slope exceeds the initial L1 bound")


@case
def estimates_time_bv_bound_shape():
    norms = estimates.InitialNorms(slope_l1=2.0, slope_bv=4.0, h1=np.sqrt(2.0))
    t = np.linspace(0.5, 50.0, 200)
    c = estimates.time_bv_constant(t, norms)
    _check(np.all(np.diff(c) > 0), "C_t not increasing for t >= 1/2")
    _close(c[-1] / c[-2], (t[-1] / t[-2])**2, 5.0e-2)
    rep = estimates.check_time_bv(_zero_traj(), estimates.InitialNorms(0.0, 0.0, 0.0))
    _check(np.all(rep.measured == 0.0), "time BV of zero data")


@case
def blowup_functional_cases():
    _check(estimates.blowup_functional(G.zeros()) == 0.0, "zero field")
    g = Grid(40.0, 256)
    ramp = GridFunction(g, 0.3 * g.x)
    value = estimates.blowup_functional(ramp)
    # interior slope 0.3; the wrap cells carry the jump of the sawtooth
    _check(value >= 0.3, "ramp slope missing")
    interior = estimates.blowup_functional(GridFunction(g, np.where(
        np.abs(g.x) < 15.0, 0.3 * g.x, 0.0)))
    _check(interior >= 0.3, "ramp slope missing")

# }}}


# {{{ entropy

@case
def quadratic_flux_values():
    pair = entropy.pair_quadratic()
    _close(pair.flux(1.0), 1.0 / 3.0)
    _check(pair.flux(0.0) == 0.0, "flux(0)")
    _close(pair.flux(-2.0), -8.0 / 3.0)


@case
def kruzkov_vertex():
    for k in (-1.0, 0.0, 0.4):
        pair = entropy.pair_kruzkov_smooth(k, 1.0e-2)
        _check(pair.flux(k) == 0.0, "flux at the vertex")
        _check(pair.eta(k) == 0.0, "eta at the vertex")
        u = np.linspace(-5.0, 5.0, 101)
        _check(np.all(pair.eta(u) >= 0.0), "eta negative")


def _bump():
    return entropy.TestFunction(t_center=0.5, t_width=0.3, x_center=1.0, x_width=2.0)


@case
def weak_residual_zero_and_constant():
    _check(entropy.weak_residual(_zero_traj(), _bump()).raw == 0.0, "zero trajectory")
    # both integrands integrate to zero exactly; sampling fine enough that the
    # trapezoid sums of the bump derivatives vanish to rounding
    g = Grid(40.0, 1024)
    times = np.linspace(0.0, 1.0, 1201)
    traj = Trajectory(g, times, np.full((len(times), g.n), 0.5), epsilon=0.01)
    phi = entropy.TestFunction(t_center=0.5, t_width=0.45, x_center=1.0, x_width=8.0)
    res = entropy.weak_residual(traj, phi)
    _check(abs(res.raw) <= 1.0e-10 * max(1.0, res.scale), f"constant: {res.raw:.3e}")


@case
def entropy_residual_zero():
    res = entropy.entropy_residual(_zero_traj(), entropy.pair_quadratic(), _bump())
    _check(res.raw == 0.0 and res.corrected == 0.0, "zero trajectory")


@case
def linear_entropy_is_weak_form():
    rng = np.random.default_rng(5)
    traj = Trajectory(G, np.linspace(0.0, 1.0, 41), rng.standard_normal((41, G.n)), epsilon=0.02)
    phi = _bump()
    weak = entropy.weak_residual(traj, phi)
    ent = entropy.entropy_residual(traj, entropy.pair_linear(), phi)
    _close(ent.raw, weak.raw, 1.0e-12)
    _close(ent.corrected, weak.corrected, 1.0e-12)


@case
def certify_empty_and_zero():
    rep = entropy.certify(_zero_traj(), [], [_bump()])
    _check(rep.passed and rep.warnings, "empty pair list must pass with a warning")
    pairs = [entropy.pair_quadratic()] + [entropy.pair_kruzkov_smooth(k, 1.0e-3)
                                          for k in (-1.0, 0.0, 1.0)]
    rep = entropy.certify(_zero_traj(), pairs, entropy.random_bumps(4, 1.0))
    _check(rep.passed, "zero trajectory must pass")

# }}}


# {{{ sweep

def _tiny_sweep(epsilons, u0, test_mode=True):
    base = solver.SolverConfig(epsilon=epsilons[0], t_final=0.2, output_interval=0.02)
    cfg = sweep.SweepConfig(epsilons=epsilons, base=base, window=(-10.0, 10.0, 0.0, None),
                            mollifier_width=1.0, test_mode=test_mode,
                            certify_smallest=False)
    return sweep.run_sweep(u0, cfg)


@case
def sweep_duplicate_and_zero():
    u0 = initialdata.ic_gaussian(0.5, 1.5, G)
    rep = _tiny_sweep((0.05, 0.05), u0)
    _check(rep.d == [0.0] and rep.d_prime == [0.0], "duplicate members differ")
    rows = sweep.cauchy_table(rep)
    _check(len(rows) == 1 and rows[0]["d"] == 0.0, "duplicate row")
    rep = _tiny_sweep((0.05, 0.04, 0.03), G.zeros(), test_mode=False)
    _check(rep.d == [0.0, 0.0] and rep.d_prime == [0.0, 0.0], "zero data differences")


@case
def sweep_single_member():
    rep = _tiny_sweep((0.05,), initialdata.ic_gaussian(0.5, 1.5, G))
    _check(sweep.cauchy_table(rep) == [], "single-member table must be empty")

# }}}


# {{{ cli

@case
def cli_exit_codes():
    from gch.cli import main

    with tempfile.TemporaryDirectory() as tmp:
        missing = os.path.join(tmp, "nope.json")
        _check(main(["run", "--config", missing, "--out", tmp], quiet=True) == 2,
               "missing config")
        bad = os.path.join(tmp, "bad.json")
        with open(bad, "w") as outf:
            json.dump({"grid.N": 64, "solver.epsilon": 0.0}, outf)
        _check(main(["run", "--config", bad, "--out", tmp], quiet=True) == 2,
               "zero viscosity")

        traj_dir = os.path.join(tmp, "zero")
        solver.save_trajectory(_zero_traj(), traj_dir)
        _check(main(["certify", "--trajectory", traj_dir, "--out",
                     os.path.join(tmp, "cert")], quiet=True) == 0,
               "certify on the zero trajectory")

# }}}


def run_selftest() -> List[CaseResult]:
    # several cases provoke warnings on purpose
    pkg_logger = logging.getLogger("gch")
    level = pkg_logger.level
    pkg_logger.setLevel(logging.ERROR)
    try:
        return _run_cases()
    finally:
        pkg_logger.setLevel(level)


def _run_cases() -> List[CaseResult]:
    results = []
    for func in CASES:
        start = time.perf_counter()
        try:
            func()
            passed, message = True, ""
        except Exception as exc:  # reported, not raised
            passed, message = False, f"{type(exc).__name__}: {exc}"
        results.append(CaseResult(func.__name__, passed, message,
                                  time.perf_counter() - start))
    return results

# vim: foldmethod=marker
