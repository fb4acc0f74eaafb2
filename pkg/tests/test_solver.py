import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from gch.errors import BlowUpError, ConfigurationError, GridMismatchError
from gch.grid import Grid, GridFunction, Trajectory, ddx, norm_h1
from gch.initialdata import ic_gaussian, ic_peakon, mollifier_kernel, mollify
from gch.solver import (
    W_SCALE, Formulation, SolverConfig, StepStats, compute_p1, compute_p2,
    formulation_gap, load_trajectory, rhs, rhs_conservative, rhs_w, run,
    save_trajectory, stable_dt, step_ssprk3, w_from_u)


def sine(g, amp=0.1):
    return GridFunction(g, amp * np.sin(2 * np.pi * g.x / g.length))


# {{{ independent dense oracles

def dense_ops(g):
    """Central difference D, compact D^2 and the periodic Helmholtz kernel as
    dense matrices, built without the package's difference routines."""
    n, h = g.n, g.h
    eye = np.eye(n)
    up = np.roll(eye, 1, axis=1)     # (up @ f)_i = f_{i+1}
    dn = np.roll(eye, -1, axis=1)    # (dn @ f)_i = f_{i-1}
    d1 = (up - dn) / (2 * h)
    d2 = (up - 2 * eye + dn) / h**2
    ginv = np.linalg.inv(eye - d2)
    return d1, d2, ginv


def dense_rhs(u, eps, g):
    d1, d2, ginv = dense_ops(g)
    q = d1 @ u
    p1 = ginv @ (2 * q**2 + 6 * u**2)
    p2 = ginv @ q**2
    adv = (4.0 / 3.0) * (u * q) + (4.0 / 3.0) * (d1 @ (u * u))
    # d^2 G f = G f - f for the compact second difference
    return adv + d1 @ p1 + (p2 - q**2) + eps * (d2 @ u)

# }}}


# {{{ configuration

def test_config_validation():
    with pytest.raises(ConfigurationError, match="viscosity must be positive"):
        SolverConfig(0.0, 1.0)
    with pytest.raises(ConfigurationError):
        SolverConfig(-0.1, 1.0)
    with pytest.raises(ConfigurationError):
        SolverConfig(0.01, 0.0)
    with pytest.raises(ConfigurationError):
        SolverConfig(0.01, 1.0, cfl=1.5)
    with pytest.raises(ConfigurationError):
        SolverConfig(0.01, 1.0, snapshot_stride=0)
    with pytest.raises(ConfigurationError):
        SolverConfig(0.01, 1.0, scheme="upwind")
    with pytest.raises(ValueError):
        SolverConfig(0.01, 1.0, formulation="v")


def test_config_round_trip():
    c = SolverConfig(0.02, 1.5, cfl=0.3, formulation="w", output_interval=0.1)
    assert SolverConfig.from_dict(c.to_dict()) == c
    assert c.to_dict()["formulation"] == "w"
    with pytest.raises(ConfigurationError):
        SolverConfig.from_dict({"epsilon": 0.1, "t_final": 1, "bogus": 1})

# }}}


# {{{ nonlocal terms

def test_p_fields_of_constants():
    g = Grid(40, 128)
    assert np.allclose(compute_p1(g.constant(0.7)).values, 6 * 0.49, atol=1e-13)
    assert np.array_equal(compute_p2(g.constant(0.7)).values, np.zeros(128))
    assert np.array_equal(compute_p1(g.zeros()).values, np.zeros(128))
    assert np.array_equal(compute_p2(g.zeros()).values, np.zeros(128))


def test_p1_against_quadrature_oracle():
    errs = []
    for n in (256, 512, 1024):
        g = Grid(40, n)
        u = ic_peakon(1.0, 0.0, g)
        q = ddx(u.values, g.h)
        f = 2 * q * q + 6 * u.values**2
        dist = (g.x[:, None] - g.x[None, :] + 20) % 40 - 20
        kernel = np.cosh(20 - np.abs(dist)) / (2 * np.sinh(20))
        oracle = g.h * kernel @ f
        errs.append(np.max(np.abs(compute_p1(u).values - oracle)))
    assert errs[0] <= 3e-3 * 2.6
    assert errs[0] / errs[1] >= 3.5 and errs[1] / errs[2] >= 3.5


def test_p1_bound_for_peakon():
    g = Grid(40, 4096)
    u = ic_peakon(1.0, 0.0, g)
    assert np.max(np.abs(compute_p1(u).values)) <= 6 * norm_h1(u)**2 * 1.05

# }}}


# {{{ right-hand sides

@pytest.mark.parametrize("func", [rhs, rhs_conservative])
def test_rhs_constants_are_steady(func):
    g = Grid(40, 128)
    assert np.max(np.abs(func(g.constant(1.3), 0.01).values)) <= 1e-13
    assert np.array_equal(func(g.zeros(), 0.01).values, np.zeros(128))


def test_rhs_w_constants_are_steady():
    g = Grid(40, 128)
    assert np.max(np.abs(rhs_w(g.constant(-2.0), 0.01).values)) <= 1e-13
    assert np.array_equal(rhs_w(g.zeros(), 0.01).values, np.zeros(128))


def test_rhs_matches_dense_oracle():
    g = Grid(40, 512)
    u = sine(g)
    expected = dense_rhs(u.values, 0.01, g)
    assert np.max(np.abs(rhs(u, 0.01).values - expected)) <= 1e-10


def test_rhs_matches_dense_oracle_rough_data(rng):
    g = Grid(40, 128)
    u = GridFunction(g, rng.standard_normal(128))
    assert np.allclose(rhs(u, 0.05).values, dense_rhs(u.values, 0.05, g),
                       rtol=0, atol=1e-10 * np.max(np.abs(dense_rhs(u.values, 0.05, g))))


def test_rhs_rejects_negative_viscosity():
    g = Grid(40, 64)
    for func in (rhs, rhs_conservative, rhs_w):
        with pytest.raises(ConfigurationError):
            func(g.zeros(), -1.0)
    # zero viscosity is fine for diagnostics
    rhs(g.zeros(), 0.0)


def test_schemes_agree_to_second_order():
    errs = []
    for n in (256, 512, 1024):
        u = ic_gaussian(0.5, 1.0, Grid(40, n))
        errs.append(np.max(np.abs(rhs(u, 0.01).values - rhs_conservative(u, 0.01).values)))
    assert errs[0] / errs[1] >= 3.5 and errs[1] / errs[2] >= 3.5


def test_rhs_w_consistency():
    """rhs_w(w(u)) against the image of rhs(u) under the linear map u -> w."""
    errs = []
    for n in (256, 512, 1024):
        u = ic_gaussian(0.5, 1.0, Grid(40, n))
        du = rhs(u, 0.01).values
        mapped = W_SCALE * (2 * du - ddx(du, u.grid.h))
        errs.append(np.max(np.abs(rhs_w(w_from_u(u), 0.01).values - mapped))
                    / np.max(np.abs(mapped)))
    assert errs[0] / errs[1] >= 3.5 and errs[1] / errs[2] >= 3.5
    assert errs[-1] < 1e-3


@settings(max_examples=30)
@given(arrays(np.float64, 64, elements=st.floats(-2, 2, allow_nan=False)),
       st.floats(0.001, 0.1))
def test_conservative_semidiscrete_energy_identity(values, eps):
    """<u, f> + <Du, Df> = -eps (|Du|^2 + |DDu|^2) for f = rhs_conservative(u)."""
    g = Grid(40, 64)
    h = g.h
    u = GridFunction(g, values)
    f = rhs_conservative(u, eps).values
    du = ddx(values, h)
    lhs = h * (np.dot(values, f) + np.dot(du, ddx(f, h)))
    expected = -eps * h * (np.dot(du, du) + np.sum(ddx(du, h)**2))
    scale = h * (np.sum(np.abs(values * f)) + np.sum(np.abs(du * ddx(f, h)))) + 1e-300
    assert abs(lhs - expected) <= 1e-11 * max(scale, abs(expected))

# }}}


# {{{ time stepping

def test_stable_dt_limits():
    g = Grid(40, 2048)
    cfg = SolverConfig(0.01, 1.0, cfl=0.4, dt_max=0.05)
    assert stable_dt(g.zeros(), cfg) == min(0.05, 0.4 * g.h**2 / 0.02)

    u = ic_peakon(1.0, 0.0, g)
    q = (np.roll(u.values, -1) - np.roll(u.values, 1)) / (2 * g.h)
    speed = np.max(np.abs(4 * u.values - 2 * q))
    hand = min(0.4 * g.h / speed, 0.4 * g.h**2 / 0.02, 0.05)
    assert stable_dt(u, cfg) == pytest.approx(hand, rel=1e-15)

    big = SolverConfig(10.0, 1.0)
    assert stable_dt(u, big) == pytest.approx(0.4 * g.h**2 / 20.0)
    coarse = Grid(40, 1024)
    ratio = stable_dt(coarse.zeros(), big) / stable_dt(g.zeros(), big)
    assert ratio == pytest.approx(4.0)


def test_step_steady_state_and_zero_dt():
    g = Grid(40, 256)
    c = g.constant(0.8)
    out = step_ssprk3(c, 0.01, 0.01)
    assert np.max(np.abs(out.values - 0.8)) <= 1e-13
    u = sine(g)
    assert np.array_equal(step_ssprk3(u, 0.0, 0.01).values, u.values)


@pytest.mark.parametrize("scheme", ["conservative", "nonlocal"])
def test_step_order_by_halving(scheme):
    g = Grid(40, 256)
    u = GridFunction(g, 0.1 * np.sin(2 * np.pi * g.x / 40) + 0.05 * np.cos(6 * np.pi * g.x / 40))
    diffs = []
    for dt in (0.04, 0.02, 0.01):
        one = step_ssprk3(u, dt, 0.01, scheme=scheme)
        two = step_ssprk3(step_ssprk3(u, dt / 2, 0.01, scheme=scheme), dt / 2, 0.01, scheme=scheme)
        diffs.append(np.max(np.abs(one.values - two.values)))
    # local error O(dt^4): halving dt divides the discrepancy by 16
    for a, b in zip(diffs, diffs[1:]):
        assert 14.0 <= a / b <= 18.0


def test_step_nonfinite_raises_with_stats():
    g = Grid(40, 64)
    u = GridFunction(g, np.full(64, 1e200) * np.sign(np.sin(g.x)))
    with pytest.raises(BlowUpError) as info, np.errstate(over="ignore", invalid="ignore"):
        step_ssprk3(u, 1.0, 0.01)
    assert isinstance(info.value.stats, StepStats)

# }}}


# {{{ runs

def test_run_zero_and_constant():
    g = Grid(40, 128)
    traj = run(g.zeros(), SolverConfig(0.01, 0.5))
    assert np.array_equal(traj.values, np.zeros_like(traj.values))
    assert traj.times[-1] == 0.5

    traj = run(g.constant(0.3), SolverConfig(0.01, 0.5))
    assert np.max(np.abs(traj.values - 0.3)) <= 1e-12


def test_run_schedule():
    g = Grid(40, 128)
    u0 = sine(g)
    traj = run(u0, SolverConfig(0.01, 0.37, snapshot_stride=5, output_interval=0.1))
    assert traj.times[0] == 0.0 and traj.times[-1] == 0.37
    assert np.all(np.diff(traj.times) > 0)
    for t in (0.1, 0.2, 0.3):
        assert np.min(np.abs(traj.times - t)) <= 1e-15
    assert len(traj.stats["dt_used"]) > len(traj.times) - 1
    for name in ("dt_used", "advective_cfl", "diffusive_cfl", "rhs_linf"):
        assert np.all(np.isfinite(traj.stats[name]))
    assert np.all(traj.stats["advective_cfl"] <= 0.4 + 1e-12)
    assert np.all(traj.stats["diffusive_cfl"] <= 0.4 + 1e-12)


def test_run_rejects_bad_config():
    with pytest.raises(ConfigurationError):
        run(Grid(40, 64).zeros(), {"epsilon": 0.01, "t_final": 1.0})


def test_run_blowup_ceiling():
    g = Grid(40, 256)
    with pytest.raises(BlowUpError) as info:
        run(ic_gaussian(1.0, 1.0, g), SolverConfig(0.01, 0.1, blowup_ceiling=0.1))
    assert info.value.time is not None and info.value.time > 0


def test_energy_identity_converges():
    defects = []
    # at N = 512 the run is still pre-asymptotic (ratio about 2.4)
    for n in (1024, 2048):
        g = Grid(40, n)
        u0 = mollify(ic_peakon(0.5, 0.0, g), mollifier_kernel(0.4, g))
        traj = run(u0, SolverConfig(0.01, 0.5))
        energy = np.array([norm_h1(s)**2 for s in traj])
        balance = energy + 2 * 0.01 * traj.dissipation - energy[0]
        defects.append(np.max(np.abs(balance)))
        # the H1 norm never grows beyond a small relative slack
        assert np.all(np.diff(np.sqrt(energy)) <= 1e-3 * np.sqrt(energy[0]))
    assert defects[0] / defects[1] >= 3.0


def test_formulation_agreement_improves():
    gaps = []
    for n in (256, 512, 1024):
        u = ic_gaussian(0.5, 1.0, Grid(40, n))
        tu = run(u, SolverConfig(0.01, 0.5, output_interval=0.05))
        tw = run(u, SolverConfig(0.01, 0.5, output_interval=0.05, formulation="w"))
        assert tw.formulation == "w" and tw.dissipation is None
        gaps.append(formulation_gap(tu, tw))
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[-1] < 2e-3


def test_formulation_gap_errors():
    g = Grid(40, 64)
    tu = run(g.zeros(), SolverConfig(0.01, 0.1))
    with pytest.raises(ConfigurationError):
        formulation_gap(tu, tu)
    tw = run(Grid(40, 32).zeros(), SolverConfig(0.01, 0.1, formulation="w"))
    with pytest.raises(GridMismatchError):
        formulation_gap(tu, tw)


def test_save_load_round_trip(tmp_path):
    g = Grid(40, 64)
    traj = run(sine(g), SolverConfig(0.01, 0.2, output_interval=0.1))
    manifest = save_trajectory(traj, tmp_path / "traj")
    assert manifest["grid"] == {"L": 40.0, "N": 64}
    assert (tmp_path / "traj" / "snapshot_00000.csv").exists()
    back = load_trajectory(tmp_path / "traj")
    assert np.array_equal(back.times, traj.times)
    assert np.array_equal(back.values, traj.values)
    assert np.array_equal(back.dissipation, traj.dissipation)
    assert back.epsilon == traj.epsilon and back.scheme == traj.scheme
    with pytest.raises(ConfigurationError):
        load_trajectory(tmp_path / "missing")

# }}}

# vim: foldmethod=marker
