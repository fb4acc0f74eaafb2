r"""
Viscous solver
--------------

Method-of-lines integration of the viscous problem

.. math::

    \partial_t u - 4 u \partial_x u
        = \partial_x P_1 + \partial_x^2 P_2 + \varepsilon \partial_x^2 u,
    \qquad
    P_1 = G \star (2 u_x^2 + 6 u^2), \quad P_2 = G \star u_x^2,

and of the equivalent transport form in :math:`w = -2 (2 - \partial_x) u`,

.. math::

    \partial_t w + w \partial_x w
        = -\partial_x G \star \left(\tfrac{3}{2} w^2\right)
          + \varepsilon \partial_x^2 w.

(The factor :math:`-2` is required: applying :math:`2 - \partial_x` to the
equation gives :math:`v_t = 2 v v_x + 3 \partial_x G \star v^2` for
:math:`v = (2 - \partial_x) u`, and :math:`w = -2 v` turns this into the
transport form above.)

Two spatial discretizations of the :math:`u` equation are provided:

``"nonlocal"``
    Direct assembly of the right-hand side from :math:`P_1, P_2` with the
    compact Helmholtz solve. :math:`4 u u_x` uses the skew-symmetric split
    :math:`\frac{4}{3} (u D u + D u^2)`, :math:`\partial_x^2 P_2` uses the
    identity :math:`P_2 - u_x^2`, and viscosity uses the compact
    :math:`D^2`. Its discrete :math:`H^1` energy balance holds only up to
    :math:`O(h^2)`.

``"conservative"`` (default)
    The same equation in the form
    :math:`(1 - \partial_x^2) u_t = (2 + \partial_x) \partial_x w^2 + \ldots`,
    discretized with the central difference :math:`D` only:

    .. math::

        u_t = (I - D D)^{-1} (2 + D) S(W) + \varepsilon D D u,
        \qquad W = (2 - D) u,
        \qquad S(W) = \tfrac{2}{3} (W \, D W + D W^2).

    With :math:`E = \|u\|^2 + \|D u\|^2` this gives exactly
    :math:`\mathrm{d}E / \mathrm{d}t = -2 \varepsilon (\|D u\|^2 + \|D D u\|^2)`
    for the semi-discrete system, so the integrated energy identity is only
    limited by the time integrator.

Time stepping is the three-stage SSP Runge-Kutta method with an adaptive
step bounded by an advective CFL condition (characteristic speed
:math:`2 u_x - 4 u`) and a diffusive one.

.. autoclass:: Formulation
.. autoclass:: SolverConfig
.. autoclass:: StepStats
.. autofunction:: compute_p1
.. autofunction:: compute_p2
.. autofunction:: rhs
.. autofunction:: rhs_conservative
.. autofunction:: rhs_w
.. autofunction:: w_from_u
.. autofunction:: stable_dt
.. autofunction:: step_ssprk3
.. autofunction:: run
.. autofunction:: formulation_gap
.. autofunction:: save_trajectory
.. autofunction:: load_trajectory
"""

from __future__ import annotations

import enum
import logging
import os
from dataclasses import asdict, dataclass, fields
from typing import Any, Callable, Dict, Optional

import numpy as np

from gch.errors import BlowUpError, ConfigurationError, GridMismatchError
from gch.grid import (
    Grid, GridFunction, Trajectory, check_same_grid, d2x, ddx, read_csv, write_csv)
from gch.helmholtz import HelmholtzSolver, helmholtz_solver
from gch.io import read_json, write_json

logger = logging.getLogger(__name__)

#: ``w = W_SCALE * (2 - D) u`` maps the u-variable onto the transport variable
W_SCALE = -2.0

SCHEMES = ("conservative", "nonlocal")


class Formulation(str, enum.Enum):
    U_FORM = "u"
    W_FORM = "w"


# {{{ configuration


@dataclass(frozen=True)
class SolverConfig:
    """Time-integration parameters.

    .. attribute:: epsilon

        Viscosity, strictly positive.

    .. attribute:: output_interval

        If set, steps are clipped so that every multiple of this interval is
        hit exactly and recorded as a snapshot. Runs that share an interval
        can be compared pointwise in time.
    """

    epsilon: float
    t_final: float
    cfl: float = 0.4
    dt_max: float = 0.05
    formulation: Formulation = Formulation.U_FORM
    snapshot_stride: int = 1
    scheme: str = "conservative"
    output_interval: Optional[float] = None
    blowup_ceiling: float = 1.0e6

    def __post_init__(self) -> None:
        object.__setattr__(self, "formulation", Formulation(self.formulation))

        if not (np.isfinite(self.epsilon) and self.epsilon > 0):
            raise ConfigurationError(
                f"viscosity must be positive (got epsilon = {self.epsilon!r})")
        if not (np.isfinite(self.t_final) and self.t_final > 0):
            raise ConfigurationError(f"t_final must be positive: {self.t_final!r}")
        if not 0 < self.cfl <= 1:
            raise ConfigurationError(f"cfl must lie in (0, 1]: {self.cfl!r}")
        if not self.dt_max > 0:
            raise ConfigurationError(f"dt_max must be positive: {self.dt_max!r}")
        if int(self.snapshot_stride) != self.snapshot_stride or self.snapshot_stride < 1:
            raise ConfigurationError("snapshot_stride must be a positive integer")
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"unknown scheme '{self.scheme}'; expected {SCHEMES}")
        if self.output_interval is not None and not self.output_interval > 0:
            raise ConfigurationError("output_interval must be positive")

    def to_dict(self) -> Dict[str, Any]:
        result = asdict(self)
        result["formulation"] = self.formulation.value
        return result

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SolverConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigurationError(f"unknown solver options: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class StepStats:
    dt_used: float
    advective_cfl: float
    diffusive_cfl: float
    rhs_linf: float

# }}}


# {{{ right-hand sides

def _solver_for(u: GridFunction) -> HelmholtzSolver:
    return helmholtz_solver(u.grid)


def _p_fields(u: np.ndarray, h: float, solver: HelmholtzSolver):
    q = ddx(u, h)
    p = solver.solve(np.stack([2.0 * q * q + 6.0 * u * u, q * q], axis=1))
    return q, p[:, 0], p[:, 1]


def compute_p1(u: GridFunction) -> GridFunction:
    """:math:`P_1 = G \\star (2 q^2 + 6 u^2)`, :math:`q = D u`."""
    q = ddx(u.values, u.grid.h)
    return GridFunction(u.grid, _solver_for(u).solve(2.0 * q * q + 6.0 * u.values**2))


def compute_p2(u: GridFunction) -> GridFunction:
    """:math:`P_2 = G \\star q^2`."""
    q = ddx(u.values, u.grid.h)
    return GridFunction(u.grid, _solver_for(u).solve(q * q))


def nonlocal_forcing(u: np.ndarray, h: float, solver: HelmholtzSolver) -> np.ndarray:
    """:math:`\\partial_x P_1 + \\partial_x^2 P_2` for one or many snapshots
    (rows of *u*)."""
    if u.ndim == 1:
        q, p1, p2 = _p_fields(u, h, solver)
        return ddx(p1, h) + p2 - q * q

    q = ddx(u, h)
    p1 = solver.solve((2.0 * q * q + 6.0 * u * u).T).T
    p2 = solver.solve((q * q).T).T
    return ddx(p1, h) + p2 - q * q


def _rhs_nonlocal(u: np.ndarray, epsilon: float, h: float,
                  solver: HelmholtzSolver) -> np.ndarray:
    q, p1, p2 = _p_fields(u, h, solver)
    advection = (4.0 / 3.0) * (u * q + ddx(u * u, h))
    return advection + ddx(p1, h) + (p2 - q * q) + epsilon * d2x(u, h)


def _rhs_conservative(u: np.ndarray, epsilon: float, h: float,
                      solver: HelmholtzSolver) -> np.ndarray:
    du = ddx(u, h)
    w = 2.0 * u - du
    s = (2.0 / 3.0) * (w * ddx(w, h) + ddx(w * w, h))
    return solver.solve_wide(2.0 * s + ddx(s, h)) + epsilon * ddx(du, h)


def _rhs_w(w: np.ndarray, epsilon: float, h: float,
           solver: HelmholtzSolver) -> np.ndarray:
    return -w * ddx(w, h) - ddx(solver.solve(1.5 * w * w), h) + epsilon * d2x(w, h)


_RHS = {
    ("u", "nonlocal"): _rhs_nonlocal,
    ("u", "conservative"): _rhs_conservative,
    ("w", "nonlocal"): _rhs_w,
    ("w", "conservative"): _rhs_w,
    }


def rhs_function(formulation=Formulation.U_FORM,
                 scheme: str = "conservative") -> Callable:
    """Array-level right-hand side ``f(values, epsilon, h, solver)``."""
    try:
        return _RHS[Formulation(formulation).value, scheme]
    except KeyError:
        raise ConfigurationError(f"unknown scheme '{scheme}'") from None


def rhs(u: GridFunction, epsilon: float) -> GridFunction:
    """Right-hand side assembled from the nonlocal terms,

    .. math::

        \\tfrac{4}{3} (u D u + D u^2) + D P_1 + (P_2 - q^2) + \\varepsilon D^2 u.

    *epsilon* may be zero here (used to evaluate limit candidates).
    """
    if epsilon < 0:
        raise ConfigurationError("viscosity must be nonnegative")
    return GridFunction(u.grid, _rhs_nonlocal(u.values, epsilon, u.grid.h, _solver_for(u)))


def rhs_conservative(u: GridFunction, epsilon: float) -> GridFunction:
    """Energy-consistent right-hand side, see the module documentation."""
    if epsilon < 0:
        raise ConfigurationError("viscosity must be nonnegative")
    return GridFunction(
        u.grid, _rhs_conservative(u.values, epsilon, u.grid.h, _solver_for(u)))


def rhs_w(w: GridFunction, epsilon: float) -> GridFunction:
    """:math:`-w D w - D G \\star (\\tfrac{3}{2} w^2) + \\varepsilon D^2 w`."""
    if epsilon < 0:
        raise ConfigurationError("viscosity must be nonnegative")
    return GridFunction(w.grid, _rhs_w(w.values, epsilon, w.grid.h, _solver_for(w)))


def w_from_u(u: GridFunction) -> GridFunction:
    """:math:`w = -2 (2 u - D u)`."""
    return GridFunction(u.grid, W_SCALE * (2.0 * u.values - ddx(u.values, u.grid.h)))

# }}}


# {{{ time stepping

def _speed(values: np.ndarray, h: float, formulation: Formulation) -> float:
    if formulation == Formulation.W_FORM:
        return float(np.max(np.abs(values)))
    return float(np.max(np.abs(4.0 * values - 2.0 * ddx(values, h))))


def _stable_dt(values, h, epsilon, cfl, dt_max, formulation) -> float:
    speed = max(np.finfo(np.float64).eps, _speed(values, h, formulation))
    return min(cfl * h / speed, cfl * h * h / (2.0 * epsilon), dt_max)


def stable_dt(u: GridFunction, config: SolverConfig) -> float:
    """:math:`\\min(\\mathrm{cfl}\\, h / \\|4u - 2q\\|_\\infty,\\;
    \\mathrm{cfl}\\, h^2 / 2\\varepsilon,\\; \\Delta t_{\\max})`.

    For the ``w`` formulation the speed is :math:`\\|w\\|_\\infty`, which is the
    same characteristic speed :math:`|2q - 4u|`.
    """
    return _stable_dt(u.values, u.grid.h, config.epsilon, config.cfl,
                      config.dt_max, config.formulation)


def _ssprk3(u: np.ndarray, dt: float, f: Callable[[np.ndarray], np.ndarray],
            k0: Optional[np.ndarray] = None) -> np.ndarray:
    if k0 is None:
        k0 = f(u)
    u1 = u + dt * k0
    u2 = 0.75 * u + 0.25 * (u1 + dt * f(u1))
    return u / 3.0 + (2.0 / 3.0) * (u2 + dt * f(u2))


def step_ssprk3(u: GridFunction, dt: float, epsilon: float,
                formulation=Formulation.U_FORM,
                scheme: str = "conservative") -> GridFunction:
    """One step of the three-stage, third-order SSP Runge-Kutta method.

    :raises BlowUpError: if the update is not finite.
    """
    if dt == 0:
        return u

    h = u.grid.h
    solver = _solver_for(u)
    func = rhs_function(formulation, scheme)
    k0 = func(u.values, epsilon, h, solver)
    result = _ssprk3(u.values, dt, lambda v: func(v, epsilon, h, solver), k0=k0)

    if not np.all(np.isfinite(result)):
        raise BlowUpError(
            "non-finite values after step",
            stats=StepStats(dt, dt * _speed(u.values, h, Formulation(formulation)) / h,
                            2.0 * epsilon * dt / h**2, float(np.max(np.abs(k0)))))

    return GridFunction(u.grid, result)


def _dissipation(u: np.ndarray, h: float) -> float:
    q = ddx(u, h)
    return float(h * (np.sum(q * q) + np.sum(ddx(q, h)**2)))


def run(u0: GridFunction, config: SolverConfig,
        callback: Optional[Callable[[float, np.ndarray], None]] = None) -> Trajectory:
    """Integrate from *u0* to ``config.t_final``.

    For :attr:`Formulation.W_FORM` the initial field is still given in the
    :math:`u` variable; it is mapped with :func:`w_from_u` and the returned
    trajectory holds :math:`w` snapshots.

    :raises BlowUpError: if a step is not finite or the blow-up functional
        exceeds ``config.blowup_ceiling``.
    """
    # imported here: estimates depends on this module
    from gch.estimates import blowup_value

    if not isinstance(config, SolverConfig):
        raise ConfigurationError("run() needs a SolverConfig")

    grid = u0.grid
    h = grid.h
    eps = config.epsilon
    formulation = config.formulation
    solver = helmholtz_solver(grid)
    func = rhs_function(formulation, config.scheme)

    def f(v):
        return func(v, eps, h, solver)

    u = (w_from_u(u0) if formulation == Formulation.W_FORM else u0).values.copy()
    track_energy = formulation == Formulation.U_FORM

    t_final = config.t_final
    time_tol = 1.0e-12 * max(1.0, t_final)
    interval = config.output_interval
    next_output = interval if interval is not None else np.inf

    times = [0.0]
    snapshots = [u.copy()]
    cumulative = [0.0]
    stats = {name: [] for name in ("time", "dt_used", "advective_cfl",
                                   "diffusive_cfl", "rhs_linf", "blowup")}

    t = 0.0
    nsteps = 0
    diss_prev = _dissipation(u, h) if track_energy else 0.0
    diss_total = 0.0

    while t < t_final - time_tol:
        speed = max(np.finfo(np.float64).eps, _speed(u, h, formulation))
        dt = min(config.cfl * h / speed, config.cfl * h * h / (2.0 * eps), config.dt_max)
        dt = min(dt, t_final - t, next_output - t)

        k0 = f(u)
        step = StepStats(dt, dt * speed / h, 2.0 * eps * dt / (h * h),
                         float(np.max(np.abs(k0))))
        u = _ssprk3(u, dt, f, k0=k0)

        t_new = t + dt
        hit_output = abs(t_new - next_output) <= time_tol
        if hit_output:
            t_new = next_output
            next_output += interval
        if abs(t_new - t_final) <= time_tol:
            t_new = t_final

        if not np.all(np.isfinite(u)):
            raise BlowUpError(f"non-finite values at t = {t_new:g}", stats=step, time=t_new)

        monitor = blowup_value(u, h)
        if monitor > config.blowup_ceiling:
            raise BlowUpError(
                f"blow-up functional {monitor:.3e} exceeds ceiling "
                f"{config.blowup_ceiling:.3e} at t = {t_new:g}", stats=step, time=t_new)

        if track_energy:
            diss = _dissipation(u, h)
            diss_total += 0.5 * (t_new - t) * (diss + diss_prev)
            diss_prev = diss

        t = t_new
        nsteps += 1
        for name, value in (("time", t), ("dt_used", step.dt_used),
                            ("advective_cfl", step.advective_cfl),
                            ("diffusive_cfl", step.diffusive_cfl),
                            ("rhs_linf", step.rhs_linf), ("blowup", monitor)):
            stats[name].append(value)

        if callback is not None:
            callback(t, u)

        if (nsteps % config.snapshot_stride == 0 or hit_output
                or t == t_final):
            times.append(t)
            snapshots.append(u.copy())
            cumulative.append(diss_total)

    logger.info("run finished: eps=%g, N=%d, %d steps, %d snapshots",
                eps, grid.n, nsteps, len(times))

    return Trajectory(
        grid=grid,
        times=np.array(times),
        values=np.array(snapshots),
        epsilon=eps,
        formulation=formulation.value,
        scheme=config.scheme,
        dissipation=np.array(cumulative) if track_energy else None,
        stats={k: np.array(v) for k, v in stats.items()},
        config=config.to_dict())


def formulation_gap(traj_u: Trajectory, traj_w: Trajectory) -> float:
    """:math:`\\max_t \\|(2u - D u) - w / W_{\\mathrm{scale}}\\|_{L^2}` over the
    snapshot times shared by a ``u`` and a ``w`` trajectory."""
    if traj_u.grid != traj_w.grid:
        raise GridMismatchError("trajectories live on different grids")
    if traj_u.formulation != "u" or traj_w.formulation != "w":
        raise ConfigurationError("expected one u-trajectory and one w-trajectory")

    h = traj_u.grid.h
    worst = 0.0
    shared = 0
    for k, t in enumerate(traj_u.times):
        j = int(np.argmin(np.abs(traj_w.times - t)))
        if abs(traj_w.times[j] - t) > 1.0e-10 * max(1.0, t):
            continue
        u = traj_u.values[k]
        diff = (2.0 * u - ddx(u, h)) - traj_w.values[j] / W_SCALE
        worst = max(worst, float(np.sqrt(h * np.sum(diff * diff))))
        shared += 1

    if shared == 0:
        raise ConfigurationError("trajectories share no snapshot times")
    return worst

# }}}


# {{{ serialization

def _snapshot_name(k: int) -> str:
    return f"snapshot_{k:05d}.csv"


def save_trajectory(traj: Trajectory, directory) -> Dict[str, Any]:
    """Write one ``x,value`` CSV per snapshot plus ``manifest.json``.

    Returns the manifest.
    """
    os.makedirs(directory, exist_ok=True)
    files = []
    for k, snap in enumerate(traj):
        name = _snapshot_name(k)
        write_csv(snap, os.path.join(directory, name))
        files.append(name)

    manifest = {
        "epsilon": traj.epsilon,
        "formulation": traj.formulation,
        "scheme": traj.scheme,
        "grid": {"L": traj.grid.length, "N": traj.grid.n},
        "times": traj.times,
        "files": files,
        "config": traj.config,
        "dissipation": traj.dissipation,
        "stats": traj.stats or {},
        }
    write_json(manifest, os.path.join(directory, "manifest.json"))
    return manifest


def load_trajectory(directory) -> Trajectory:
    """Inverse of :func:`save_trajectory`. Works for externally produced
    trajectories that provide ``times``, ``grid`` and ``files``."""
    path = os.path.join(directory, "manifest.json")
    try:
        manifest = read_json(path)
        grid = Grid(float(manifest["grid"]["L"]), int(manifest["grid"]["N"]))
        times = np.array(manifest["times"], dtype=np.float64)
        files = manifest["files"]
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigurationError(f"cannot read trajectory manifest '{path}': {exc}") from exc

    if len(files) != len(times):
        raise ConfigurationError(f"'{path}': {len(files)} files for {len(times)} times")

    values = np.array([read_csv(os.path.join(directory, name), grid=grid).values
                       for name in files])
    dissipation = manifest.get("dissipation")
    stats = manifest.get("stats") or None

    return Trajectory(
        grid=grid, times=times, values=values,
        epsilon=float(manifest.get("epsilon", 0.0)),
        formulation=manifest.get("formulation", "u"),
        scheme=manifest.get("scheme", "conservative"),
        dissipation=None if dissipation is None else np.array(dissipation, dtype=np.float64),
        stats=None if stats is None else {k: np.array(v) for k, v in stats.items()},
        config=manifest.get("config", {}))

# }}}

# vim: foldmethod=marker
