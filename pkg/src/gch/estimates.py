r"""
A-priori bounds
---------------

Each check compares a norm measured along a trajectory with the analytic
bound it must respect, in terms of the norms of the *unmollified* initial
data :math:`u_0`:

* :func:`check_h1`: :math:`E(t) = \|u\|^2_{H^1}` against :math:`E(0)`.
* :func:`check_l1`: :math:`\|u_x\|_{L^1}` against
  :math:`\|u_0'\|_{L^1} + 8 \|u_0\|^2_{H^1} t`.
* :func:`check_bv`: :math:`\|u_{xx}\|_{L^1}` against
  :math:`\|u_0'\|_{BV} + 18 \|u_0\|^2_{H^1} t`.
* :func:`check_linf`: :math:`\|u_x\|_{L^\infty}`, same bound as the BV check.
* :func:`check_time_bv`: :math:`\|\partial_t u_x\|_{L^1}` against :math:`C_t`,
  see :func:`time_bv_constant`.
* :func:`check_p_bounds`: :math:`\|P_1\|_{L^2}, \|\partial_x P_1\|_{L^2},
  \|P_2\|_{L^2}, \|P_1\|_{L^\infty}` against
  :math:`(6, 6, 1, 6) \cdot \|u_0\|^2_{H^1}`.

The :math:`H^1` check is stated for the squared norm, the dimensionally
consistent reading of the energy inequality, and additionally records the
defect of the integrated energy identity
:math:`E(t) - E(0) + 2 \varepsilon \int_0^t D`.

.. autoclass:: InitialNorms
.. autoclass:: BoundReport
.. autofunction:: time_bv_constant
.. autofunction:: blowup_functional
.. autofunction:: run_checks
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional

import numpy as np

from gch.errors import ConfigurationError
from gch.grid import GridFunction, Trajectory, ddx, derivative, norm_h1, norm_l1, seminorm_bv
from gch.helmholtz import helmholtz_solver
from gch.io import write_json
from gch.solver import rhs_function

DEFAULT_TOLERANCE = 1.0e-6

CHECKS = ("h1", "l1", "bv", "linf", "time_bv", "p_bounds")


@dataclass(frozen=True)
class InitialNorms:
    """Norms of the initial data that enter the bounds."""

    slope_l1: float
    slope_bv: float
    h1: float

    @property
    def h1_squared(self) -> float:
        return self.h1**2

    @classmethod
    def from_field(cls, u0: GridFunction) -> "InitialNorms":
        q0 = derivative(u0)
        return cls(slope_l1=norm_l1(q0), slope_bv=seminorm_bv(q0), h1=norm_h1(u0))


@dataclass
class BoundReport:
    """Measured norms against their bound along a trajectory.

    ``passed`` holds iff every margin satisfies
    ``margin >= -tolerance * max(1, bound)``.

    .. attribute:: components

        For checks that bundle several quantities, maps each name to a
        ``(measured, bound)`` pair of arrays; the top-level series then
        follows the component with the smallest margin at each time.
    """

    bound_name: str
    times: np.ndarray
    measured: np.ndarray
    bound: np.ndarray
    tolerance: float = DEFAULT_TOLERANCE
    components: Dict[str, Any] = field(default_factory=dict)
    extra: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=np.float64)
        self.measured = np.asarray(self.measured, dtype=np.float64)
        self.bound = np.asarray(self.bound, dtype=np.float64)

    @property
    def margin(self) -> np.ndarray:
        return self.bound - self.measured

    @property
    def passed(self) -> bool:
        if len(self.times) == 0:
            return True
        allowed = -self.tolerance * np.maximum(1.0, self.bound)
        return bool(np.all(self.margin >= allowed))

    def min_relative_margin(self) -> float:
        """:math:`\\min_t` margin / max(bound, tiny); +inf for an empty report."""
        if len(self.times) == 0:
            return np.inf
        scale = np.maximum(np.abs(self.bound), np.finfo(np.float64).tiny)
        return float(np.min(self.margin / scale))

    def to_dict(self) -> Dict[str, Any]:
        result = {
            "bound_name": self.bound_name,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "series": [
                {"t": t, "measured": m, "bound": b, "margin": b - m}
                for t, m, b in zip(self.times, self.measured, self.bound)],
            }
        if self.components:
            result["components"] = {
                name: {"measured": m, "bound": b}
                for name, (m, b) in self.components.items()}
        if self.extra:
            result["extra"] = self.extra
        return result

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["bound_name", "t", "measured", "bound", "margin"])
        for t, m, b in zip(self.times, self.measured, self.bound):
            writer.writerow([self.bound_name] + [f"{v:.17g}" for v in (t, m, b, b - m)])
        return buf.getvalue()

    def write(self, stem) -> List[str]:
        """Write ``<stem>.json`` and ``<stem>.csv``; return both paths."""
        write_json(self.to_dict(), f"{stem}.json")
        with open(f"{stem}.csv", "w", encoding="utf-8", newline="") as outf:
            outf.write(self.to_csv())
        return [f"{stem}.json", f"{stem}.csv"]


# {{{ helpers

def _require_u(traj: Trajectory) -> None:
    if traj.formulation != "u":
        raise ConfigurationError("bound checks need a trajectory of the u variable")


def _energy(traj: Trajectory) -> np.ndarray:
    h = traj.grid.h
    q = ddx(traj.values, h)
    return h * (np.sum(traj.values**2, axis=1) + np.sum(q * q, axis=1))


def _cumulative_dissipation(traj: Trajectory) -> np.ndarray:
    if traj.dissipation is not None:
        return traj.dissipation

    # fall back to the trapezoid rule on the snapshot times
    h = traj.grid.h
    q = ddx(traj.values, h)
    d = h * (np.sum(q * q, axis=1) + np.sum(ddx(q, h)**2, axis=1))
    steps = 0.5 * np.diff(traj.times) * (d[1:] + d[:-1])
    return np.concatenate([[0.0], np.cumsum(steps)])


def _norms(traj: Trajectory, u0_norms: Optional[InitialNorms]) -> InitialNorms:
    if u0_norms is None:
        return InitialNorms.from_field(traj.snapshot(0))
    return u0_norms


def l1_bound(t, norms: InitialNorms):
    return norms.slope_l1 + 8.0 * norms.h1_squared * np.asarray(t)


def bv_bound(t, norms: InitialNorms):
    return norms.slope_bv + 18.0 * norms.h1_squared * np.asarray(t)


def time_bv_constant(t, norms: InitialNorms):
    """:math:`C_t = \\|u_0'\\|_{BV} / t + 3 (\\|u_0'\\|_{BV} + 18 \\|u_0\\|^2_{H^1} t)^2
    + 4 \\|u_0\\|^2_{H^1}`, for :math:`t > 0`."""
    t = np.asarray(t, dtype=np.float64)
    if np.any(t <= 0):
        raise ConfigurationError("the time-BV bound is only defined for t > 0")
    return norms.slope_bv / t + 3.0 * bv_bound(t, norms)**2 + 4.0 * norms.h1_squared

# }}}


# {{{ checks

def check_h1(traj: Trajectory, tolerance: float = DEFAULT_TOLERANCE) -> BoundReport:
    _require_u(traj)
    energy = _energy(traj)
    defect = np.abs(energy - energy[0] + 2.0 * traj.epsilon * _cumulative_dissipation(traj))
    relative = defect / energy[0] if energy[0] > 0 else defect

    return BoundReport(
        "h1", traj.times, energy, np.full_like(energy, energy[0]), tolerance,
        extra={"energy_defect": defect, "relative_energy_defect": relative,
               "max_relative_energy_defect": float(np.max(relative))})


def check_l1(traj: Trajectory, u0_norms: Optional[InitialNorms] = None,
             tolerance: float = DEFAULT_TOLERANCE) -> BoundReport:
    _require_u(traj)
    norms = _norms(traj, u0_norms)
    h = traj.grid.h
    measured = h * np.sum(np.abs(traj.slopes()), axis=1)
    return BoundReport("l1", traj.times, measured, l1_bound(traj.times, norms), tolerance)


def check_bv(traj: Trajectory, u0_norms: Optional[InitialNorms] = None,
             tolerance: float = DEFAULT_TOLERANCE) -> BoundReport:
    _require_u(traj)
    norms = _norms(traj, u0_norms)
    h = traj.grid.h
    measured = h * np.sum(np.abs(ddx(traj.slopes(), h)), axis=1)
    return BoundReport("bv", traj.times, measured, bv_bound(traj.times, norms), tolerance)


def check_linf(traj: Trajectory, u0_norms: Optional[InitialNorms] = None,
               tolerance: float = DEFAULT_TOLERANCE) -> BoundReport:
    _require_u(traj)
    norms = _norms(traj, u0_norms)
    measured = np.max(np.abs(traj.slopes()), axis=1)
    return BoundReport("linf", traj.times, measured, bv_bound(traj.times, norms), tolerance)


def check_time_bv(traj: Trajectory, u0_norms: Optional[InitialNorms] = None,
                  tolerance: float = DEFAULT_TOLERANCE) -> BoundReport:
    """:math:`\\|\\partial_t q\\|_{L^1}` with :math:`\\partial_t q = D(\\mathrm{rhs}(u))`,
    the exact time derivative of the semi-discrete system. Snapshots at
    :math:`t = 0` are skipped."""
    _require_u(traj)
    norms = _norms(traj, u0_norms)
    h = traj.grid.h
    solver = helmholtz_solver(traj.grid)
    func = rhs_function("u", traj.scheme)

    mask = traj.times > 0
    times = traj.times[mask]
    measured = np.array([
        h * np.sum(np.abs(ddx(func(u, traj.epsilon, h, solver), h)))
        for u in traj.values[mask]])
    bound = time_bv_constant(times, norms) if len(times) else np.zeros(0)

    return BoundReport("time_bv", times, measured, bound, tolerance)


def p_norms(u: np.ndarray, h: float, solver) -> Dict[str, float]:
    q = ddx(u, h)
    p1 = solver.solve(2.0 * q * q + 6.0 * u * u)
    p2 = solver.solve(q * q)
    return {
        "p1_l2": float(np.sqrt(h * np.sum(p1 * p1))),
        "dx_p1_l2": float(np.sqrt(h * np.sum(ddx(p1, h)**2))),
        "p2_l2": float(np.sqrt(h * np.sum(p2 * p2))),
        "p1_linf": float(np.max(np.abs(p1))),
        }


P_BOUND_FACTORS = {"p1_l2": 6.0, "dx_p1_l2": 6.0, "p2_l2": 1.0, "p1_linf": 6.0}


def check_p_bounds(traj: Trajectory, u0_norms: Optional[InitialNorms] = None,
                   tolerance: float = DEFAULT_TOLERANCE) -> BoundReport:
    _require_u(traj)
    norms = _norms(traj, u0_norms)
    h = traj.grid.h
    solver = helmholtz_solver(traj.grid)

    rows = [p_norms(u, h, solver) for u in traj.values]
    components = {}
    for name, factor in P_BOUND_FACTORS.items():
        measured = np.array([r[name] for r in rows])
        components[name] = (measured, np.full_like(measured, factor * norms.h1_squared))

    names = list(components)
    margins = np.array([components[n][1] - components[n][0] for n in names])
    binding = np.argmin(margins, axis=0) if len(traj.times) else np.zeros(0, dtype=int)
    idx = np.arange(len(traj.times))
    measured = np.array([components[n][0] for n in names])[binding, idx]
    bound = np.array([components[n][1] for n in names])[binding, idx]

    return BoundReport("p_bounds", traj.times, measured, bound, tolerance,
                       components=components,
                       extra={"binding": [names[b] for b in binding]})


def blowup_value(u: np.ndarray, h: float) -> float:
    q = ddx(u, h)
    return float(np.max(np.abs(q)) + np.max(np.abs(ddx(q, h))))


def blowup_functional(u: GridFunction) -> float:
    """:math:`\\|u_x\\|_{L^\\infty} + \\|u_{xx}\\|_{L^\\infty}`, the quantity whose
    growth signals loss of regularity."""
    return blowup_value(u.values, u.grid.h)


def run_checks(traj: Trajectory, u0_norms: Optional[InitialNorms] = None,
               enabled: Optional[Iterable[str]] = None,
               tolerance: float = DEFAULT_TOLERANCE) -> Dict[str, BoundReport]:
    """Run the selected checks (all by default) and return them by name."""
    enabled = list(CHECKS if enabled is None else enabled)
    unknown = set(enabled) - set(CHECKS)
    if unknown:
        raise ConfigurationError(f"unknown checks: {sorted(unknown)}")

    reports = {}
    for name in enabled:
        if name == "h1":
            reports[name] = check_h1(traj, tolerance)
        else:
            check = globals()[f"check_{name}"]
            reports[name] = check(traj, u0_norms, tolerance)

    return reports

# }}}

# vim: foldmethod=marker
