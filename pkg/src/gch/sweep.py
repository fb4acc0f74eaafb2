r"""
Vanishing-viscosity sweep
-------------------------

Runs the viscous solver along a decreasing ladder
:math:`\varepsilon_0 > \varepsilon_1 > \dots` on one shared grid and
measures the Cauchy behavior of :math:`u_\varepsilon` and
:math:`\partial_x u_\varepsilon` in :math:`L^2_\mathrm{loc}`, realized as the
space-time :math:`L^2` norm over a fixed compact window

.. math::

    d_k = \Big( \int_{t_\mathrm{lo}}^{t_\mathrm{hi}} \!\! \int_{x_\mathrm{lo}}^{x_\mathrm{hi}}
        |u_{\varepsilon_k} - u_{\varepsilon_{k+1}}|^2 \,\mathrm{d}x \,\mathrm{d}t \Big)^{1/2},

with :math:`d'_k` defined likewise for :math:`D u`. All members record
snapshots at the same output times, so differences are taken without
interpolation. Strict decrease of :math:`d_k` is a stronger empirical
statement than the subsequential convergence the compactness argument
provides, and is reported as such.

.. autoclass:: SweepConfig
.. autoclass:: SweepReport
.. autofunction:: run_sweep
.. autofunction:: cauchy_table
"""

from __future__ import annotations

import dataclasses
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from gch.entropy import (
    CertificationReport, certify, pair_kruzkov_smooth, pair_quadratic, random_bumps)
from gch.errors import BlowUpError, ConfigurationError
from gch.estimates import BoundReport, InitialNorms, run_checks
from gch.grid import GridFunction, Trajectory, ddx, format_float
from gch.initialdata import mollifier_kernel, mollify
from gch.io import write_json
from gch.solver import SolverConfig, run, save_trajectory

logger = logging.getLogger(__name__)

DEFAULT_EPSILONS = (0.04, 0.02, 0.01, 0.005)
DEFAULT_MOLLIFIER_WIDTH = 0.1
KRUZKOV_LEVELS = (-1.0, 0.0, 1.0)
KRUZKOV_DELTA = 1.0e-3


def sweep_threads(n_jobs: int) -> int:
    """Worker count from ``GCH_THREADS`` (``0`` means sequential), capped by
    the number of jobs."""
    raw = os.environ.get("GCH_THREADS")
    if raw is None or raw.strip() == "":
        limit = os.cpu_count() or 1
    else:
        try:
            limit = int(raw)
        except ValueError as exc:
            raise ConfigurationError(f"GCH_THREADS must be an integer: {raw!r}") from exc
        if limit < 0:
            raise ConfigurationError("GCH_THREADS must be nonnegative")
    return min(limit, n_jobs)


@dataclass(frozen=True)
class SweepConfig:
    """Parameters of an :math:`\\varepsilon` sweep.

    .. attribute:: base

        Solver settings shared by every member; its ``epsilon`` is replaced
        per member. Every member hits the multiples of ``output_interval``
        (default ``t_final / 100``) exactly, and differences are taken at
        these shared times.

    .. attribute:: window

        ``(x_lo, x_hi, t_lo, t_hi)``; ``t_hi = None`` means ``t_final``.

    .. attribute:: mollifier_width

        Shared mollification width of the initial data. ``None`` couples the
        width to each member's viscosity.

    .. attribute:: test_mode

        Allows repeated viscosities (non-strict decrease), for checks with
        identical members.
    """

    epsilons: Tuple[float, ...] = DEFAULT_EPSILONS
    base: SolverConfig = dataclasses.field(
        default_factory=lambda: SolverConfig(epsilon=DEFAULT_EPSILONS[0], t_final=1.0))
    window: Tuple[float, float, float, Optional[float]] = (-10.0, 10.0, 0.1, None)
    mollifier_width: Optional[float] = DEFAULT_MOLLIFIER_WIDTH
    test_mode: bool = False
    entropy_seed: int = 42
    n_bumps: int = 12
    certify_smallest: bool = True

    def __post_init__(self) -> None:
        eps = tuple(float(e) for e in self.epsilons)
        object.__setattr__(self, "epsilons", eps)
        if not eps:
            raise ConfigurationError("sweep needs at least one viscosity")
        if any(not e > 0 for e in eps):
            raise ConfigurationError("viscosity must be positive")
        steps = np.diff(eps)
        if self.test_mode:
            if np.any(steps > 0):
                raise ConfigurationError("viscosities must be nonincreasing")
        elif np.any(steps >= 0):
            raise ConfigurationError("viscosities must be strictly decreasing")

        if not isinstance(self.base, SolverConfig):
            raise ConfigurationError("sweep base must be a SolverConfig")
        if self.base.output_interval is None:
            object.__setattr__(self, "base", dataclasses.replace(
                self.base, output_interval=self.base.t_final / 100.0))

        x_lo, x_hi, t_lo, t_hi = self.window
        t_hi = self.base.t_final if t_hi is None else float(t_hi)
        if not (x_lo < x_hi and 0.0 <= t_lo < t_hi <= self.base.t_final):
            raise ConfigurationError(f"bad compact window {self.window!r}")
        object.__setattr__(self, "window", (float(x_lo), float(x_hi), float(t_lo), t_hi))

    def member(self, epsilon: float) -> SolverConfig:
        return dataclasses.replace(self.base, epsilon=epsilon)

    def to_dict(self) -> Dict[str, Any]:
        return {"epsilons": list(self.epsilons), "base": self.base.to_dict(),
                "window": list(self.window), "mollifier_width": self.mollifier_width,
                "test_mode": self.test_mode, "entropy_seed": self.entropy_seed,
                "n_bumps": self.n_bumps}


@dataclass
class SweepReport:
    """Result of :func:`run_sweep`. ``d`` and ``d_prime`` have one entry per
    consecutive pair of members; ``trajectories`` is aligned with
    ``epsilons``."""

    config: SweepConfig
    epsilons: List[float]
    trajectories: List[Trajectory]
    d: List[float] = field(default_factory=list)
    d_prime: List[float] = field(default_factory=list)
    scale: float = 0.0
    reference: Optional[GridFunction] = None
    reference_distance: List[float] = field(default_factory=list)
    bound_reports: Dict[str, BoundReport] = field(default_factory=dict)
    certification: Optional[CertificationReport] = None
    aborted: Optional[str] = None
    warnings: List[str] = field(default_factory=list)

    def monotone(self) -> bool:
        """Strict decrease of :math:`d_k` and :math:`d'_k`, allowing one
        non-monotone pair per sequence when both values are below
        :math:`10^{-6}` times the window norm of the largest-viscosity run."""
        return (_strictly_decreasing(self.d, 1.0e-6 * self.scale)
                and _strictly_decreasing(self.d_prime, 1.0e-6 * self.scale))

    @property
    def certified(self) -> bool:
        bounds_ok = all(r.passed for r in self.bound_reports.values())
        entropy_ok = self.certification is None or self.certification.passed
        return bounds_ok and entropy_ok

    @property
    def passed(self) -> bool:
        return self.aborted is None and self.monotone() and self.certified

    def summary(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {
            "config": self.config.to_dict(),
            "epsilons": self.epsilons,
            "d": self.d,
            "d_prime": self.d_prime,
            "scale": self.scale,
            "reference_distance": self.reference_distance,
            "monotone": self.monotone(),
            "aborted": self.aborted,
            "warnings": self.warnings,
            "members": [{"epsilon": t.epsilon, "snapshots": len(t),
                         "t_final": t.t_final} for t in self.trajectories],
        }
        out["bounds"] = {name: {"passed": r.passed,
                                "min_relative_margin": r.min_relative_margin()}
                         for name, r in self.bound_reports.items()}
        if self.certification is not None:
            out["certification"] = {
                "passed": self.certification.passed,
                "worst_margin": self.certification.worst_margin(),
                "entries": len(self.certification.entries)}
        out["passed"] = self.passed
        return out

    def write(self, directory, trajectories: bool = True) -> Dict[str, str]:
        """Write ``sweep.json``, ``cauchy.csv`` and, optionally, every member
        trajectory; returns the written paths."""
        os.makedirs(directory, exist_ok=True)
        paths = {}
        paths["sweep"] = os.path.join(directory, "sweep.json")
        write_json(self.summary(), paths["sweep"])
        paths["cauchy"] = os.path.join(directory, "cauchy.csv")
        write_cauchy_csv(cauchy_table(self), paths["cauchy"])
        if self.certification is not None:
            paths["certification"] = os.path.join(directory, "certification.json")
            self.certification.write(paths["certification"])
        for name, report in self.bound_reports.items():
            stem = os.path.join(directory, f"bound_{name}")
            report.write(stem)
            paths[f"bound_{name}"] = stem + ".json"
            paths[f"bound_{name}_csv"] = stem + ".csv"
        if trajectories:
            for k, traj in enumerate(self.trajectories):
                sub = os.path.join(directory, f"member_{k:02d}")
                save_trajectory(traj, sub)
                paths[f"member_{k:02d}"] = os.path.join(sub, "manifest.json")
        return paths


def _strictly_decreasing(values: Sequence[float], floor: float) -> bool:
    exceptions = 0
    for a, b in zip(values[:-1], values[1:]):
        if b < a:
            continue
        if a <= floor and b <= floor:
            exceptions += 1
            continue
        return False
    return exceptions <= 1


# {{{ differences

def shared_times(a: Trajectory, b: Trajectory,
                 interval: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Indices into *a* and *b* of the snapshot times both record. With
    *interval*, only multiples of it (and the final time) are used."""
    tol = 1.0e-12 * max(1.0, a.t_final, b.t_final)
    keep = np.ones(len(a), dtype=bool)
    if interval is not None:
        k = np.round(a.times / interval)
        keep = (np.abs(a.times - k * interval) <= tol) | (a.times == a.t_final)

    pos = np.clip(np.searchsorted(b.times, a.times), 1, len(b) - 1)
    near = np.where(np.abs(b.times[pos - 1] - a.times) <= np.abs(b.times[pos] - a.times),
                    pos - 1, pos)
    hit = keep & (np.abs(b.times[near] - a.times) <= tol)
    return np.flatnonzero(hit), near[hit]


def _window_weights(times: np.ndarray, x: np.ndarray, window):
    """Time indices, trapezoid weights and spatial mask of the window."""
    x_lo, x_hi, t_lo, t_hi = window
    xmask = (x >= x_lo) & (x <= x_hi)
    tol = 1.0e-12 * max(1.0, t_hi)
    tidx = np.flatnonzero((times >= t_lo - tol) & (times <= t_hi + tol))
    if len(tidx) < 2:
        raise ConfigurationError("compact window holds fewer than two shared snapshots")

    dt = np.diff(times[tidx])
    weights = np.zeros(len(tidx))
    weights[:-1] += 0.5 * dt
    weights[1:] += 0.5 * dt
    return tidx, weights, xmask


def window_distance(a: Trajectory, b: Trajectory, window, derivative: bool = False,
                    interval: Optional[float] = None) -> float:
    """Space-time :math:`L^2` distance of two trajectories over *window*,
    using only the snapshot times they share (see :func:`shared_times`)."""
    if a.grid != b.grid:
        raise ConfigurationError("sweep members must share one grid")

    ia, ib = shared_times(a, b, interval)
    tidx, weights, xmask = _window_weights(a.times[ia], a.grid.x, window)
    diff = a.values[ia[tidx]] - b.values[ib[tidx]]
    if derivative:
        diff = ddx(diff, a.grid.h)
    per_time = a.grid.h * np.sum(diff[:, xmask]**2, axis=1)
    return float(np.sqrt(np.dot(weights, per_time)))


def window_norm(traj: Trajectory, window, interval: Optional[float] = None) -> float:
    ia, _ = shared_times(traj, traj, interval)
    tidx, weights, xmask = _window_weights(traj.times[ia], traj.grid.x, window)
    per_time = traj.grid.h * np.sum(traj.values[ia[tidx]][:, xmask]**2, axis=1)
    return float(np.sqrt(np.dot(weights, per_time)))

# }}}


class SweepBlowUp(BlowUpError):
    """A member run blew up; :attr:`report` holds the partial sweep."""

    def __init__(self, message: str, report: SweepReport, **kwargs) -> None:
        super().__init__(message, **kwargs)
        self.report = report


def _initial_field(u0: GridFunction, width: float) -> GridFunction:
    return mollify(u0, mollifier_kernel(width, u0.grid))


def run_sweep(u0: GridFunction, cfg: SweepConfig) -> SweepReport:
    """Run every member of the ladder from the (unmollified) data *u0*,
    then reduce differences and certify the smallest-viscosity member.

    :raises SweepBlowUp: if any member blows up; the partial report lists
        the members that finished.
    """
    grid = u0.grid
    report = SweepReport(config=cfg, epsilons=list(cfg.epsilons), trajectories=[])

    eps_min = min(cfg.epsilons)
    if grid.h > eps_min / 4.0:
        message = (f"grid spacing h = {grid.h:g} exceeds eps_min/4 = {eps_min / 4.0:g}; "
                   "viscous layers of the smallest member are under-resolved")
        logger.warning(message)
        report.warnings.append(message)

    def member(eps: float) -> Trajectory:
        width = eps if cfg.mollifier_width is None else cfg.mollifier_width
        return run(_initial_field(u0, width), cfg.member(eps))

    n_threads = sweep_threads(len(cfg.epsilons))
    results: List[Any] = []
    if n_threads <= 1:
        for eps in cfg.epsilons:
            try:
                results.append(member(eps))
            except BlowUpError as exc:
                results.append(exc)
                break
    else:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            futures = [pool.submit(member, eps) for eps in cfg.epsilons]
            for fut in futures:
                try:
                    results.append(fut.result())
                except BlowUpError as exc:
                    results.append(exc)

    for eps, res in zip(cfg.epsilons, results):
        if isinstance(res, BlowUpError):
            report.aborted = f"member eps={eps:g} blew up: {res}"
            report.trajectories = [r for r in results if isinstance(r, Trajectory)]
            report.epsilons = [t.epsilon for t in report.trajectories]
            raise SweepBlowUp(report.aborted, report, stats=res.stats, time=res.time)

    # reduction runs in ladder order, independent of thread scheduling
    trajs: List[Trajectory] = results
    report.trajectories = trajs
    interval = cfg.base.output_interval
    report.scale = window_norm(trajs[0], cfg.window, interval)
    for a, b in zip(trajs[:-1], trajs[1:]):
        report.d.append(window_distance(a, b, cfg.window, interval=interval))
        report.d_prime.append(window_distance(a, b, cfg.window, derivative=True,
                                              interval=interval))

    last = trajs[-1]
    if len(trajs) >= 2:
        ia, ib = shared_times(last, trajs[-2], interval)
        ref = Trajectory(grid, last.times[ia],
                         0.5 * (last.values[ia] + trajs[-2].values[ib]), epsilon=last.epsilon)
    else:
        ref = last
    report.reference = ref.snapshot(len(ref) - 1)
    report.reference_distance = [window_distance(t, ref, cfg.window, interval=interval)
                                 for t in trajs]

    if cfg.certify_smallest:
        smallest = trajs[-1]
        report.bound_reports = run_checks(smallest, InitialNorms.from_field(u0))
        pairs = [pair_quadratic()] + [pair_kruzkov_smooth(k, KRUZKOV_DELTA)
                                      for k in KRUZKOV_LEVELS]
        bumps = random_bumps(cfg.n_bumps, smallest.t_final, seed=cfg.entropy_seed)
        report.certification = certify(smallest, pairs, bumps)

    return report


def cauchy_table(report: SweepReport) -> List[Dict[str, float]]:
    """Rows ``(eps_k, d_k, d'_k, ratio_k, ratio'_k)``, where ``ratio_k`` is
    :math:`d_k / d_{k-1}` (``nan`` for the first row and for a zero
    predecessor)."""
    rows = []
    for k, (d, dp) in enumerate(zip(report.d, report.d_prime)):
        ratio = ratio_p = float("nan")
        if k > 0:
            prev, prev_p = report.d[k - 1], report.d_prime[k - 1]
            ratio = d / prev if prev > 0 else float("nan")
            ratio_p = dp / prev_p if prev_p > 0 else float("nan")
        rows.append({"epsilon": report.epsilons[k], "d": d, "d_prime": dp,
                     "ratio": ratio, "ratio_prime": ratio_p})
    return rows


CAUCHY_COLUMNS = ("epsilon", "d", "d_prime", "ratio", "ratio_prime")


def write_cauchy_csv(rows: List[Dict[str, float]], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as outf:
        outf.write(",".join(CAUCHY_COLUMNS) + "\n")
        for row in rows:
            outf.write(",".join(format_float(row[c]) for c in CAUCHY_COLUMNS) + "\n")

# vim: foldmethod=marker
