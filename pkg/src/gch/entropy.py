r"""
Weak form and entropy inequality
--------------------------------

Discrete checks of the distributional identities satisfied by the limit
:math:`\varepsilon \to 0`. For a test function :math:`\varphi` the weak
form is

.. math::

    \int_0^\infty \!\! \int \Big( u \varphi_t - 2 u^2 \varphi_x
        + (\partial_x P_1 + \partial_x^2 P_2) \varphi \Big)
        \,\mathrm{d}x \,\mathrm{d}t
    + \int u_0 \varphi(0, \cdot) \,\mathrm{d}x = 0,

and for a convex entropy :math:`\eta` with flux :math:`q' = u \eta'` and
:math:`\varphi \ge 0` the entropy inequality is

.. math::

    \int_0^\infty \!\! \int \Big( \eta(u) \varphi_t - 4 q(u) \varphi_x
        + \eta'(u) (\partial_x P_1 + \partial_x^2 P_2) \varphi \Big)
        \,\mathrm{d}x \,\mathrm{d}t
    + \int \eta(u_0) \varphi(0, \cdot) \,\mathrm{d}x \ge 0.

A viscous trajectory satisfies both only up to the viscous term. Multiplying
the viscous equation by :math:`\eta'(u) \varphi` gives exactly

.. math::

    \text{left side} = -\varepsilon \iint \eta(u) \varphi_{xx}
        + \varepsilon \iint \eta''(u) u_x^2 \varphi,

so every residual is reported twice: *raw*, and *corrected* by adding
:math:`\varepsilon \iint \eta(u) \varphi_{xx}` back. The corrected entropy
residual is the entropy production, which is nonnegative for convex
:math:`\eta`; the corrected weak residual vanishes up to discretization
error.

All integrals are tensor trapezoid sums on the solver's own snapshots: the
trapezoid rule in :math:`t` and the periodic sum :math:`h \sum_i` in
:math:`x`. :math:`P_1, P_2` are recomputed from each snapshot and the
derivatives of :math:`\varphi` are evaluated in closed form.

.. autoclass:: EntropyPair
.. autofunction:: pair_quadratic
.. autofunction:: pair_linear
.. autofunction:: pair_kruzkov_smooth
.. autoclass:: TestFunction
.. autofunction:: random_bumps
.. autoclass:: Residual
.. autofunction:: weak_residual
.. autofunction:: entropy_residual
.. autoclass:: CertificationReport
.. autofunction:: certify
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from gch.errors import ConfigurationError
from gch.grid import Grid, Trajectory
from gch.helmholtz import helmholtz_solver
from gch.io import write_json
from gch.solver import nonlocal_forcing

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1.0e-6
MIN_SNAPSHOTS_PER_BUMP = 8

# snapshots are processed in blocks to bound memory on fine grids
_BLOCK = 256


# {{{ entropy pairs

RealFunction = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class EntropyPair:
    """A convex entropy :math:`\\eta` with flux :math:`q`,
    :math:`q'(u) = u \\eta'(u)`. Additive constants of either are
    immaterial to the entropy functional.

    All callables act elementwise on arrays.
    """

    eta: RealFunction
    eta_prime: RealFunction
    flux: RealFunction
    label: str
    eta_second: Optional[RealFunction] = None


def pair_quadratic() -> EntropyPair:
    """:math:`\\eta = u^2/2`, :math:`q = u^3/3`."""
    return EntropyPair(
        eta=lambda u: 0.5 * np.asarray(u)**2,
        eta_prime=lambda u: np.asarray(u, dtype=np.float64),
        flux=lambda u: np.asarray(u)**3 / 3.0,
        label="quadratic",
        eta_second=lambda u: np.ones_like(np.asarray(u, dtype=np.float64)))


def pair_linear() -> EntropyPair:
    """:math:`\\eta = u`, :math:`q = u^2/2`. The entropy functional of this
    pair coincides with the weak form term by term."""
    return EntropyPair(
        eta=lambda u: np.asarray(u, dtype=np.float64),
        eta_prime=lambda u: np.ones_like(np.asarray(u, dtype=np.float64)),
        flux=lambda u: 0.5 * np.asarray(u)**2,
        label="linear",
        eta_second=lambda u: np.zeros_like(np.asarray(u, dtype=np.float64)))


def pair_kruzkov_smooth(k: float, delta: float) -> EntropyPair:
    """Smoothed Kruzkov entropy
    :math:`\\eta_\\delta(u) = \\sqrt{(u-k)^2 + \\delta^2} - \\delta`.

    The flux :math:`q(u) = \\int_k^u s \\eta_\\delta'(s) \\,\\mathrm{d}s` is
    integrated in closed form. With :math:`a = u - k` and
    :math:`r = \\sqrt{a^2 + \\delta^2}`,

    .. math::

        q = \\tfrac12 \\left(a r - \\delta^2 \\operatorname{arsinh}(a/\\delta)\\right)
            + k (r - \\delta),

    which tends to :math:`\\operatorname{sgn}(u-k) (u^2 - k^2)/2` as
    :math:`\\delta \\to 0`. Here :math:`q(k) = 0`.
    """
    k = float(k)
    delta = float(delta)
    if not delta > 0:
        raise ConfigurationError(f"smoothing parameter must be positive: {delta!r}")

    def root(u):
        return np.hypot(np.asarray(u, dtype=np.float64) - k, delta)

    def flux(u):
        a = np.asarray(u, dtype=np.float64) - k
        r = np.hypot(a, delta)
        return 0.5 * (a * r - delta**2 * np.arcsinh(a / delta)) + k * (r - delta)

    return EntropyPair(
        eta=lambda u: root(u) - delta,
        eta_prime=lambda u: (np.asarray(u, dtype=np.float64) - k) / root(u),
        flux=flux,
        label=f"kruzkov(k={k:g},delta={delta:g})",
        eta_second=lambda u: delta**2 / root(u)**3)

# }}}


# {{{ test functions

def _bump(z: np.ndarray) -> np.ndarray:
    """:math:`\\psi(z) = e^{1 + 1/(z^2 - 1)}` on :math:`|z| < 1`, with
    :math:`\\psi(0) = 1`."""
    inside = np.abs(z) < 1.0
    zz = np.where(inside, z, 0.0)
    return np.where(inside, np.exp(zz * zz / (zz * zz - 1.0)), 0.0)


def _bump_derivatives(z: np.ndarray):
    """:math:`(\\psi, \\psi', \\psi'')` at *z*."""
    z = np.asarray(z, dtype=np.float64)
    psi = _bump(z)
    inside = psi > 0
    zz = np.where(inside, z, 0.0)
    m = zz * zz - 1.0

    g1 = -2.0 * zz / m**2
    g2 = -2.0 / m**2 + 8.0 * zz * zz / m**3
    return psi, np.where(inside, psi * g1, 0.0), np.where(inside, psi * (g1 * g1 + g2), 0.0)


@dataclass(frozen=True)
class TestFunction:
    """Separable bump :math:`\\varphi(t, x) = \\psi((t - t_c)/w_t)\\,
    \\psi(d(x, x_c)/w_x)`, where :math:`d` is the signed periodic distance
    and :math:`\\psi` the unit-height mollifier profile.

    :math:`\\varphi` is smooth, nonnegative and vanishes outside
    :math:`[t_c - w_t, t_c + w_t] \\times [x_c - w_x, x_c + w_x]`. The time
    support may start before :math:`t = 0`, in which case
    :math:`\\varphi(0, \\cdot) \\ne 0` and the initial-data term is active.
    """

    __test__ = False  # not a pytest class

    t_center: float
    t_width: float
    x_center: float
    x_width: float

    def __post_init__(self) -> None:
        for name in ("t_center", "t_width", "x_center", "x_width"):
            value = float(getattr(self, name))
            if not np.isfinite(value):
                raise ConfigurationError(f"test function {name} must be finite")
            object.__setattr__(self, name, value)
        if not (self.t_width > 0 and self.x_width > 0):
            raise ConfigurationError("test function widths must be positive")
        if self.t_center + self.t_width <= 0:
            raise ConfigurationError("test function support lies before t = 0")

    @property
    def t_support(self):
        return (self.t_center - self.t_width, self.t_center + self.t_width)

    def params(self) -> Dict[str, float]:
        return {"t_center": self.t_center, "t_width": self.t_width,
                "x_center": self.x_center, "x_width": self.x_width}

    def time_factor(self, t):
        """:math:`(\\psi, \\partial_t \\psi)` of the time factor."""
        psi, dpsi, _ = _bump_derivatives((np.asarray(t, dtype=np.float64) - self.t_center)
                                         / self.t_width)
        return psi, dpsi / self.t_width

    def space_factor(self, grid: Grid):
        """:math:`(\\psi, \\partial_x \\psi, \\partial_x^2 \\psi)` of the space
        factor at the grid nodes."""
        psi, dpsi, d2psi = _bump_derivatives(grid.periodic_distance(self.x_center)
                                             / self.x_width)
        return psi, dpsi / self.x_width, d2psi / self.x_width**2

    def __call__(self, t, x):
        d = np.asarray(x, dtype=np.float64) - self.x_center
        return (_bump((np.asarray(t, dtype=np.float64) - self.t_center) / self.t_width)
                * _bump(d / self.x_width))

    def validate(self, traj: Trajectory) -> None:
        """Check that the support fits the trajectory window and is resolved
        by at least :data:`MIN_SNAPSHOTS_PER_BUMP` snapshots."""
        t_lo, t_hi = self.t_support
        if t_hi > traj.t_final * (1.0 + 1.0e-12):
            raise ConfigurationError(
                f"test function support ends at t = {t_hi:g}, "
                f"after the trajectory ({traj.t_final:g})")
        if 2.0 * self.x_width >= traj.grid.length:
            raise ConfigurationError("test function is wider than the torus")

        inside = np.count_nonzero((traj.times > t_lo) & (traj.times < t_hi))
        if inside < MIN_SNAPSHOTS_PER_BUMP:
            raise ConfigurationError(
                f"test function spans {inside} snapshots, "
                f"need at least {MIN_SNAPSHOTS_PER_BUMP}")


def random_bumps(count: int, t_final: float, seed: int = 42,
                 x_range=(-5.0, 5.0), x_width_range=(0.5, 3.0),
                 t_width_fraction=(0.15, 0.45)) -> List[TestFunction]:
    """*count* admissible bumps with time support strictly inside
    :math:`(0, t_\\mathrm{final})`, drawn from a seeded generator."""
    if count < 0:
        raise ConfigurationError("bump count must be nonnegative")
    if not t_final > 0:
        raise ConfigurationError("final time must be positive")

    rng = np.random.default_rng(seed)
    bumps = []
    for _ in range(count):
        t_width = t_final * rng.uniform(*t_width_fraction)
        t_center = rng.uniform(t_width, t_final - t_width)
        bumps.append(TestFunction(
            t_center=t_center, t_width=t_width,
            x_center=rng.uniform(*x_range), x_width=rng.uniform(*x_width_range)))
    return bumps

# }}}


# {{{ residuals

@dataclass(frozen=True)
class Residual:
    """Signed value of a weak-form or entropy functional.

    .. attribute:: raw

        The functional as stated for the inviscid limit.

    .. attribute:: corrected

        ``raw`` plus the viscous term :math:`\\varepsilon \\iint \\eta(u) \\varphi_{xx}`.

    .. attribute:: scale

        :math:`\\iint |\\text{integrand}| + \\int |\\text{initial term}|`,
        the natural magnitude against which ``raw`` and ``corrected`` are
        compared.
    """

    raw: float
    corrected: float
    scale: float
    viscous: float

    def __float__(self) -> float:
        return self.corrected

    def to_dict(self) -> Dict[str, float]:
        return {"raw": self.raw, "corrected": self.corrected,
                "scale": self.scale, "viscous": self.viscous}


def _functional(traj: Trajectory, phi: TestFunction, eta: RealFunction,
                eta_prime: RealFunction, flux_factor: RealFunction,
                initial: RealFunction, u0: Optional[np.ndarray]) -> Residual:
    """Shared quadrature of
    :math:`\\iint \\eta \\varphi_t - F \\varphi_x + \\eta' P \\varphi`, with
    ``flux_factor`` returning :math:`F`."""
    if traj.formulation != "u":
        raise ConfigurationError("residuals are defined for u-trajectories")
    phi.validate(traj)

    grid = traj.grid
    h = grid.h
    solver = helmholtz_solver(grid)
    px, px_x, px_xx = phi.space_factor(grid)
    pt, pt_t = phi.time_factor(traj.times)

    nt = len(traj)
    main = np.zeros(nt)
    absolute = np.zeros(nt)
    viscous = np.zeros(nt)

    active = np.flatnonzero((pt != 0) | (pt_t != 0))
    for start in range(0, len(active), _BLOCK):
        idx = active[start:start + _BLOCK]
        u = traj.values[idx]
        a = pt[idx, None]
        b = pt_t[idx, None]

        forcing = nonlocal_forcing(u, h, solver)
        e = eta(u)
        integrand = (e * (b * px) - flux_factor(u) * (a * px_x)
                     + eta_prime(u) * forcing * (a * px))

        main[idx] = h * np.sum(integrand, axis=1)
        absolute[idx] = h * np.sum(np.abs(integrand), axis=1)
        viscous[idx] = h * np.sum(e * (a * px_xx), axis=1)

    raw = float(np.trapezoid(main, traj.times))
    scale = float(np.trapezoid(absolute, traj.times))
    visc = traj.epsilon * float(np.trapezoid(viscous, traj.times))

    phi0, _ = phi.time_factor(0.0)
    if phi0 != 0:
        start_values = traj.values[0] if u0 is None else np.asarray(u0, dtype=np.float64)
        init = float(phi0) * px * initial(start_values)
        raw += h * float(np.sum(init))
        scale += h * float(np.sum(np.abs(init)))

    return Residual(raw=raw, corrected=raw + visc, scale=scale, viscous=visc)


def weak_residual(traj: Trajectory, phi: TestFunction,
                  u0: Optional[np.ndarray] = None) -> Residual:
    """Weak-form residual of *traj* against *phi*.

    :arg u0: initial data for the :math:`\\int u_0 \\varphi(0)` term,
        defaulting to the first snapshot.
    """
    return _functional(
        traj, phi,
        eta=lambda u: u,
        eta_prime=lambda u: 1.0,
        flux_factor=lambda u: 2.0 * u * u,
        initial=lambda u: u,
        u0=u0)


def entropy_residual(traj: Trajectory, pair: EntropyPair, phi: TestFunction,
                     u0: Optional[np.ndarray] = None,
                     paper_literal: bool = False) -> Residual:
    r"""Entropy functional of *traj* for *pair* against *phi*.

    The initial-data term is :math:`\int \eta(u_0) \varphi(0)`. Adding a
    constant to :math:`\eta` or :math:`q` then leaves the functional
    unchanged, so the pair is evaluated as :math:`(\eta - \eta(0), q - q(0))`,
    which removes the quadrature error of integrating constants against
    :math:`\varphi_t` and :math:`\varphi_x`.

    With *paper_literal* the initial term is :math:`\int \eta'(u_0)
    \varphi(0)` instead. That variant is not invariant under constants:
    since :math:`\iint c\, \varphi_t = -c \int \varphi(0)`, the shifted
    pair is still used inside and the initial term becomes
    :math:`\int (\eta'(u_0) - \eta(0)) \varphi(0)`, which is the same
    functional.
    """
    eta0 = float(pair.eta(0.0))
    flux0 = float(pair.flux(0.0))

    def eta(u):
        return pair.eta(u) - eta0

    def flux(u):
        return pair.flux(u) - flux0

    if paper_literal:
        def initial(u):
            return pair.eta_prime(u) - eta0
    else:
        initial = eta

    return _functional(
        traj, phi,
        eta=eta,
        eta_prime=pair.eta_prime,
        flux_factor=lambda u: 4.0 * flux(u),
        initial=initial,
        u0=u0)

# }}}


# {{{ certification

@dataclass
class CertificationEntry:
    pair: str
    phi_params: Dict[str, float]
    weak_residual: Residual
    entropy_residual: Residual
    passed: bool

    def to_dict(self) -> Dict[str, Any]:
        return {"pair": self.pair, "phi_params": self.phi_params,
                "weak_residual": self.weak_residual.to_dict(),
                "entropy_residual": self.entropy_residual.to_dict(),
                "passed": self.passed}


@dataclass
class CertificationReport:
    """Outcome of :func:`certify` over a cross product of pairs and bumps.

    An entry passes when its corrected entropy residual is at least
    ``-tolerance * max(1, scale)``.
    """

    entries: List[CertificationEntry]
    tolerance: float = DEFAULT_TOLERANCE
    paper_literal: bool = False
    warnings: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(entry.passed for entry in self.entries)

    def worst_margin(self) -> float:
        """Smallest corrected entropy residual relative to
        :math:`\\max(1, \\text{scale})`, or ``inf`` for an empty report."""
        if not self.entries:
            return np.inf
        return min(e.entropy_residual.corrected / max(1.0, e.entropy_residual.scale)
                   for e in self.entries)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "entries": [e.to_dict() for e in self.entries],
            "tolerances": {"entropy_relative": self.tolerance},
            "paper_literal": self.paper_literal,
            "passed": self.passed,
            "warnings": list(self.warnings),
        }

    def write(self, path) -> None:
        write_json(self.to_dict(), path)


def entropy_passes(res: Residual, tolerance: float = DEFAULT_TOLERANCE) -> bool:
    return res.corrected >= -tolerance * max(1.0, abs(res.scale))


def certify(traj: Trajectory, pairs: Sequence[EntropyPair],
            phis: Sequence[TestFunction], tolerance: float = DEFAULT_TOLERANCE,
            u0: Optional[np.ndarray] = None,
            paper_literal: bool = False) -> CertificationReport:
    """Evaluate weak and entropy residuals for every (pair, bump)
    combination. An empty pair or bump list passes vacuously, with a
    warning."""
    warnings = []
    if not pairs or not phis:
        message = "certification ran with no " + ("entropy pairs" if not pairs
                                                   else "test functions")
        logger.warning(message)
        warnings.append(message)

    weak = [weak_residual(traj, phi, u0=u0) for phi in phis] if pairs else []

    entries = []
    for pair in pairs:
        for phi, wres in zip(phis, weak):
            eres = entropy_residual(traj, pair, phi, u0=u0, paper_literal=paper_literal)
            entries.append(CertificationEntry(
                pair=pair.label, phi_params=phi.params(),
                weak_residual=wres, entropy_residual=eres,
                passed=entropy_passes(eres, tolerance)))

    return CertificationReport(entries=entries, tolerance=tolerance,
                               paper_literal=paper_literal, warnings=warnings)

# }}}

# vim: foldmethod=marker
