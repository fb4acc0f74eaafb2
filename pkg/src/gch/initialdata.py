r"""
Initial data
------------

Admissible initial conditions (:math:`u_0 \in H^1`, :math:`u_0' \in L^1 \cap BV`)
and their regularization by the compactly supported mollifier

.. math::

    \varphi(x) = \begin{cases}
        e^{1/(x^2 - 1)}, & |x| < 1, \\
        0, & |x| \ge 1,
    \end{cases}
    \qquad
    \varphi_\varepsilon(x) = \frac{1}{\varepsilon \int \varphi}
        \varphi(x / \varepsilon).

.. autoclass:: MollifierKernel
.. autofunction:: mollifier_profile
.. autofunction:: mollifier_mass
.. autofunction:: mollifier_kernel
.. autofunction:: mollify
.. autofunction:: ic_peakon
.. autofunction:: ic_gaussian
.. autofunction:: ic_from_csv
.. autofunction:: make_initial_data
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Dict, Optional

import numpy as np
from scipy.integrate import quad

from gch.errors import ConfigurationError, UnderResolvedError
from gch.grid import Grid, GridFunction, PathLike, check_same_grid, read_csv


def mollifier_profile(z) -> np.ndarray:
    """Unnormalized bump :math:`e^{1/(z^2 - 1)}` on :math:`|z| < 1`, zero
    elsewhere."""
    z = np.asarray(z, dtype=np.float64)
    inside = np.abs(z) < 1.0
    zz = np.where(inside, z, 0.0)
    return np.where(inside, np.exp(1.0 / (zz * zz - 1.0)), 0.0)


@lru_cache(maxsize=1)
def mollifier_mass() -> float:
    """:math:`\\int_{-1}^{1} e^{1/(x^2 - 1)} \\,\\mathrm{d}x`, by adaptive
    quadrature."""
    mass, _ = quad(lambda x: float(mollifier_profile(x)), -1.0, 1.0,
                   epsabs=1.0e-14, epsrel=1.0e-13, limit=200)
    return mass


@dataclass(frozen=True)
class MollifierKernel:
    """Sampled :math:`\\varphi_\\varepsilon`, centered at :math:`x = 0` and
    renormalized so that :math:`h \\sum_i \\varphi_\\varepsilon(x_i) = 1`."""

    epsilon: float
    samples: GridFunction

    @property
    def grid(self) -> Grid:
        return self.samples.grid


def mollifier_kernel(epsilon: float, grid: Grid) -> MollifierKernel:
    if not epsilon > 2.0 * grid.h:
        raise UnderResolvedError(
            f"mollifier width {epsilon!r} must exceed two cells (2h = {2.0 * grid.h:g})")

    z = grid.periodic_distance(0.0) / epsilon
    values = mollifier_profile(z) / (epsilon * mollifier_mass())
    values /= grid.h * np.sum(values)

    return MollifierKernel(float(epsilon), GridFunction(grid, values))


def mollify(u0: GridFunction, kernel: MollifierKernel) -> GridFunction:
    """Periodic discrete convolution :math:`h \\sum_j \\varphi_\\varepsilon(x_i - x_j) u_j`."""
    grid = check_same_grid(u0, kernel.samples)

    center = grid.n // 2
    k = kernel.samples.values
    out = np.zeros(grid.n)
    for idx in np.flatnonzero(k):
        out += (grid.h * k[idx]) * np.roll(u0.values, idx - center)

    return GridFunction(grid, out)


# {{{ initial conditions

def ic_peakon(c: float, x0: float, grid: Grid) -> GridFunction:
    """Peaked profile :math:`c e^{-|x - x_0|}` (periodic distance)."""
    if not abs(c) > 0:
        raise ConfigurationError("peakon amplitude must be nonzero")
    return GridFunction(grid, c * np.exp(-np.abs(grid.periodic_distance(x0))))


def ic_gaussian(a: float, s: float, grid: Grid) -> GridFunction:
    """Smooth comparison data :math:`a e^{-x^2 / 2 s^2}`."""
    if not s > 2.0 * grid.h:
        raise UnderResolvedError(f"gaussian width {s!r} must exceed two cells")
    x = grid.periodic_distance(0.0)
    return GridFunction(grid, a * np.exp(-x**2 / (2.0 * s**2)))


def ic_from_csv(path: PathLike, grid: Optional[Grid] = None) -> GridFunction:
    """Read ``x,value`` rows; nodes must match *grid* to within 1e-12."""
    return read_csv(path, grid=grid)


def make_initial_data(kind: str, params: Dict[str, Any], grid: Grid) -> GridFunction:
    """Build initial data from a configuration entry.

    Known kinds are ``peakon`` (``c``, ``x0``), ``gaussian`` (``a``, ``s``),
    ``constant`` (``c``), ``zero`` and ``csv`` (``path``).
    """
    params = dict(params or {})
    try:
        if kind == "peakon":
            return ic_peakon(float(params.get("c", 1.0)), float(params.get("x0", 0.0)), grid)
        if kind == "gaussian":
            return ic_gaussian(float(params.get("a", 1.0)), float(params.get("s", 1.0)), grid)
        if kind == "constant":
            return grid.constant(float(params.get("c", 0.0)))
        if kind == "zero":
            return grid.zeros()
        if kind == "csv":
            return ic_from_csv(params["path"], grid)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(f"bad parameters for initial data '{kind}': {exc}") from exc

    raise ConfigurationError(f"unknown initial data kind: '{kind}'")

# }}}

# vim: foldmethod=marker
