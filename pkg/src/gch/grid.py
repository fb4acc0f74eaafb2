r"""
Periodic grids and grid functions
---------------------------------

All fields live on a uniform periodic mesh of ``N`` cells covering
:math:`[-L/2, L/2)`, with nodes :math:`x_i = -L/2 + i h`, :math:`h = L / N`.
Derivatives are second-order central differences with periodic wrap and the
norms are the rectangle-rule (equivalently, periodic trapezoid) versions of
the continuous :math:`L^1`, :math:`L^2`, :math:`L^\infty` and :math:`H^1`
norms.

.. autoclass:: Grid
.. autoclass:: GridFunction
.. autoclass:: Trajectory

.. autofunction:: derivative
.. autofunction:: second_difference
.. autofunction:: norm_l1
.. autofunction:: norm_l2
.. autofunction:: norm_linf
.. autofunction:: norm_h1
.. autofunction:: seminorm_bv
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Optional, Union

import numpy as np

from gch.errors import ConfigurationError, GridMismatchError, NonFiniteError

PathLike = Union[str, "os.PathLike[str]"]

#: tolerance on node coordinates when reading fields from disk
CSV_COORDINATE_TOL = 1.0e-12


# {{{ grid


@dataclass(frozen=True)
class Grid:
    """Uniform periodic mesh.

    .. attribute:: length

        Period :math:`L` of the torus.

    .. attribute:: n

        Number of cells (and nodes) :math:`N`, even and at least 16.
    """

    length: float
    n: int

    def __post_init__(self) -> None:
        if not np.isfinite(self.length) or self.length <= 0:
            raise ConfigurationError(f"grid length must be positive: {self.length!r}")
        if int(self.n) != self.n or self.n < 16 or self.n % 2:
            raise ConfigurationError(
                f"cell count must be an even integer >= 16: {self.n!r}")

        object.__setattr__(self, "length", float(self.length))
        object.__setattr__(self, "n", int(self.n))

    @property
    def h(self) -> float:
        return self.length / self.n

    @property
    def x(self) -> np.ndarray:
        return -0.5 * self.length + self.h * np.arange(self.n)

    def periodic_distance(self, x0: float) -> np.ndarray:
        """Signed distance :math:`x_i - x_0` wrapped into :math:`[-L/2, L/2)`."""
        d = self.x - x0
        return d - self.length * np.floor(d / self.length + 0.5)

    def zeros(self) -> "GridFunction":
        return GridFunction(self, np.zeros(self.n))

    def constant(self, c: float) -> "GridFunction":
        return GridFunction(self, np.full(self.n, float(c)))

    def sample(self, f) -> "GridFunction":
        return GridFunction(self, f(self.x))

# }}}


# {{{ grid functions


class GridFunction:
    """Immutable real field sampled at the nodes of a :class:`Grid`.

    Every sample must be finite; a NaN or Inf raises :class:`NonFiniteError`.
    Supports the usual vector-space arithmetic with scalars and other grid
    functions on the same grid.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values) -> None:
        values = np.array(values, dtype=np.float64)
        if values.shape != (grid.n,):
            raise GridMismatchError(
                f"expected {grid.n} samples, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise NonFiniteError("grid function has non-finite samples")

        values.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def __setattr__(self, name, value):
        raise AttributeError("GridFunction is immutable")

    def __repr__(self) -> str:
        return f"GridFunction(grid={self.grid!r}, max={np.max(np.abs(self.values)):.3e})"

    def __len__(self) -> int:
        return self.grid.n

    def _other(self, other):
        if isinstance(other, GridFunction):
            check_same_grid(self, other)
            return other.values
        return other

    def __add__(self, other):
        return GridFunction(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return GridFunction(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return GridFunction(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.grid, -self.values)


def check_same_grid(*fields: GridFunction) -> Grid:
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise GridMismatchError(f"grid mismatch: {f.grid} != {grid}")

    return grid

# }}}


# {{{ stencils

def ddx(values: np.ndarray, h: float) -> np.ndarray:
    """Central difference along the last axis, periodic wrap."""
    return (np.roll(values, -1, axis=-1) - np.roll(values, 1, axis=-1)) / (2.0 * h)


def d2x(values: np.ndarray, h: float) -> np.ndarray:
    """Compact second difference along the last axis, periodic wrap."""
    return (np.roll(values, -1, axis=-1) - 2.0 * values
            + np.roll(values, 1, axis=-1)) / (h * h)


def derivative(f: GridFunction) -> GridFunction:
    """Second-order central difference :math:`(f_{i+1} - f_{i-1}) / 2h`."""
    return GridFunction(f.grid, ddx(f.values, f.grid.h))


def second_difference(f: GridFunction) -> GridFunction:
    """Compact stencil :math:`(f_{i-1} - 2 f_i + f_{i+1}) / h^2`."""
    return GridFunction(f.grid, d2x(f.values, f.grid.h))

# }}}


# {{{ norms

def norm_l1(f: GridFunction) -> float:
    return float(f.grid.h * np.sum(np.abs(f.values)))


def norm_l2(f: GridFunction) -> float:
    return float(np.sqrt(f.grid.h * np.sum(f.values**2)))


def norm_linf(f: GridFunction) -> float:
    return float(np.max(np.abs(f.values)))


def norm_h1(f: GridFunction) -> float:
    return float(np.sqrt(norm_l2(f)**2 + norm_l2(derivative(f))**2))


def seminorm_bv(f: GridFunction) -> float:
    """Discrete total variation :math:`\\sum_i |f_{i+1} - f_i|` (periodic,
    no factor of :math:`h`)."""
    return float(np.sum(np.abs(np.roll(f.values, -1) - f.values)))

# }}}


# {{{ csv

def format_float(value: float) -> str:
    return f"{value:.17g}"


def write_csv(f: GridFunction, path: PathLike) -> None:
    """Write ``x,value`` rows at 17 significant digits."""
    buf = io.StringIO()
    buf.write("x,value\n")
    for xi, vi in zip(f.grid.x, f.values):
        buf.write(f"{format_float(xi)},{format_float(vi)}\n")

    with open(path, "w", encoding="utf-8", newline="") as outf:
        outf.write(buf.getvalue())


def read_csv(path: PathLike, grid: Optional[Grid] = None,
             length: Optional[float] = None) -> GridFunction:
    """Read a field written by :func:`write_csv`.

    If *grid* is given, the node coordinates must match it to
    :data:`CSV_COORDINATE_TOL`. Otherwise the grid is inferred from the row
    count and *length* (or from the node spacing if *length* is not given).
    """
    try:
        with open(path, encoding="utf-8", newline="") as inf:
            rows = list(csv.reader(inf))
    except OSError as exc:
        raise ConfigurationError(f"cannot read field file '{path}': {exc}") from exc

    if not rows or [c.strip() for c in rows[0]] != ["x", "value"]:
        raise ConfigurationError(f"'{path}': expected header 'x,value'")

    try:
        data = np.array([[float(c) for c in row] for row in rows[1:] if row])
    except ValueError as exc:
        raise ConfigurationError(f"'{path}': malformed number: {exc}") from exc

    if data.ndim != 2 or data.shape[1] != 2:
        raise ConfigurationError(f"'{path}': expected two columns per row")

    x, values = data[:, 0], data[:, 1]
    if grid is None:
        n = len(x)
        if length is None:
            if n < 2:
                raise ConfigurationError(f"'{path}': too few rows")
            length = n * (x[1] - x[0])
        grid = Grid(length, n)

    if len(x) != grid.n:
        raise GridMismatchError(
            f"'{path}': has {len(x)} rows but the grid has {grid.n} nodes")
    if np.max(np.abs(x - grid.x)) > CSV_COORDINATE_TOL * max(1.0, grid.length):
        raise GridMismatchError(f"'{path}': node coordinates do not match the grid")

    return GridFunction(grid, values)

# }}}


# {{{ trajectory


@dataclass
class Trajectory:
    """Time-ordered snapshots of one solver run.

    .. attribute:: times

        Strictly increasing snapshot times, starting at 0.

    .. attribute:: values

        Array of shape ``(len(times), grid.n)``; row ``k`` is the field at
        ``times[k]``.

    .. attribute:: dissipation

        Cumulative :math:`\\int_0^t D(s) \\,\\mathrm{d}s` at each snapshot,
        where :math:`D = \\|u_x\\|^2_{L^2} + \\|u_{xx}\\|^2_{L^2}` is
        accumulated by the trapezoid rule on every time step. ``None`` for
        trajectories that were not produced by :func:`gch.solver.run`.
    """

    grid: Grid
    times: np.ndarray
    values: np.ndarray
    epsilon: float = 0.0
    formulation: str = "u"
    scheme: str = "conservative"
    dissipation: Optional[np.ndarray] = None
    stats: Optional[Dict[str, np.ndarray]] = None
    config: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)

        if self.values.ndim != 2 or self.values.shape[1] != self.grid.n:
            raise GridMismatchError("snapshot array does not match the grid")
        if len(self.times) != self.values.shape[0]:
            raise ConfigurationError("times and snapshots have different lengths")
        if len(self.times) == 0 or self.times[0] != 0.0:
            raise ConfigurationError("trajectory must start at t = 0")
        if np.any(np.diff(self.times) <= 0):
            raise ConfigurationError("snapshot times must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise NonFiniteError("trajectory contains non-finite samples")

    def __len__(self) -> int:
        return len(self.times)

    def __iter__(self) -> Iterator[GridFunction]:
        return (self.snapshot(k) for k in range(len(self)))

    def snapshot(self, k: int) -> GridFunction:
        return GridFunction(self.grid, self.values[k])

    @property
    def snapshots(self) -> List[GridFunction]:
        return list(self)

    @property
    def t_final(self) -> float:
        return float(self.times[-1])

    def slopes(self) -> np.ndarray:
        """Central-difference :math:`q = u_x` of every snapshot."""
        return ddx(self.values, self.grid.h)

    def index_of(self, t: float, tol: float = 1.0e-10) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > tol * max(1.0, abs(t)):
            raise KeyError(f"no snapshot at t = {t}")
        return k

# }}}

# vim: foldmethod=marker
