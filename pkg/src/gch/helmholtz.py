r"""
Discrete Helmholtz inverse
--------------------------

Realizes convolution with the kernel :math:`G(x) = \frac{1}{2} e^{-|x|}`
through its defining property :math:`G \star f = (1 - \partial_x^2)^{-1} f`.
On the periodic grid the operator is the cyclic tridiagonal matrix

.. math::

    A = I - D^2, \qquad
    (D^2 f)_i = \frac{f_{i-1} - 2 f_i + f_{i+1}}{h^2},

which is symmetric positive definite with diagonal :math:`1 + 2/h^2` and
off-diagonals :math:`-1/h^2`. It is factored once per grid: the periodic
corners are split off as a rank-one update, the remaining SPD tridiagonal
matrix is factored with LAPACK ``pttrf``, and each solve costs two
``pttrs`` sweeps plus a Sherman-Morrison correction.

Since :math:`D^2 A^{-1} = A^{-1} - I` holds exactly, the second derivative
of a convolution is never formed by differencing, see :meth:`HelmholtzSolver.green_dxx`.

.. autoclass:: HelmholtzSolver
.. autofunction:: helmholtz_solver
.. autofunction:: green_convolve
.. autofunction:: green_dx
.. autofunction:: green_dxx
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.linalg.lapack import dpttrf, dpttrs

from gch.errors import ConfigurationError, GridMismatchError
from gch.grid import Grid, GridFunction, d2x, ddx


class _CyclicSPDTridiagonal:
    """Factorization of the symmetric circulant tridiagonal matrix with
    constant diagonal *diag* and off-diagonal *off* (``diag > 2 |off|``)."""

    def __init__(self, n: int, diag: float, off: float) -> None:
        if n < 3:
            raise ConfigurationError("cyclic system needs at least 3 unknowns")

        gamma = -diag
        d = np.full(n, diag)
        e = np.full(n - 1, off)
        d[0] = diag - gamma
        d[-1] = diag - off * off / gamma

        self.d, self.e, info = dpttrf(d, e)
        if info != 0:
            raise ConfigurationError(f"tridiagonal factorization failed (info={info})")

        corner = np.zeros(n)
        corner[0], corner[-1] = gamma, off
        self.v = np.zeros(n)
        self.v[0], self.v[-1] = 1.0, off / gamma

        self.z = self._solve_banded(corner)
        self.denom = 1.0 + self.v @ self.z

    def _solve_banded(self, rhs: np.ndarray) -> np.ndarray:
        x, info = dpttrs(self.d, self.e, rhs)
        if info != 0:
            raise ConfigurationError(f"tridiagonal solve failed (info={info})")
        return x

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        y = self._solve_banded(rhs)
        if y.ndim == 1:
            return y - ((self.v @ y) / self.denom) * self.z
        return y - np.outer(self.z, (self.v @ y) / self.denom)


class HelmholtzSolver:
    """Factorization of :math:`I - D^2` on one grid.

    The factorization is immutable after construction, so a single instance
    can serve concurrent solves.
    """

    def __init__(self, grid: Grid) -> None:
        self.grid = grid
        h = grid.h
        self._compact = _CyclicSPDTridiagonal(grid.n, 1.0 + 2.0 / h**2, -1.0 / h**2)

        # the wide operator I - D o D couples only every other node, so it
        # splits into two compact systems with spacing 2h
        hw = 2.0 * h
        self._wide = _CyclicSPDTridiagonal(
            grid.n // 2, 1.0 + 2.0 / hw**2, -1.0 / hw**2)

    # {{{ array interface

    def _check(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        if values.shape[0] != self.grid.n:
            raise GridMismatchError(
                f"expected {self.grid.n} samples, got shape {values.shape}")
        return values

    def solve(self, values: np.ndarray) -> np.ndarray:
        """Solve :math:`(I - D^2) v = f` for one right-hand side of shape
        ``(n,)`` or several stacked as columns, shape ``(n, k)``."""
        return self._compact.solve(self._check(values))

    def solve_wide(self, values: np.ndarray) -> np.ndarray:
        """Solve :math:`(I - D \\circ D) v = f`, with :math:`D` the central
        difference (a five-point stencil of width :math:`4h`)."""
        values = self._check(values)
        out = np.empty_like(values)
        out[0::2] = self._wide.solve(values[0::2])
        out[1::2] = self._wide.solve(values[1::2])
        return out

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Apply :math:`I - D^2` (along the first axis)."""
        values = self._check(values)
        return values - d2x(values.T, self.grid.h).T

    def residual(self, v: np.ndarray, f: np.ndarray) -> float:
        """:math:`\\|(I - D^2) v - f\\|_\\infty`."""
        return float(np.max(np.abs(self.apply(v) - np.asarray(f))))

    # }}}

    # {{{ grid function interface

    def _field(self, f: GridFunction) -> np.ndarray:
        if f.grid != self.grid:
            raise GridMismatchError(f"field lives on {f.grid}, solver on {self.grid}")
        return f.values

    def green_convolve(self, f: GridFunction) -> GridFunction:
        return GridFunction(self.grid, self.solve(self._field(f)))

    def green_dx(self, f: GridFunction) -> GridFunction:
        """:math:`D (I - D^2)^{-1} f`, the discrete :math:`\\partial_x G \\star f`."""
        return GridFunction(self.grid, ddx(self.solve(self._field(f)), self.grid.h))

    def green_dxx(self, f: GridFunction) -> GridFunction:
        """:math:`(I - D^2)^{-1} f - f`, the discrete
        :math:`\\partial_x^2 G \\star f`."""
        values = self._field(f)
        return GridFunction(self.grid, self.solve(values) - values)

    # }}}


@lru_cache(maxsize=32)
def helmholtz_solver(grid: Grid) -> HelmholtzSolver:
    """Cached :class:`HelmholtzSolver` for *grid*."""
    return HelmholtzSolver(grid)


def green_convolve(f: GridFunction) -> GridFunction:
    return helmholtz_solver(f.grid).green_convolve(f)


def green_dx(f: GridFunction) -> GridFunction:
    return helmholtz_solver(f.grid).green_dx(f)


def green_dxx(f: GridFunction) -> GridFunction:
    return helmholtz_solver(f.grid).green_dxx(f)

# vim: foldmethod=marker
