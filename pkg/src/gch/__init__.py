"""Vanishing-viscosity solver and certification tools for the nonlocal
peakon equation

.. math::

    u_t - 4 u u_x = \\partial_x P_1 + \\partial_x^2 P_2, \\qquad
    P_1 = G \\star (2 u_x^2 + 6 u^2), \\quad P_2 = G \\star u_x^2,

with :math:`G = \\frac12 e^{-|x|}`, on a periodic grid.

Modules: :mod:`gch.grid`, :mod:`gch.helmholtz`, :mod:`gch.initialdata`,
:mod:`gch.solver`, :mod:`gch.estimates`, :mod:`gch.entropy`,
:mod:`gch.sweep`, :mod:`gch.cli`.
"""

__version__ = "0.1.0"
