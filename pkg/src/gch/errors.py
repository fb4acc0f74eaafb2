"""Exception hierarchy shared by all modules."""


class GchError(Exception):
    """Base class for every error raised by :mod:`gch`."""


class ConfigurationError(GchError, ValueError):
    """Invalid parameters, mismatched grids or malformed input files."""


class GridMismatchError(ConfigurationError):
    pass


class NonFiniteError(GchError, FloatingPointError):
    """A field contains NaN or Inf samples."""


class UnderResolvedError(ConfigurationError):
    """A kernel or profile is too narrow for the grid spacing."""


class BlowUpError(GchError, RuntimeError):
    """The time integration produced non-finite values or tripped the
    blow-up monitor.

    .. attribute:: stats

        The :class:`~gch.solver.StepStats` of the offending step, if known.
    """

    def __init__(self, message, stats=None, time=None):
        super().__init__(message)
        self.stats = stats
        self.time = time
