"""Exception hierarchy.

Input problems derive from :class:`InputError` (also a ``ValueError``);
numerical failures derive from :class:`NumericalError`. The CLI maps these
to exit codes 1 and 2 respectively.
"""


class ModesplitError(Exception):
    pass


class InputError(ModesplitError, ValueError):
    pass


class NumericalError(ModesplitError, RuntimeError):
    pass


class ResolutionError(InputError):
    """Grid too coarse for the requested number of modes."""


class InconsistentModel(InputError):
    """Convergence model ellipticity disagrees with the beam section."""


class EmptyBand(InputError):
    """No mode pair falls inside the requested frequency band."""


class GridMismatch(InputError):
    pass


class WindowTooNarrow(InputError):
    pass


class InsufficientData(NumericalError):
    pass


class ConvergenceError(NumericalError):
    """Eigensolver did not reach its tolerance."""


class FitDiverged(NumericalError):
    pass


class AmbiguousAssignment(NumericalError):
    """Two order offsets explain the peak positions about equally well."""
