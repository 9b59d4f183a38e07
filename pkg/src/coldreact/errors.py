"""Exception types. The CLI maps these onto exit codes."""


class ColdReactError(Exception):
    """Base class for all package errors."""


class DomainError(ColdReactError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class UnitError(ColdReactError, ValueError):
    """A quantity string has a missing, unknown or mismatched unit."""


class ConfigurationError(ColdReactError, ValueError):
    """Inconsistent run setup (grid, packet placement, CAP, time step)."""


class ResolutionError(ConfigurationError):
    """The grid is too coarse for the requested state."""


class NumericalError(ColdReactError, ArithmeticError):
    """A numerical procedure failed or violated an internal consistency check."""


class CuspError(NumericalError):
    """LEPS derivative requested where the square-root term has a cusp."""


class SearchError(NumericalError):
    """Stationary-point search did not converge."""


class ClassificationError(NumericalError):
    """Stationary point found but it is not a first-order saddle."""


class TruncationWarning(UserWarning):
    """Requested more vibrational states than the channel supports."""
