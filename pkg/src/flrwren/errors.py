"""Exception types shared across the package."""


class FlrwRenError(Exception):
    """Base class for all package errors."""


class DomainError(FlrwRenError, ValueError):
    """An argument lies outside the domain where a quantity is defined."""


class AccuracyError(FlrwRenError):
    """A numerical procedure did not reach its requested tolerance.

    Parameters
    ----------
    message : str
        Human readable description.
    achieved : float, optional
        Error estimate actually reached, if known.
    """

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class SolverError(AccuracyError):
    """The mode integrator failed or violated the Wronskian constraint."""


class DivergenceError(AccuracyError):
    """A momentum integral has a non-integrable tail.

    Attributes
    ----------
    slope : float
        Fitted power-law exponent of the integrand tail.
    """

    def __init__(self, message, slope=None):
        super().__init__(message, achieved=slope)
        self.slope = slope


class UnsupportedExpression(FlrwRenError):
    """A symbolic expression falls outside the supported grading."""


class ConfigError(FlrwRenError):
    """A run configuration could not be parsed or validated."""
