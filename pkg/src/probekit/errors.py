"""Exception hierarchy shared by all probekit modules.

The CLI maps these onto exit codes (see :mod:`probekit.cli`).
"""


class ProbekitError(Exception):
    """Base class for every error raised by the toolkit."""


class DomainError(ProbekitError, ValueError):
    """An argument lies outside the domain of an operation."""


class ValidationError(ProbekitError, ValueError):
    """A configuration failed validation.

    ``field`` carries the dotted path of the offending entry.
    """

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class AccuracyError(ProbekitError, ArithmeticError):
    """A quadrature or integrator did not reach its tolerance.

    ``achieved`` is the best error bound obtained before giving up.
    """

    def __init__(self, message, achieved=float("nan")):
        super().__init__(message)
        self.achieved = achieved


class TailToleranceError(ProbekitError, ValueError):
    """A truncated expansion would drop more than the requested tail."""

    def __init__(self, message, required_degree):
        super().__init__(message)
        self.required_degree = required_degree


class NearEigenvalueError(ProbekitError, ArithmeticError):
    """The forward problem is numerically at an interior eigenvalue."""


class ResolutionError(ProbekitError, ArithmeticError):
    """A discretisation failed its self-consistency check."""


class PreconditionError(ProbekitError, ValueError):
    """A caller-guaranteed precondition was found violated."""
