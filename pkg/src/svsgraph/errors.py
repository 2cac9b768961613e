"""Exception hierarchy shared by all svsgraph modules."""


class SVSGraphError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(SVSGraphError, ValueError):
    """A model or run parameter is outside its valid domain."""


class InputError(SVSGraphError, ValueError):
    """Malformed input data (wrong shape, non-finite entries, too few values)."""


class DomainError(SVSGraphError, ValueError):
    """A density was evaluated outside its support."""


class DegenerateError(SVSGraphError, ArithmeticError):
    """A quantity would require dividing by zero."""


class NumericalError(SVSGraphError, ArithmeticError):
    """A dense solver failed to converge.

    ``context`` carries whatever is needed to reproduce the failing matrix,
    typically the realization seed and model parameters.
    """

    def __init__(self, message, context=None):
        super().__init__(message)
        self.context = dict(context or {})

    def __str__(self):
        base = super().__str__()
        if not self.context:
            return base
        extra = ", ".join(f"{k}={v!r}" for k, v in self.context.items())
        return f"{base} ({extra})"


class EnsembleError(SVSGraphError, RuntimeError):
    """Too many realizations at one grid point failed."""


class BracketError(SVSGraphError, ValueError):
    """The search bracket does not straddle the target value."""


class ConvergenceError(SVSGraphError, RuntimeError):
    """Bisection did not reach the requested tolerance."""


class NotFoundError(SVSGraphError, LookupError):
    """A curve never crosses the requested threshold."""
