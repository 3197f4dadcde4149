"""Exception hierarchy shared by every foed_lab module."""


class FoedLabError(Exception):
    """Base class for library errors."""


class DomainError(FoedLabError, ValueError):
    """An evaluation point lies where the requested quantity is undefined."""


class UnsupportedOperation(FoedLabError, NotImplementedError):
    """The model or the requested size does not support this operation."""


class ConfigError(FoedLabError, ValueError):
    """A run configuration could not be parsed or validated."""


class QuadratureError(FoedLabError, RuntimeError):
    """Adaptive integration ran out of budget before meeting its tolerance.

    The best estimate and its error bound are kept so callers can decide
    whether the partial answer is still usable.
    """

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error
