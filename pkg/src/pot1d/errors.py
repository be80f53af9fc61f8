"""Exception types raised by pot1d."""


class Pot1dError(Exception):
    """Base class for all pot1d errors."""


class DomainError(Pot1dError, ValueError):
    """An argument lies outside the domain where the operation is defined."""


class UnknownExampleError(Pot1dError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class ConvexityLossError(Pot1dError):
    """The discrete second derivative became nonpositive during a run."""

    def __init__(self, message, step=None, j=None):
        super().__init__(message)
        self.step = step
        self.j = j


class ConfigError(Pot1dError, ValueError):
    pass
