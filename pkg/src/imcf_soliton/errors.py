"""Exception hierarchy shared by all modules."""


class SolitonError(Exception):
    """Base class for every error raised by this package."""


class ParamError(SolitonError, ValueError):
    """Invalid problem parameters or solver configuration.

    ``field`` names the offending input so front ends can report it.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class DomainError(SolitonError, ArithmeticError):
    """A formula was evaluated outside the region r > 0, r - y r' != 0."""


class NoConvergence(SolitonError):
    pass


class CrossCheckFailure(SolitonError):
    """Two independent constructions of the same quantity disagree."""


class PreconditionError(SolitonError, ValueError):
    pass


class RangeError(SolitonError, ValueError):
    pass


class NoInflection(SolitonError):
    pass


class MultipleInflections(SolitonError):
    pass
