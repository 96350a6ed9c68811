"""Exception types raised by the speed-limit engine."""

from __future__ import annotations


class QSLError(Exception):
    """Base class for all errors raised by :mod:`exactqsl`."""


class DimensionMismatchError(QSLError, ValueError):
    pass


class NumericalError(QSLError):
    """A linear-algebra routine failed to converge."""


class StationaryError(QSLError):
    """The state does not move relative to the reference basis."""


class DegenerateError(QSLError):
    """A time estimate is undefined because the evolution is stationary."""


class NonMonotonicError(QSLError):
    """Survival probability is not monotonically decreasing."""


class NotEffectively2DError(QSLError):
    """The trajectory leaks out of the two-dimensional subspace it should live in."""


class NotSelfInverseError(QSLError, ValueError):
    pass


class TimeDependentError(QSLError, ValueError):
    pass


class StepResolutionError(QSLError):
    """The time grid is too coarse; consecutive states differ by too much."""


class NotReachedError(QSLError):
    """The target state is not attained within the search horizon."""


class NoImprovementError(QSLError):
    """Every optimizer restart failed to reach the target."""


class ScenarioError(QSLError, ValueError):
    """A scenario description failed validation.

    ``where`` names the offending field (dotted path) so messages can point at it.
    """

    def __init__(self, message: str, where: str | None = None):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)
