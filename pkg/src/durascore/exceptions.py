"""Exception types shared across the package."""


class DurascoreError(Exception):
    """Base class for all package-specific errors."""


class FilterDiverged(DurascoreError):
    """The score filter produced a non-finite state or likelihood term.

    Attributes
    ----------
    step : int or None
        Index of the observation at which the recursion broke down.
    """

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class IncompatibleObservations(DurascoreError):
    """Observations are not type-compatible with the chosen family."""


class NonConvergence(DurascoreError):
    """Both optimizer stages exhausted their budgets without reaching a
    stationary point.  Carries the partial fit so callers can still inspect
    or serialize it."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class DegenerateData(DurascoreError):
    """The data carry no information about the model dynamics."""


class HessianNotPD(DurascoreError):
    """The observed information matrix is not positive definite."""


class BoxDegenerate(DurascoreError):
    """The parameter box does not admit the invertibility diagnostic."""


class ZeroVariance(DurascoreError):
    """Score differences have zero sample variance."""


class EmptyAfterCleaning(DurascoreError):
    """Every tick was removed by the cleaning rules."""


class MalformedInput(DurascoreError):
    """An input file violates the documented format.

    Attributes
    ----------
    line : int or None
        1-based line number of the offending row, when known.
    """

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line
