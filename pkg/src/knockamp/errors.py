"""Exception types shared across the package."""


class KnockampError(Exception):
    """Base class for all package errors."""


class NoSolution(KnockampError):
    """The state-evolution system has no admissible solution for the request."""


class NonConvergence(KnockampError):
    """An iterative solver hit its iteration cap."""


class NotAchievable(KnockampError):
    """A target FDP level lies below the infimum of the curve."""


class SignedPriorRequired(KnockampError):
    """A computation assumes all nonzero prior atoms are positive."""


class DimensionMismatch(KnockampError, ValueError):
    pass


class UnknownFigure(KnockampError, ValueError):
    pass


class NonMonotoneWarning(UserWarning):
    """A sampled FDP curve increases somewhere by more than the allowed slack."""
