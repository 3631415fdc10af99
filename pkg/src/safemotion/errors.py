"""Exception types shared across the package."""


class SafemotionError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatchError(SafemotionError):
    """Vector or matrix dimensions do not agree."""


class RankDeficientInputError(SafemotionError):
    """The input matrix G(x) does not have full column rank."""


class BarrierPreconditionError(SafemotionError):
    """A barrier cannot act on the system (input direction L_G h is numerically zero)."""


class InfeasibleFilterError(SafemotionError):
    """The constraint set {u : A u <= b} is empty at the queried state."""


class UndefinedBarrierError(SafemotionError):
    """A reciprocal barrier was evaluated where it is not defined (h <= 0)."""


class DegenerateFitError(SafemotionError):
    """A plane fit is ambiguous: degenerate point spread or goal on the plane."""


class BlowUpError(SafemotionError):
    """Integration produced a non-finite state."""


class ScenarioError(SafemotionError):
    """A scenario file failed validation."""


class ProtocolError(SafemotionError):
    """A wire message is malformed."""


class DependentConstraintWarning(UserWarning):
    """Dependent active constraint rows were dropped during a filter solve."""
