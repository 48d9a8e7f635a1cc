"""Exception hierarchy.

Input problems derive from :class:`ValidationError` (also a ``ValueError``);
breakdowns of a numerical procedure derive from :class:`NumericalError`.
"""


class ContextLabError(Exception):
    pass


class ValidationError(ContextLabError, ValueError):
    pass


class NotPure(ValidationError):
    pass


class WrongDimension(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class NotHermitian(ValidationError):
    pass


class InvalidState(ValidationError):
    pass


class BadOutcomeCount(ValidationError):
    pass


class EmptySet(ValidationError):
    pass


class DependentSet(ValidationError):
    pass


class FrameMismatch(ValidationError):
    pass


class DuplicateTheta(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class NumericalError(ContextLabError, ArithmeticError):
    pass


class SolverFailure(NumericalError):
    pass


class NonPositiveVariance(NumericalError):
    pass


class GridTooCoarse(NumericalError):
    pass
