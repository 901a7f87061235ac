"""Exception hierarchy shared by every module."""


class DiceError(Exception):
    """Base class for library errors."""


class InvalidArgumentError(DiceError, ValueError):
    pass


class ValidationError(InvalidArgumentError):
    """A file or structure failed validation; message names the offending field/row."""


class UnsupportedError(DiceError):
    """Request outside the supported domain (e.g. gamma=1 for a discounted solver)."""


class UnsupportedConfigError(UnsupportedError):
    pass


class NumericalFailureError(DiceError, ArithmeticError):
    pass


class UnderdeterminedSystemError(NumericalFailureError):
    """A linear system has a non-trivial null space."""


class RankDeficiencyError(NumericalFailureError):
    pass


class AssumptionViolationError(DiceError):
    pass


class DivergedError(DiceError):
    pass


class DegenerateInputError(DiceError):
    """Input cannot witness the effect an experiment is meant to show."""


class BiasedConfigWarning(UserWarning):
    pass
