"""Exception hierarchy.

``GuardError`` subclasses signal bad numeric input or a violated
precondition; the CLI maps them to exit code 2.
"""


class ClosenessError(Exception):
    """Base class for all package errors."""


class GuardError(ClosenessError, ValueError):
    pass


class EmptyVector(GuardError):
    pass


class NegativeEntry(GuardError):
    pass


class ZeroSum(GuardError):
    pass


class DimensionMismatch(GuardError):
    pass


class KTooSmall(GuardError):
    pass


class KTooLargeForDesk(GuardError):
    pass


class BudgetTooSmall(GuardError):
    pass


class Unreachable(ClosenessError, RuntimeError):
    """Calibration could not push a rejection rate under its target."""


class BadParameter(GuardError):
    pass


class RenormalizationImpossible(GuardError):
    pass


class RetryCapExceeded(ClosenessError, RuntimeError):
    pass
