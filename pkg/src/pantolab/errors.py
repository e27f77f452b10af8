"""Exception types raised across the package."""


class PantolabError(Exception):
    """Base class for all package errors."""


class NonMonotoneTime(PantolabError, ValueError):
    pass


class NonFinite(PantolabError, ValueError):
    pass


class OutOfDomain(PantolabError, ValueError):
    pass


class DomainError(PantolabError, ValueError):
    pass


class GridError(PantolabError, ValueError):
    pass


class GridMismatch(PantolabError, ValueError):
    pass


class BootstrapError(PantolabError, ArithmeticError):
    pass


class OrderTooLarge(PantolabError, ValueError):
    pass


class StepTooLarge(PantolabError, ValueError):
    pass


class UndefinedKappa(PantolabError, ValueError):
    pass


class WindowTooShort(PantolabError, ValueError):
    pass


class AllBelowFloor(PantolabError, ValueError):
    pass


class InsufficientDomain(PantolabError, ValueError):
    pass


class NotHurwitz(PantolabError, ValueError):
    pass


class SingularSystem(PantolabError, ArithmeticError):
    pass


class SingularB(PantolabError, ArithmeticError):
    pass


class DimensionMismatch(PantolabError, ValueError):
    pass


class UsageError(PantolabError, ValueError):
    pass


class ConfigError(PantolabError, ValueError):
    """Invalid scenario configuration; ``field`` is the dotted path of the offending entry."""

    def __init__(self, field, message=""):
        self.field = field
        self.message = message
        super().__init__(f"{field}: {message}" if message else field)
