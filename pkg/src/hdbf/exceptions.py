"""Exception hierarchy shared by every hdbf module."""


class HDBFError(Exception):
    """Base class for all errors raised by hdbf."""


class InputError(HDBFError, ValueError):
    """Raised for problems with user-supplied data or configuration."""


class GroupTooSmall(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class MalformedCsv(InputError):
    pass


class ConfigError(InputError):
    pass


class NonPositiveVariance(HDBFError, ArithmeticError):
    """A variance estimate came out <= 0, so the statistic cannot be standardized."""

    def __init__(self, value, message=None):
        self.value = value
        super().__init__(message or f"variance estimate is not positive ({value!r})")


class DegenerateDenominator(HDBFError, ArithmeticError):
    pass


class ZeroSignal(HDBFError, ArithmeticError):
    pass


class NotPositiveSemidefinite(HDBFError, ValueError):
    pass
