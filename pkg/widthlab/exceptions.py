class WidthLabError(Exception):
    """Base class for all errors raised by widthlab."""


class DomainMismatchError(WidthLabError, ValueError):
    pass


class EmptySetError(WidthLabError, ValueError):
    pass


class UnsupportedError(WidthLabError, NotImplementedError):
    pass


class ConfigError(WidthLabError, ValueError):
    pass


class InvariantViolation(WidthLabError, AssertionError):
    """A proved identity or inequality failed numerically."""
