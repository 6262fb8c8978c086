"""Exception hierarchy shared by all modules."""


class RofAccelError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(RofAccelError, ValueError):
    """An argument value is outside the operation's domain."""


class ShapeError(RofAccelError, ValueError):
    """Tensor / layer shapes do not chain."""


class ConfigError(RofAccelError, ValueError):
    """A configuration object is invalid or inconsistent."""


class FileFormatError(RofAccelError, ValueError):
    """A binary container or CSV does not parse."""
