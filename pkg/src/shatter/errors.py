"""Exception types shared across the package."""


class ShatterError(Exception):
    """Base class for all package errors."""


class InputError(ShatterError, ValueError):
    """Invalid arguments: out-of-range indices, bad parameters, malformed files."""


class ResourceError(ShatterError, RuntimeError):
    """A configured enumeration or memory budget would be exceeded."""


class NumericError(ShatterError, ArithmeticError):
    """A numeric routine produced a non-finite value."""
