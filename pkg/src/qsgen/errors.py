"""Exception types shared by every module."""


class QSGenError(Exception):
    """Base class for errors raised by qsgen."""


class InputError(QSGenError, ValueError):
    """Malformed or inconsistent input (shapes, dimensions, domains)."""


class ResourceError(QSGenError, RuntimeError):
    """A dimension guard was breached."""


class OracleDisagreement(QSGenError, ArithmeticError):
    """Two independent numerical characterizations gave different answers."""
