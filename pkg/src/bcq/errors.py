"""Exception hierarchy shared by every bcq module."""


class BCQError(Exception):
    """Base class. ``exit_code`` is what the command line reports."""

    exit_code = 2


class InvalidInput(BCQError, ValueError):
    pass


class ResourceLimit(BCQError):
    exit_code = 3


class UndefinedCoefficient(BCQError, ArithmeticError):
    """A power coefficient needs a logarithm of 0 or a division by log 1."""

    exit_code = 3
