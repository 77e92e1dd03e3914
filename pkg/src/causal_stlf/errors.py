"""Exception types shared across the package.

The CLI maps these onto exit codes: ``DataError`` -> 2, ``NumericalError`` -> 3.
"""


class DataError(ValueError):
    """Input data is malformed, missing, or insufficient."""


class DegenerateInputError(DataError):
    """A statistic is undefined for the given input (e.g. a constant series)."""


class NumericalError(ArithmeticError):
    """A numerical procedure failed (singular system, diverged training)."""
