"""Exception hierarchy shared by every module."""


class LowRankError(Exception):
    """Base class for all errors raised by :mod:`lowrank`."""


class ShapeError(LowRankError, ValueError):
    """Array dimensions do not agree with what an operation expects."""


class ParameterError(LowRankError, ValueError):
    """An argument is outside its admissible range."""


class StateError(LowRankError, RuntimeError):
    """An object was used before it was fully resolved."""


class NumericalError(LowRankError, ArithmeticError):
    """A numerical kernel failed (typically SVD non-convergence).

    ``shape`` holds the dimensions of the offending matrix and
    ``iteration`` the solver iteration, when known.
    """

    def __init__(self, message, shape=None, iteration=None):
        super().__init__(message)
        self.shape = shape
        self.iteration = iteration


class DivergenceError(NumericalError):
    """The solver state blew up (non-finite or runaway growth)."""


class FormatError(LowRankError, ValueError):
    """A text file does not follow the expected layout."""

    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line
