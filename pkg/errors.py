"""Exceptions raised by the mix-zone toolkit.

Every error carries the process exit code the CLI reports for it:
3 for bad input, 4 for numeric trouble (non-convergence, oracle mismatch).
"""


class MixZoneError(Exception):
    exit_code = 3


class InvalidInputError(MixZoneError, ValueError):
    """A parameter or argument is outside its allowed range."""


class InputFormatError(MixZoneError):
    """A network, points or settings file could not be parsed."""


class NoPathError(MixZoneError):
    """Two intersections are not connected."""


class OversizeError(MixZoneError):
    """An exhaustive oracle was asked for an instance beyond its enumeration budget."""


class CoincidentVertexError(MixZoneError):
    """The gradient was requested at a data point; use vertex_test there instead."""

    def __init__(self, index, message=None):
        self.index = index
        super().__init__(message or f"point {index} coincides with the evaluation location; use vertex_test")


class UnsupportedExponentError(MixZoneError):
    """The optimal allocator needs a strictly convex cost (alpha > 1)."""


class NonConvergenceError(MixZoneError):
    exit_code = 4


class OracleMismatchError(MixZoneError):
    exit_code = 4
