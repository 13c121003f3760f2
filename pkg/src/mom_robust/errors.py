"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`MoMError`.
Errors signalling that an input violates a mathematical precondition (outlier
fraction too large, confidence level outside its admissible interval, ...)
additionally derive from :class:`NumericError`, which the CLI maps to exit
code 3.
"""


class MoMError(Exception):
    """Base class for all package errors."""


class NumericError(MoMError, ValueError):
    """An input is outside the domain where a quantity is defined."""


class EpsilonOutOfRange(NumericError):
    pass


class InvalidMapping(NumericError):
    pass


class BreakdownExceeded(NumericError):
    """Outlier fraction is at or above 1/2: no calibration exists."""


class JointBreakdownExceeded(BreakdownExceeded):
    """eps_x + eps_y - eps_x * eps_y is at or above 1/2."""


class SumBreakdownExceeded(BreakdownExceeded):
    """eps_x + eps_y is at or above 1/2."""


class EpsilonZero(NumericError):
    """A constant requiring division by epsilon was requested at epsilon = 0."""


class DeltaOutOfRange(NumericError):
    """Confidence parameter outside the admissible interval.

    The interval is attached as ``admissible`` (a ``DeltaRange``) when known.
    """

    def __init__(self, message, admissible=None):
        super().__init__(message)
        self.admissible = admissible


class DegenerateRange(DeltaOutOfRange):
    """The admissible confidence interval is empty."""


class InvalidBlockCount(NumericError):
    pass


class EmptySample(NumericError):
    pass


class PartitionMismatch(NumericError):
    pass


class SampleTooSmall(NumericError):
    pass


class BlockTooSmall(NumericError):
    pass


class NonFiniteValue(NumericError):
    """A kernel, loss or gradient produced NaN or infinity."""


class NonFiniteGradient(NonFiniteValue):
    pass


class NonFiniteInput(NumericError):
    pass


class UnsupportedDegree(MoMError, NotImplementedError):
    pass


class DatasetTooSmall(NumericError):
    pass


class ConfigError(MoMError):
    """Invalid experiment configuration (CLI exit code 2)."""


class ParseError(ConfigError):
    def __init__(self, message, line=None, column=None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if column is not None:
            loc.append(f"column {column!r}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.line = line
        self.column = column


class IoError(ConfigError):
    """A data or output file could not be read or written."""
