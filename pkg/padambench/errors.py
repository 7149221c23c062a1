"""
Exception hierarchy for padambench.

Every error derives from PadamBenchError and from the builtin it refines,
so ``except ValueError`` keeps working for callers that do not know this
package.
"""


class PadamBenchError(Exception):
    """Base class for all padambench errors."""


class ShapeError(PadamBenchError, ValueError):
    """Vector or matrix dimensions do not match."""


class InvalidRangeError(PadamBenchError, ValueError):
    """An interval or count argument is empty or negative."""


class InvalidHyperParameterError(PadamBenchError, ValueError):
    """A hyperparameter lies outside its admissible range."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


class ScheduleDomainError(PadamBenchError, ValueError):
    """An averaging schedule produced a weight outside [0, 1)."""

    def __init__(self, message: str, n: int | None = None):
        super().__init__(message)
        self.n = n


class NonFiniteError(PadamBenchError, ArithmeticError):
    """A gradient, parameter or intermediate value became inf or NaN."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class SelectionError(PadamBenchError, ValueError):
    """No averaging channel has a finite loss."""


class DegenerateReferenceError(PadamBenchError, ZeroDivisionError):
    """The reference function vanishes on every Monte Carlo sample."""


class ConfigError(PadamBenchError, ValueError):
    """Invalid run configuration."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


class OutputError(PadamBenchError, OSError):
    """Writing or reading a result file failed."""

    def __init__(self, message: str, path: str | None = None):
        super().__init__(message)
        self.path = path
