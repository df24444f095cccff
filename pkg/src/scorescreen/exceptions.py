"""Exception hierarchy.

Data problems (bad files, incompatible responses) and numerical problems
(degenerate fits, non-convergence) are kept apart so the CLI can map them
to distinct exit codes.
"""

from __future__ import annotations


class ScreeningError(Exception):
    """Base class for every error raised by this package."""


class DataError(ScreeningError, ValueError):
    """Input data is malformed or incompatible with the requested analysis."""


class ParseError(DataError):
    """A cell of a delimited file could not be parsed as a number."""


class StructureError(DataError):
    """Ragged rows, mismatched lengths or out-of-range indices."""


class MissingValueError(DataError):
    """An empty / NA cell was found; missing values are never imputed."""


class FamilyMismatchError(DataError):
    """The response kind is incompatible with the regression family."""


class SampleSizeError(DataError):
    """Too few observations (or too few per group) for the test."""


class NumericalError(ScreeningError, ArithmeticError):
    """Base class for numerical failures."""


class DomainError(NumericalError, ValueError):
    """Argument outside the domain of a special function or likelihood."""


class DegenerateError(NumericalError):
    """Zero-variance response or predictor; the statistic is undefined."""


class ConvergenceError(NumericalError):
    """An iterative solver did not converge.

    ``last_iterate`` holds the final parameter vector and ``diagnostics``
    a free-form dict (iteration count, gradient norm, ...).
    """

    def __init__(self, message, last_iterate=None, diagnostics=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.diagnostics = dict(diagnostics or {})


class SeparationError(ConvergenceError):
    """Logistic perfect (or quasi) separation: the slope MLE is infinite."""
