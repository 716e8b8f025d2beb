"""Exception types shared across the package."""


class MsvddError(Exception):
    """Base class for all package errors."""


class InputError(MsvddError, ValueError):
    """Malformed or inconsistent user input (bad dimensions, bad grids, parse errors)."""


class ParseError(InputError):
    """Text input that cannot be parsed; carries the offending line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InfeasibleSubproblemError(MsvddError):
    """The capped simplex {0 <= a <= C, sum a = 1} is empty for the requested sphere."""


class SolverFailure(MsvddError):
    """A solve could not be completed."""


class ConvergenceError(SolverFailure):
    """Iteration cap hit before the duality gap closed.

    Carries the best iterate seen and its certified gap so callers can decide
    whether to retry or accept the approximate solution.
    """

    def __init__(self, message, alpha=None, gap=None, iterations=None):
        super().__init__(message)
        self.alpha = alpha
        self.gap = gap
        self.iterations = iterations


class UndefinedMetricError(MsvddError):
    """A metric was requested on degenerate input (e.g. single-class AUC)."""
