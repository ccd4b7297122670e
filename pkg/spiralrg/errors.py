"""Exception hierarchy shared by the library and the command line.

Every error carries a machine-readable ``category`` and the exit code the
CLI uses when the error escapes a command.
"""

from typing import Optional


class SpiralRGError(Exception):
    category = "error"
    exit_code = 1


class ConfigError(SpiralRGError):
    """Invalid run configuration. ``problems`` lists every violated constraint."""

    category = "config"
    exit_code = 2

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class DomainError(SpiralRGError, ValueError):
    category = "domain"
    exit_code = 3


class PivotNearZero(SpiralRGError, ArithmeticError):
    category = "pivot"
    exit_code = 4

    def __init__(self, message: str, step: Optional[int] = None, pivot=None):
        self.step = step
        self.pivot = pivot
        super().__init__(message)


class DenominatorZero(SpiralRGError, ArithmeticError):
    category = "denominator"
    exit_code = 4

    def __init__(self, message: str, value=None):
        self.value = value
        super().__init__(message)


class NonInvertible(SpiralRGError, ArithmeticError):
    category = "non_invertible"
    exit_code = 4


class DegenerateBasis(SpiralRGError, ArithmeticError):
    category = "degenerate_basis"
    exit_code = 5


class DegenerateDirection(SpiralRGError, ArithmeticError):
    category = "degenerate_direction"
    exit_code = 5


class InsufficientFrames(SpiralRGError, ValueError):
    category = "insufficient_frames"
    exit_code = 5


class NoRealRoot(SpiralRGError, ArithmeticError):
    category = "no_real_root"
    exit_code = 6


class PrecisionInsufficient(SpiralRGError, ArithmeticError):
    category = "precision"
    exit_code = 7


class EigenConvergenceError(SpiralRGError, ArithmeticError):
    """Eigenvalue could not be certified; ``bounds`` is the last bracketing interval."""

    category = "eigen_convergence"
    exit_code = 8

    def __init__(self, message: str, index: int, bounds):
        self.index = index
        self.bounds = bounds
        super().__init__(message)
