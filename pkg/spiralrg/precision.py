"""Working precision for flows, decimation and spiral diagnostics.

53 mantissa bits means plain Python floats; anything larger runs on
``mpmath.mpf`` numbers inside ``mpmath.workprec``. Numbers created under one
precision keep their mantissa, but arithmetic rounds to whatever context is
active, so callers evaluate whole flows inside ``Precision.active()``.
"""

import contextlib
import math
from dataclasses import dataclass

import mpmath

from spiralrg.errors import DomainError

DOUBLE_BITS = 53
DEFAULT_BITS = 256


@dataclass(frozen=True)
class Precision:
    bits: int = DEFAULT_BITS

    def __post_init__(self):
        if self.bits < DOUBLE_BITS:
            raise DomainError(f"precision must be at least {DOUBLE_BITS} bits, got {self.bits}")

    @classmethod
    def double(cls) -> "Precision":
        return cls(DOUBLE_BITS)

    @property
    def is_double(self) -> bool:
        return self.bits == DOUBLE_BITS

    @property
    def ulp(self) -> float:
        return 2.0 ** (1 - self.bits)

    def number(self, value):
        """Convert ``value`` (int, float, decimal string or mpf) to the working type."""
        if self.is_double:
            return float(value)
        return mpmath.mpf(value)

    def ratio(self, numerator: int, denominator: int):
        """Exact integer ratio rounded once to the working type."""
        if self.is_double:
            return numerator / denominator
        return mpmath.mpf(numerator) / denominator

    @contextlib.contextmanager
    def active(self):
        if self.is_double:
            yield self
        else:
            with mpmath.workprec(self.bits):
                yield self


def is_multiprecision(*values) -> bool:
    return any(isinstance(v, mpmath.mpf) for v in values)


def field_of(*values):
    """Constructor matching the numeric type of ``values`` (mpf wins over float)."""
    return mpmath.mpf if is_multiprecision(*values) else float


def sqrt(x):
    return mpmath.sqrt(x) if isinstance(x, mpmath.mpf) else math.sqrt(x)


def asin(x):
    return mpmath.asin(x) if isinstance(x, mpmath.mpf) else math.asin(x)


def atan2(y, x):
    if is_multiprecision(x, y):
        return mpmath.atan2(y, x)
    return math.atan2(y, x)


def pi_like(x):
    return +mpmath.pi if isinstance(x, mpmath.mpf) else math.pi


def precision_of(*values) -> Precision:
    """The precision arithmetic on ``values`` runs at in the active context."""
    if is_multiprecision(*values):
        return Precision(max(mpmath.mp.prec, DOUBLE_BITS))
    return Precision.double()
