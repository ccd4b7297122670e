"""Exact Gaussian elimination of the highest basis states at fixed energy.

Eliminating the last row and column of (M - E) is a Schur complement,

    M'[k, l] = M[k, l] - M[k, last] M[last, l] / (M[last, last] - E),

and only touches the corner of the band, so a banded matrix stays banded.
The lowest eigenvalue equals E exactly when E is an eigenvalue of the
reduced matrix. Parity sectors of a parity-separating Hamiltonian never mix,
so the odd rows can be eliminated alongside the even ones.
"""

import enum
import logging
from dataclasses import dataclass
from typing import Iterator, List, Optional, Tuple

import mpmath
import numpy as np

from spiralrg.errors import DomainError, PivotNearZero
from spiralrg.hamiltonian import BandedSymMatrix, Variant
from spiralrg.precision import DOUBLE_BITS, Precision
from spiralrg.rgt import EventKind, XiVector

logger = logging.getLogger(__name__)

DEFAULT_PIVOT_TOL = 1e-12


class Parity(str, enum.Enum):
    EVEN = "even"
    ODD = "odd"
    BOTH = "both"

    def admits(self, n: int) -> bool:
        if self is Parity.BOTH:
            return True
        return (n % 2 == 0) == (self is Parity.EVEN)


@dataclass(frozen=True)
class DecimationSettings:
    target_cutoff: int
    E: float = 0.0
    parity: Parity = Parity.EVEN
    pivot_tol: float = DEFAULT_PIVOT_TOL
    precision_bits: int = DOUBLE_BITS

    def __post_init__(self):
        object.__setattr__(self, "parity", Parity(self.parity))
        if self.target_cutoff < 0:
            raise DomainError(f"target cutoff must be non-negative, got {self.target_cutoff}")
        if not self.parity.admits(self.target_cutoff):
            raise DomainError(
                f"target cutoff {self.target_cutoff} is not in the {self.parity.value} sector"
            )


@dataclass(frozen=True)
class DecimationStep:
    step: int
    matrix: BandedSymMatrix
    pivot: object
    event: Optional[EventKind] = None


def _schur_last(bands: np.ndarray, E) -> Tuple[np.ndarray, object]:
    width = bands.shape[0] - 1
    last = bands.shape[1] - 1
    pivot = bands[0, last] - E
    # column[d] = M[last - d, last]
    column = {d: bands[d, last - d] for d in range(1, width + 1) if last - d >= 0}
    reduced = bands[:, :last].copy()
    if pivot == 0:
        return reduced, pivot
    for d1, upper in column.items():
        for d2 in range(d1, width + 1):
            if d2 not in column:
                break
            reduced[d2 - d1, last - d2] -= upper * column[d2] / pivot
    return reduced, pivot


def eliminate_last(matrix: BandedSymMatrix, E, pivot_tol: float = DEFAULT_PIVOT_TOL) -> BandedSymMatrix:
    """Remove the last basis state. Raises PivotNearZero for |M[last,last] - E| below tolerance."""
    if matrix.dim < 2:
        raise DomainError("cannot eliminate from a 1x1 matrix")
    bands = matrix.bands
    scale = abs(bands[0, -1])
    reduced, pivot = _schur_last(bands, E)
    if abs(pivot) <= pivot_tol * max(scale, 1):
        raise PivotNearZero(f"pivot {pivot} at row {matrix.cutoff} below tolerance", pivot=pivot)
    return BandedSymMatrix(reduced)


def _to_working(matrix: BandedSymMatrix, precision: Precision) -> BandedSymMatrix:
    if precision.is_double:
        if matrix.bands.dtype == object:
            return matrix.astype(float)
        return matrix
    return matrix.astype(mpmath.mpf)


def decimation_steps(matrix: BandedSymMatrix, settings: DecimationSettings) -> Iterator[DecimationStep]:
    """Yield the matrix after each single-row elimination down to the target cutoff.

    A pivot below tolerance is recorded as a ``pivot_jump`` event; only an
    exactly vanishing pivot aborts. On mpmath bands the step is redone with four
    times the working precision. Double-precision runs only record the event;
    decimate with ``precision_bits`` above 53 to resolve the jump.
    """
    if settings.target_cutoff > matrix.cutoff:
        raise DomainError(f"target cutoff {settings.target_cutoff} exceeds matrix cutoff {matrix.cutoff}")
    if settings.target_cutoff < matrix.half_bandwidth:
        raise DomainError(
            f"target cutoff {settings.target_cutoff} is narrower than the band ({matrix.half_bandwidth})"
        )
    precision = Precision(settings.precision_bits)
    with precision.active():
        E = precision.number(settings.E)
        current = _to_working(matrix, precision)
        step = 0
        while current.cutoff > settings.target_cutoff:
            step += 1
            scale = abs(current.bands[0, -1])
            reduced, pivot = _schur_last(current.bands, E)
            event = None
            if abs(pivot) <= settings.pivot_tol * max(scale, 1):
                if pivot == 0:
                    raise PivotNearZero(
                        f"pivot vanishes at row {current.cutoff} (step {step})", step=step, pivot=pivot
                    )
                event = EventKind.PIVOT_JUMP
                if precision.is_double:
                    logger.warning("pivot %s at row %d in double precision", pivot, current.cutoff)
                else:
                    logger.info("pivot %s at row %d; redoing step at %d bits", pivot, current.cutoff,
                                4 * settings.precision_bits)
                    with mpmath.workprec(4 * settings.precision_bits):
                        reduced, pivot = _schur_last(current.bands, E)
            current = BandedSymMatrix(reduced)
            yield DecimationStep(step=step, matrix=current, pivot=pivot, event=event)


def decimate_to(matrix: BandedSymMatrix, settings: DecimationSettings) -> BandedSymMatrix:
    """H_n^N: every state above ``settings.target_cutoff`` eliminated at energy E."""
    result = _to_working(matrix, Precision(settings.precision_bits))
    for item in decimation_steps(matrix, settings):
        result = item.matrix
    return result


# (row, col) offsets below n whose ratio to the undecimated element forms xi:
# diagonal entries first, then off-diagonal ones.
CORNER_LAYOUT = {
    Variant.QUARTIC: ((0, 2), ((0, 2),)),
    Variant.SEXTIC: ((0, 2, 4), ((0, 2), (0, 4), (2, 4))),
    Variant.SSB: ((0, 1, 2, 3), ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))),
}


def corner_xi(reduced: BandedSymMatrix, original: BandedSymMatrix, n: int, variant) -> XiVector:
    """Read the RG state at cutoff n off the corner of the reduced matrix."""
    variant = Variant(variant)
    diagonals, off_diagonals = CORNER_LAYOUT[variant]
    deepest = max(diagonals + tuple(b for _, b in off_diagonals))
    if n - deepest < 0 or n > reduced.cutoff or n > original.cutoff:
        raise DomainError(f"cutoff {n} has no {variant.value} corner in these matrices")
    components = []
    for offset in diagonals:
        i = n - offset
        denominator = original.element(i, i) - i
        if denominator == 0:
            raise DomainError(f"undecimated diagonal element at {i} has no interaction part")
        components.append((reduced.element(i, i) - i) / denominator)
    for a, b in off_diagonals:
        denominator = original.element(n - a, n - b)
        if denominator == 0:
            raise DomainError(f"undecimated element ({n - a}, {n - b}) vanishes")
        components.append(reduced.element(n - a, n - b) / denominator)
    return XiVector(variant, tuple(components))


def decimation_trace(matrix: BandedSymMatrix, settings: DecimationSettings, variant) -> List[dict]:
    """Corner xi after every elimination that lands in the tracked sector."""
    variant = Variant(variant)
    diagonals, off_diagonals = CORNER_LAYOUT[variant]
    deepest = max(diagonals + tuple(b for _, b in off_diagonals))
    rows = []
    k = 0
    pending_event = None
    for item in decimation_steps(matrix, settings):
        pending_event = pending_event or item.event
        n = item.matrix.cutoff
        if not settings.parity.admits(n) or n < deepest:
            continue
        k += 1
        xi = corner_xi(item.matrix, matrix, n, variant)
        rows.append({"k": k, "n": n, "xi": xi, "pivot": item.pivot, "event": pending_event})
        pending_event = None
    return rows


def trace_rows(trace: List[dict]) -> List[dict]:
    """Flatten ``decimation_trace`` output to k, n, xi_1..xi_d, pivot, event columns."""
    out = []
    for row in trace:
        flat = {"k": row["k"], "n": row["n"]}
        for i, value in enumerate(row["xi"], start=1):
            flat[f"xi_{i}"] = float(value)
        flat["pivot"] = float(row["pivot"])
        flat["event"] = row["event"].value if row["event"] else ""
        out.append(flat)
    return out
