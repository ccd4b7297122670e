"""Lowest eigenvalues of banded symmetric matrices.

The band is reduced to tridiagonal form by Givens rotations confined to the
band plus one bulge diagonal, and LAPACK's bisection driver picks the requested
eigenvalues. Every returned value is then certified with an independent Sturm
count, so a wrong answer turns into an error instead of a number.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
import scipy.linalg

from spiralrg.decimation import DecimationSettings, decimate_to
from spiralrg.errors import DomainError, EigenConvergenceError
from spiralrg.hamiltonian import BandedSymMatrix, ModelVariant, Variant, build_matrix

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DENSE_CHECK_DIM = 64


@dataclass(frozen=True)
class SpectrumRequest:
    matrix: BandedSymMatrix
    count: int = 1
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        if not 1 <= self.count <= self.matrix.dim:
            raise DomainError(f"count must lie in [1, {self.matrix.dim}], got {self.count}")
        if not self.tol > 0:
            raise DomainError(f"tolerance must be positive, got {self.tol}")


def _dense_float(matrix: BandedSymMatrix) -> np.ndarray:
    return np.array(matrix.to_dense(), dtype=float)


def _rotate(work: np.ndarray, p: int, col: int) -> None:
    """Givens similarity in the (p, p+1) plane that zeroes A[p+1, col] against A[p, col].

    ``work[d, i]`` holds A[i + d, i]; its last row is room for one bulge.
    """
    q = p + 1
    target = work[q - col, col]
    if target == 0.0:
        return
    pivot = work[p - col, col]
    r = math.hypot(pivot, target)
    c, s = pivot / r, target / r
    reach = work.shape[0] - 1
    n = work.shape[1]
    before = np.arange(max(0, q - reach), p)
    ap, aq = work[p - before, before], work[q - before, before]
    work[p - before, before] = c * ap + s * aq
    work[q - before, before] = c * aq - s * ap
    after = np.arange(q + 1, min(n - 1, p + reach) + 1)
    bp, bq = work[after - p, p], work[after - q, q]
    work[after - p, p] = c * bp + s * bq
    work[after - q, q] = c * bq - s * bp
    app, aqq, apq = work[0, p], work[0, q], work[1, p]
    work[0, p] = c * c * app + 2 * c * s * apq + s * s * aqq
    work[0, q] = s * s * app - 2 * c * s * apq + c * c * aqq
    work[1, p] = c * s * (aqq - app) + (c * c - s * s) * apq
    work[q - col, col] = 0.0


def _band_to_tridiagonal(bands: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Reduce the band one diagonal at a time, chasing each bulge off the end."""
    width, n = bands.shape[0] - 1, bands.shape[1]
    work = np.zeros((width + 2, n))
    work[: width + 1] = bands
    for m in range(width, 1, -1):
        for j in range(n - m):
            col, row = j, j + m
            while row < n:
                _rotate(work, row - 1, col)
                col, row = row - 1, row + m
    return work[0].copy(), work[1, : n - 1].copy()


def tridiagonalize(matrix: BandedSymMatrix) -> Tuple[np.ndarray, np.ndarray]:
    """(diagonal, off-diagonal) of an orthogonally similar tridiagonal matrix.

    When every odd diagonal vanishes the even and odd sectors are reduced
    separately and joined by a zero coupling; the sector split is a
    permutation, so the result is still an orthogonal similarity.
    """
    bands = np.array(matrix.bands, dtype=float)
    n = matrix.dim
    if n >= 2 and matrix.half_bandwidth >= 2 and not np.any(bands[1::2]):
        pieces = [_band_to_tridiagonal(bands[0::2, sector::2]) for sector in (0, 1)]
        diagonal = np.concatenate([pieces[0][0], pieces[1][0]])
        off = np.concatenate([pieces[0][1], [0.0], pieces[1][1]])
        return diagonal, off
    return _band_to_tridiagonal(bands)


def sturm_count(diagonal: np.ndarray, off: np.ndarray, x: float) -> int:
    """Number of eigenvalues of the tridiagonal matrix strictly below x."""
    count = 0
    q = 1.0
    tiny = np.finfo(float).tiny
    for i, d in enumerate(diagonal):
        coupling = off[i - 1] ** 2 if i > 0 else 0.0
        q = d - x - (coupling / q if i > 0 else 0.0)
        if q == 0:
            q = -tiny
        if q < 0:
            count += 1
    return count


def _bisect(diagonal, off, index: int, low: float, high: float, tol: float) -> Tuple[float, float]:
    for _ in range(200):
        if high - low <= tol:
            break
        mid = 0.5 * (low + high)
        if sturm_count(diagonal, off, mid) > index:
            high = mid
        else:
            low = mid
    return low, high


def _gershgorin(diagonal, off) -> Tuple[float, float]:
    radius = np.zeros_like(diagonal)
    radius[:-1] += np.abs(off)
    radius[1:] += np.abs(off)
    return float(np.min(diagonal - radius)), float(np.max(diagonal + radius))


def lowest_eigenvalues(request: SpectrumRequest) -> List[float]:
    """The ``count`` smallest eigenvalues in ascending order, each certified to ``tol``."""
    diagonal, off = tridiagonalize(request.matrix)
    n = diagonal.size
    if n == 1:
        return [float(diagonal[0])]
    values = scipy.linalg.eigvalsh_tridiagonal(
        diagonal, off, select="i", select_range=(0, request.count - 1),
        lapack_driver="stebz", tol=request.tol,
    )
    scale = max(1.0, float(np.max(np.abs(diagonal))), float(np.max(np.abs(off))) if off.size else 0.0)
    slack = max(request.tol, 64 * np.finfo(float).eps * scale)
    out = []
    for index, value in enumerate(values):
        below = sturm_count(diagonal, off, value - slack)
        above = sturm_count(diagonal, off, value + slack)
        if not below <= index < above:
            low, high = _gershgorin(diagonal, off)
            low, high = _bisect(diagonal, off, index, low, high, request.tol)
            if not (sturm_count(diagonal, off, low) <= index < sturm_count(diagonal, off, high + slack)):
                raise EigenConvergenceError(
                    f"eigenvalue {index} could not be certified", index=index, bounds=(low, high)
                )
            logger.warning("eigenvalue %d re-bracketed by bisection: %s -> %s", index, value, 0.5 * (low + high))
            value = 0.5 * (low + high)
        out.append(float(value))
    if n <= DENSE_CHECK_DIM:
        dense = scipy.linalg.eigvalsh(_dense_float(request.matrix))[: request.count]
        mismatch = float(np.max(np.abs(dense - np.array(out))))
        if mismatch > 1e3 * slack:
            logger.warning("dense cross-check differs by %.3e", mismatch)
    return out


def ground_energy(matrix: BandedSymMatrix, tol: float = DEFAULT_TOL) -> float:
    return lowest_eigenvalues(SpectrumRequest(matrix, 1, tol))[0]


@dataclass(frozen=True)
class VerificationReport:
    g: float
    E: float
    N: int
    n: int
    e0_full: float
    e0_renormalized: float
    e0_plain: float

    @property
    def error_renormalized(self) -> float:
        return abs(self.e0_renormalized - self.e0_full) / abs(self.e0_full)

    @property
    def error_plain(self) -> float:
        return abs(self.e0_plain - self.e0_full) / abs(self.e0_full)

    @property
    def improvement(self) -> float:
        return self.error_plain / self.error_renormalized if self.error_renormalized else float("inf")

    def as_dict(self) -> dict:
        return {
            "g": self.g, "E": self.E, "N": self.N, "n": self.n,
            "e0_full": self.e0_full, "e0_renormalized": self.e0_renormalized, "e0_plain": self.e0_plain,
            "rel_error_renormalized": self.error_renormalized, "rel_error_plain": self.error_plain,
            "improvement": self.improvement,
        }


def verify_renormalization(g: float, E: float, N: int, n: int, variant=Variant.QUARTIC) -> VerificationReport:
    """Ground energies of H^N, the decimated H_n^N and the plainly cut H^n."""
    if not N > n:
        raise DomainError(f"N={N} must exceed n={n}")
    model = ModelVariant(variant, g)
    full = build_matrix(model, N)
    parity = "both" if not model.parity_separating else ("even" if n % 2 == 0 else "odd")
    renormalized = decimate_to(full, DecimationSettings(target_cutoff=n, E=E, parity=parity))
    report = VerificationReport(
        g=g, E=E, N=N, n=n,
        e0_full=ground_energy(full),
        e0_renormalized=ground_energy(renormalized),
        e0_plain=ground_energy(build_matrix(model, n)),
    )
    logger.info(
        "N=%d n=%d g=%s: renormalized error %.3e, plain error %.3e",
        N, n, g, report.error_renormalized, report.error_plain,
    )
    return report
