"""Oscillator-basis Hamiltonian matrices with an energy cutoff.

H = a†a + interaction, with the interaction a polynomial in x = a + a†:

    quartic  g x⁴
    sextic   g x⁶
    ssb      g x³ + g² x⁴   (quartic well with negative quadratic term, expanded
                             about one of its minima)

The constant 1/2 of the harmonic part is omitted. Matrix elements of x^m come
from multiplying explicit ladder matrices on a basis extended by m states and
truncating afterwards, so the rows next to the cutoff are not corrupted.
"""

import enum
import logging
import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from spiralrg.errors import DomainError

logger = logging.getLogger(__name__)

MIN_CUTOFF = 8


class Variant(str, enum.Enum):
    QUARTIC = "quartic"
    SEXTIC = "sextic"
    SSB = "ssb"


# (band offsets, xi dimension, cutoff stride of one RG step)
_LAYOUT = {
    Variant.QUARTIC: ((0, 2, 4), 3, 2),
    Variant.SEXTIC: ((0, 2, 4, 6), 6, 2),
    Variant.SSB: ((0, 1, 2, 3, 4), 10, 1),
}


@dataclass(frozen=True)
class ModelVariant:
    tag: Variant
    g: float

    def __post_init__(self):
        object.__setattr__(self, "tag", Variant(self.tag))
        if not self.g > 0:
            raise DomainError(f"coupling g must be positive, got {self.g}")

    @property
    def band_offsets(self) -> Tuple[int, ...]:
        return _LAYOUT[self.tag][0]

    @property
    def half_bandwidth(self) -> int:
        return self.band_offsets[-1]

    @property
    def xi_dim(self) -> int:
        return _LAYOUT[self.tag][1]

    @property
    def stride(self) -> int:
        return _LAYOUT[self.tag][2]

    @property
    def parity_separating(self) -> bool:
        return self.stride == 2

    def interaction_terms(self) -> List[Tuple[float, int]]:
        """(coefficient, power of x) pairs of the interaction."""
        if self.tag is Variant.QUARTIC:
            return [(self.g, 4)]
        if self.tag is Variant.SEXTIC:
            return [(self.g, 6)]
        return [(self.g, 3), (self.g ** 2, 4)]


class BandedSymMatrix:
    """Real symmetric matrix stored by diagonals.

    ``bands[d, i]`` holds M[i, i + d] for 0 <= d <= half_bandwidth; entries past
    the end of a diagonal are zero padding. Only offsets >= 0 are stored, so the
    matrix is symmetric by construction. Storage is read-only; the element type
    is float64 or Python objects (mpmath numbers) for extended precision.
    """

    def __init__(self, bands: np.ndarray):
        bands = np.array(bands, copy=True)
        if bands.ndim != 2 or bands.shape[1] < 1:
            raise DomainError(f"bands must be a (half_bandwidth+1, dim) array, got shape {bands.shape}")
        dim = bands.shape[1]
        for d in range(1, bands.shape[0]):
            bands[d, max(dim - d, 0):] = 0
        bands.flags.writeable = False
        self._bands = bands

    @classmethod
    def from_dense(cls, dense, half_bandwidth: int, dtype=None) -> "BandedSymMatrix":
        dense = np.asarray(dense, dtype=dtype)
        dim = dense.shape[0]
        bands = np.zeros((half_bandwidth + 1, dim), dtype=dense.dtype)
        for d in range(half_bandwidth + 1):
            if d < dim:
                bands[d, : dim - d] = np.diagonal(dense, offset=d)
        return cls(bands)

    @property
    def bands(self) -> np.ndarray:
        return self._bands

    @property
    def dim(self) -> int:
        return self._bands.shape[1]

    @property
    def cutoff(self) -> int:
        return self.dim - 1

    @property
    def half_bandwidth(self) -> int:
        return self._bands.shape[0] - 1

    def element(self, k: int, l: int):
        if not (0 <= k < self.dim and 0 <= l < self.dim):
            raise IndexError(f"({k}, {l}) outside a {self.dim}x{self.dim} matrix")
        lo, hi = min(k, l), max(k, l)
        d = hi - lo
        if d > self.half_bandwidth:
            return self._bands.dtype.type(0) if self._bands.dtype != object else 0
        return self._bands[d, lo]

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.dim, self.dim), dtype=self._bands.dtype)
        for d in range(min(self.half_bandwidth, self.dim - 1) + 1):
            idx = np.arange(self.dim - d)
            dense[idx, idx + d] = self._bands[d, : self.dim - d]
            dense[idx + d, idx] = self._bands[d, : self.dim - d]
        return dense

    def astype(self, convert) -> "BandedSymMatrix":
        """Copy with every stored element passed through ``convert`` (e.g. mpmath.mpf)."""
        out = np.empty(self._bands.shape, dtype=object)
        for idx, value in np.ndenumerate(self._bands):
            out[idx] = convert(value)
        return BandedSymMatrix(out)

    def truncated(self, dim: int) -> "BandedSymMatrix":
        if not 1 <= dim <= self.dim:
            raise DomainError(f"cannot truncate a {self.dim}-dim matrix to {dim}")
        return BandedSymMatrix(self._bands[:, :dim])

    def triplets(self) -> List[Tuple[int, int, float]]:
        """(row, col, value) for stored nonzeros, row <= col."""
        out = []
        for d in range(self.half_bandwidth + 1):
            for i in range(self.dim - d):
                value = self._bands[d, i]
                if value != 0:
                    out.append((i, i + d, value))
        out.sort()
        return out

    def dense_text(self, precision: int = 6) -> str:
        dense = np.array(self.to_dense(), dtype=float)
        return np.array2string(dense, precision=precision, max_line_width=10_000, threshold=10**9)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BandedSymMatrix):
            return NotImplemented
        return self._bands.shape == other._bands.shape and bool(np.all(self._bands == other._bands))

    def __repr__(self) -> str:
        return f"BandedSymMatrix(dim={self.dim}, half_bandwidth={self.half_bandwidth})"


def ladder_power(power: int, size: int) -> np.ndarray:
    """Dense ⟨k|(a + a†)^power|l⟩ for 0 <= k, l < size."""
    extended = size + power
    a = np.diag(np.sqrt(np.arange(1, extended, dtype=float)), k=1)
    x = a + a.T
    return np.linalg.matrix_power(x, power)[:size, :size]


def build_matrix(variant: ModelVariant, N: int) -> BandedSymMatrix:
    """Truncated Hamiltonian H^N: rows and columns 0..N of ⟨k|H|l⟩."""
    if N < MIN_CUTOFF:
        raise DomainError(f"cutoff N must be at least {MIN_CUTOFF}, got {N}")
    size = N + 1
    dense = np.diag(np.arange(size, dtype=float))
    for coefficient, power in variant.interaction_terms():
        dense += coefficient * ladder_power(power, size)
    logger.debug("built %s matrix N=%d g=%s", variant.tag.value, N, variant.g)
    return BandedSymMatrix.from_dense(dense, variant.half_bandwidth)


def free_matrix(dim: int) -> BandedSymMatrix:
    """diag(0, 1, ..., dim-1): the matrix at zero coupling."""
    bands = np.zeros((1, dim))
    bands[0] = np.arange(dim)
    return BandedSymMatrix(bands)


def quartic_elements(n: int) -> Tuple[float, float, float]:
    """Closed forms of ⟨n|x⁴|n⟩, ⟨n|x⁴|n-2⟩ and ⟨n|x⁴|n-4⟩."""
    if n < 0:
        raise DomainError(f"basis index must be non-negative, got {n}")
    diagonal = 6.0 * n * n + 6.0 * n + 3.0
    second = math.sqrt(n * (n - 1)) * (4 * n - 2) if n >= 2 else 0.0
    fourth = math.sqrt(n * (n - 1) * (n - 2) * (n - 3)) if n >= 4 else 0.0
    return diagonal, second, fourth


def ssb_coupling_from_potential(A: float, B: float) -> float:
    """Dimensionless g of the cubic+quartic form for H = -d²/dφ² - Aφ² + Bφ⁴."""
    if not A > 0 or not B > 0:
        raise DomainError(f"A and B must be positive, got A={A}, B={B}")
    return math.sqrt(B) / (8.0 * A) ** 0.75


def xi_dimension(tag) -> int:
    """Length of the RG state vector for a model variant."""
    return _LAYOUT[Variant(tag)][1]
