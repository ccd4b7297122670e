"""Fixed points of the RG maps and their linearization.

The approximate quartic map has the closed-form pair ξ±; the attractive one
is a spiral sink with contraction r and rotation ω per step. The exact map
depends on n, so it has floating sequences ξ±(n) instead, found by running
the flow forward (attractive) or the inverse steps upward (repulsive). The
sextic and SSB maps are solved numerically by multi-start damped Newton.
"""

import enum
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import mpmath
import numpy as np
from numpy.polynomial import Polynomial

from spiralrg.errors import DegenerateBasis, DomainError, NoRealRoot
from spiralrg.hamiltonian import Variant, xi_dimension
from spiralrg.precision import DEFAULT_BITS, Precision, asin, field_of, pi_like, sqrt
from spiralrg.rgt import (
    FlowParams,
    Stepper,
    StepperKind,
    XiVector,
    phi_functions,
    repulsive_sequence,
    run_flow,
    sextic_coefficients,
    step_approx_quartic,
)

logger = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10
DEDUPE_RADIUS = 1e-8
JACOBIAN_EPS = 1e-7


@dataclass(frozen=True)
class SpiralConstants:
    gN: object
    a: object
    p: object
    r: object
    omega: object
    period: object

    def repulsive(self) -> "SpiralConstants":
        """Constants of the ξ⁻ branch: p → −p, so r → 1/r."""
        return SpiralConstants(self.gN, self.a, -self.p, 1 / self.r, self.omega, self.period)


def spiral_constants(gN) -> SpiralConstants:
    if not gN > 0:
        raise DomainError(f"gN must be positive, got {gN}")
    one = field_of(gN)(1)
    a = one / (4 * gN)
    # p² = √(a + a²/4) − a/2, rationalized against cancellation at large a
    p = sqrt(a / (sqrt(a + a * a / 4) + a / 2))
    r = (one - p) / (one + p)
    omega = 2 * asin(p)
    return SpiralConstants(gN=gN, a=a, p=p, r=r, omega=omega, period=2 * pi_like(p) / omega)


def analytic_pair(gN) -> Tuple[XiVector, XiVector, SpiralConstants]:
    """Closed-form fixed points (ξ⁺, ξ⁻) of the approximate quartic step."""
    constants = spiral_constants(gN)
    p = constants.p
    one = field_of(p)(1)
    c = one / (6 * gN)
    up, down = (one + p) / (one - p), (one - p) / (one + p)
    plus = XiVector(Variant.QUARTIC, (-c + up / 6, one - down / 6, (one + p) / 2))
    minus = XiVector(Variant.QUARTIC, (-c + down / 6, one - up / 6, (one - p) / 2))
    for label, point in (("+", plus), ("-", minus)):
        image = step_approx_quartic(point, gN)
        residual = max(abs(x - y) for x, y in zip(image, point))
        if residual > 1e-12:
            logger.warning("analytic fixed point xi%s has residual %s at gN=%s", label, residual, gN)
    return plus, minus, constants


def spiral_matrix(p: float) -> np.ndarray:
    """G of F'(ξ⁺) = rG."""
    p = float(p)
    return np.array(
        [
            [4 * (1 - p * p), (1 + p) / (1 - p), -8.0 / 3.0 * (1 + p)],
            [(1 - p) / (1 + p), 0.0, 0.0],
            [3 * (1 - p), 0.0, -1.0],
        ]
    )


def linearized_map(p: float) -> np.ndarray:
    if not 0 <= p < 1:
        raise DomainError(f"p must lie in [0, 1), got {p}")
    r = (1 - p) / (1 + p)
    return r * spiral_matrix(p)


def eigensystem(p: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(v, v1, v2): Gv = v and G rotates span{v1, v2} clockwise by ω."""
    p = float(p)
    if p == 0:
        raise DegenerateBasis("eigenbasis collapses at p = 0")
    if abs(p) >= 1:
        raise DomainError(f"|p| must be below 1, got {p}")
    s = math.sqrt(1 - p * p)
    v = np.array([2 / 3 / (1 - p), 2 / 3 / (1 + p), 1.0])
    v1 = np.array([2 / 3 * s / (1 - p), 2 / 3 * s / (1 + p), 1 / s])
    v2 = np.array([2 / 3 * p / (1 - p), -2 / 3 * p / (1 + p), 0.0])
    return v, v1, v2


def _denominator_quartic(phi1, phi2, phi3, c) -> Polynomial:
    """Fixed-point condition of a quartic step, cleared of poles, as a polynomial in d.

    With ξ2 = 1 − φ2/d and ξ3 = d/(d + φ3) the first component gives
    (d − c − 1) d (d + φ3)² + φ2 (d + φ3)² + φ1 d² = 0.
    """
    shifted = Polynomial([phi3, 1]) ** 2
    return Polynomial([-c - 1, 1]) * Polynomial([0, 1]) * shifted + phi2 * shifted + phi1 * Polynomial([0, 0, 1])


def _real_roots(poly: Polynomial, exclude: Sequence[float] = ()) -> List[float]:
    out = []
    derivative = poly.deriv()
    for z in poly.roots():
        if abs(z.imag) > 1e-9 * max(1.0, abs(z)):
            continue
        x = float(z.real)
        for _ in range(3):
            slope = derivative(x)
            if slope == 0:
                break
            x -= poly(x) / slope
        if all(abs(x - bad) > 1e-12 for bad in exclude):
            out.append(x)
    return sorted(out)


def _quartic_point(d: float, phi2: float, phi3: float, c: float) -> XiVector:
    return XiVector(Variant.QUARTIC, (d - c, 1 - phi2 / d, d / (d + phi3)))


def floating_fp_approx(n: int, g: float, E: float = 0.0) -> XiVector:
    """ξ_a⁺(n): solve the exact step with ξ(n−2) ≈ ξ(n); keep the root with larger components."""
    if n < 6:
        raise DomainError(f"floating fixed point needs n >= 6, got {n}")
    phi1, phi2, phi3, p = phi_functions(n)
    c = (n - E) / (g * p)
    roots = _real_roots(_denominator_quartic(phi1, phi2, phi3, c), exclude=(0.0, -phi3))
    if not roots:
        raise NoRealRoot(f"no real floating fixed point at n={n}, g={g}, E={E}")
    return _quartic_point(roots[-1], phi2, phi3, c)


def quartic_seeds(gN: float) -> List[np.ndarray]:
    """Every real fixed point of the approximate quartic step, from its denominator polynomial."""
    c = 1 / (6 * gN)
    phi1, phi2, phi3 = 4 / 9, 1 / 36, 1 / 6
    roots = _real_roots(_denominator_quartic(phi1, phi2, phi3, c), exclude=(0.0, -phi3))
    return [_quartic_point(d, phi2, phi3, c).as_floats() for d in roots]


def floating_fp_sequence(n_low: int, g, E, N_prime: int, xi_seed: Optional[XiVector] = None,
                         precision_bits: int = DEFAULT_BITS) -> Dict[int, XiVector]:
    """ξ⁺(n) for n_low <= n <= N′ by running the exact flow down from N′."""
    if N_prime <= n_low or (N_prime - n_low) % 2:
        raise DomainError(f"N'={N_prime} must exceed n={n_low} with the same parity")
    params = FlowParams(
        g=g, E=E, N=N_prime, n_final=n_low, stepper=StepperKind.EXACT_QUARTIC,
        precision_bits=precision_bits, parity="even" if N_prime % 2 == 0 else "odd",
    )
    trace = run_flow(params, xi_seed or XiVector.ones(Variant.QUARTIC))
    return trace.as_mapping()


def floating_fp_numeric(n: int, g, E, N_prime: int, xi_seed: Optional[XiVector] = None,
                        precision_bits: int = DEFAULT_BITS) -> XiVector:
    return floating_fp_sequence(n, g, E, N_prime, xi_seed, precision_bits)[n]


def repulsive_fp_numeric(n: int, g, E=0, depth: int = 200, seed: Optional[XiVector] = None,
                         precision_bits: int = DEFAULT_BITS) -> XiVector:
    return repulsive_sequence(n, n, g, E, depth=depth, seed=seed, precision_bits=precision_bits)[n]


def numeric_jacobian(fn: Callable[[np.ndarray], np.ndarray], x, eps: float = JACOBIAN_EPS) -> np.ndarray:
    """Central-difference Jacobian with steps relative to |x_i|."""
    x = np.asarray(x, dtype=float)
    columns = []
    for i in range(x.size):
        h = eps * max(1.0, abs(x[i]))
        e = np.zeros_like(x)
        e[i] = h
        columns.append((np.asarray(fn(x + e)) - np.asarray(fn(x - e))) / (2 * h))
    return np.column_stack(columns)


def floating_spectrum(n: int, g, E, xi_plus: XiVector) -> np.ndarray:
    """Eigenvalues of the exact step's derivative at ξ⁺(n)."""
    fn = Stepper(StepperKind.EXACT_QUARTIC, float(g), float(E)).as_array_map(n)
    return np.linalg.eigvals(numeric_jacobian(fn, xi_plus.as_floats()))


class Classification(str, enum.Enum):
    ATTRACTIVE = "attractive"
    REPULSIVE = "repulsive"
    MIXED = "mixed"


def classify(eigenvalues) -> Classification:
    moduli = np.abs(np.asarray(eigenvalues))
    if np.all(moduli < 1):
        return Classification.ATTRACTIVE
    if np.all(moduli > 1):
        return Classification.REPULSIVE
    return Classification.MIXED


@dataclass(frozen=True)
class FixedPointRecord:
    location: XiVector
    jacobian_eigenvalues: Tuple[complex, ...]
    classification: Classification
    residual: float

    def as_dict(self) -> dict:
        return {
            "location": [float(x) for x in self.location],
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.jacobian_eigenvalues],
            "moduli": [float(abs(z)) for z in self.jacobian_eigenvalues],
            "classification": self.classification.value,
            "residual": self.residual,
        }


def _evaluate(fn, x) -> Optional[np.ndarray]:
    try:
        with np.errstate(all="ignore"):
            value = np.asarray(fn(x), dtype=float) - x
    except ArithmeticError:
        return None
    return value if np.all(np.isfinite(value)) else None


def _newton(fn, x0, tol: float, max_iter: int) -> Optional[np.ndarray]:
    x = np.array(x0, dtype=float)
    identity = np.eye(x.size)
    for _ in range(max_iter):
        residual = _evaluate(fn, x)
        if residual is None:
            return None
        norm = np.max(np.abs(residual))
        if norm < tol * 1e-3:
            return x
        try:
            jacobian = numeric_jacobian(fn, x) - identity
        except ArithmeticError:
            return None
        if not np.all(np.isfinite(jacobian)):
            return None
        try:
            delta = np.linalg.solve(jacobian, -residual)
        except np.linalg.LinAlgError:
            delta = np.linalg.lstsq(jacobian, -residual, rcond=None)[0]
        step = 1.0
        while True:
            trial = x + step * delta
            trial_residual = _evaluate(fn, trial)
            if trial_residual is not None and np.max(np.abs(trial_residual)) < norm:
                break
            step /= 2
            if step < 1e-6:
                break
        if trial_residual is None:
            return None
        if np.max(np.abs(trial - x)) < 1e-15 * max(1.0, np.max(np.abs(x))):
            return trial
        x = trial
    return x


def find_fixed_points(fn: Callable[[np.ndarray], np.ndarray], variant, seeds, tol: float = RESIDUAL_TOL,
                      radius: float = DEDUPE_RADIUS, max_iter: int = 60) -> Tuple[List[FixedPointRecord], int]:
    """Multi-start damped Newton on fn(x) − x; returns (records sorted by location, failed starts)."""
    roots: List[np.ndarray] = []
    failed = 0
    for seed in seeds:
        x = _newton(fn, seed, tol, max_iter)
        residual = None if x is None else _evaluate(fn, x)
        if residual is None or np.max(np.abs(residual)) >= tol:
            failed += 1
            continue
        if any(np.max(np.abs(x - known)) < radius for known in roots):
            continue
        roots.append(x)
    records = []
    for x in sorted(roots, key=tuple):
        eigenvalues = np.linalg.eigvals(numeric_jacobian(fn, x))
        records.append(
            FixedPointRecord(
                location=XiVector(variant, tuple(float(v) for v in x)),
                jacobian_eigenvalues=tuple(complex(z) for z in eigenvalues),
                classification=classify(eigenvalues),
                residual=float(np.max(np.abs(_evaluate(fn, x)))),
            )
        )
    if failed:
        logger.info("%d of %d starts did not converge to a fixed point", failed, len(seeds))
    return records, failed


def lattice_seeds(dim: int, points: int = 3, low: float = -0.5, high: float = 1.5) -> List[np.ndarray]:
    axis = np.linspace(low, high, points)
    return [np.array(p) for p in itertools.product(axis, repeat=dim)]


def _poly_mul(a, b):
    out = [mpmath.mpf(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def _poly_sub(a, b):
    size = max(len(a), len(b))
    a = list(a) + [mpmath.mpf(0)] * (size - len(a))
    b = list(b) + [mpmath.mpf(0)] * (size - len(b))
    return [x - y for x, y in zip(a, b)]


def _poly_eval(coeffs, x):
    return mpmath.polyval(list(reversed(coeffs)), x)


def sextic_seeds(N: int, g: float, precision_bits: int = 400) -> List[np.ndarray]:
    """Real fixed points of the large-N sextic step via a single polynomial in the denominator d.

    For fixed d, ξ3, ξ5, ξ6 follow from ξ4, and ξ4 solves the quadratic
    A4A5 ξ4² + (A5A6 − A4 d − d²) ξ4 + d² − A6 d = 0. The first component then
    requires (A2A5² + A1 d²) ξ4² − 2A2A5 d ξ4 + d⁴ − (1 + c) d³ + (A3 + A2) d² = 0.
    The resultant of the two quadratics is a polynomial in d alone.
    """
    with mpmath.workprec(precision_bits):
        precision = Precision(precision_bits)
        a1, a2, a3, a4, a5, a6 = sextic_coefficients(N, precision)
        c = 1 / (20 * mpmath.mpf(g) * N * N)
        zero = mpmath.mpf(0)
        quad1 = ([a4 * a5], [a5 * a6, -a4, -1], [zero, -a6, 1])
        quad2 = ([a2 * a5 ** 2, zero, a1], [zero, -2 * a2 * a5], [zero, zero, a3 + a2, -(1 + c), 1])
        (qa1, qb1, qc1), (qa2, qb2, qc2) = quad1, quad2
        u = _poly_sub(_poly_mul(qa1, qc2), _poly_mul(qa2, qc1))
        v = _poly_sub(_poly_mul(qa1, qb2), _poly_mul(qa2, qb1))
        w = _poly_sub(_poly_mul(qb1, qc2), _poly_mul(qb2, qc1))
        resultant = _poly_sub(_poly_mul(u, u), _poly_mul(v, w))
        while resultant and resultant[0] == 0:
            resultant.pop(0)
        scale = max(abs(x) for x in resultant)
        while abs(resultant[-1]) <= scale * mpmath.mpf(2) ** (-precision_bits // 2):
            resultant.pop()
        try:
            roots = mpmath.polyroots(list(reversed(resultant)), maxsteps=800, extraprec=precision_bits)
        except mpmath.mp.NoConvergence:
            logger.warning("extended-precision root polish did not converge; falling back to doubles")
            roots = [mpmath.mpc(z) for z in np.roots([float(x) for x in reversed(resultant)])]
        seeds = []
        for z in roots:
            z = mpmath.mpc(z)
            if abs(z.imag) > mpmath.mpf(10) ** -12 * max(1, abs(z)) or abs(z.real) < mpmath.mpf(10) ** -12:
                continue
            d = z.real
            denominator = _poly_eval(v, d)
            if abs(denominator) > mpmath.mpf(10) ** -30:
                x4 = -_poly_eval(u, d) / denominator
            else:
                qa, qb, qc = (_poly_eval(q, d) for q in quad1)
                disc = mpmath.sqrt(max(qb * qb - 4 * qa * qc, zero))
                candidates = [(-qb + disc) / (2 * qa), (-qb - disc) / (2 * qa)]
                x4 = min(
                    candidates,
                    key=lambda x: abs(_poly_eval(qa2, d) * x * x + _poly_eval(qb2, d) * x + _poly_eval(qc2, d)),
                )
            x5 = 1 - a5 * x4 / d
            x6 = 1 - a6 * x5 / d
            x3 = 1 - a3 / d
            x2 = x3 - a2 * x5 * x5 / d
            seeds.append(np.array([float(d - c), float(x2), float(x3), float(x4), float(x5), float(x6)]))
    return seeds


def default_seeds(kind: StepperKind, N: int, g: float, lattice_points: int = 3,
                  random_starts: int = 200) -> List[np.ndarray]:
    kind = StepperKind(kind)
    dim = xi_dimension(kind.variant)
    seeds = [np.ones(dim)]
    if kind is StepperKind.APPROX_QUARTIC:
        seeds += quartic_seeds(g * N)
    elif kind is StepperKind.SEXTIC_LARGE_N:
        seeds += sextic_seeds(N, g)
    if kind is StepperKind.SSB_LARGE_N:
        rng = np.random.default_rng(0)
        seeds += list(rng.uniform(-0.5, 1.5, size=(random_starts, dim)))
    else:
        seeds += lattice_seeds(dim, lattice_points)
    return seeds


def find_numeric(stepper, dim: int, N: int, g: float, seeds: Optional[list] = None) -> List[FixedPointRecord]:
    """Fixed points of an n-independent stepper, classified by Jacobian eigenvalue moduli."""
    kind = StepperKind(stepper)
    if kind is StepperKind.EXACT_QUARTIC:
        raise DomainError("the exact quartic step depends on n and has floating fixed points only")
    if dim != xi_dimension(kind.variant):
        raise DomainError(f"{kind.value} acts on {xi_dimension(kind.variant)} components, not {dim}")
    if seeds is None:
        seeds = default_seeds(kind, N, g)
    fn = Stepper(kind, float(g), 0.0, N).as_array_map(N)
    records, _ = find_fixed_points(fn, kind.variant, [np.asarray(s, dtype=float) for s in seeds])
    logger.info(
        "%s N=%d g=%s: %d fixed points (%s)", kind.value, N, g, len(records),
        ", ".join(r.classification.value for r in records),
    )
    return records
