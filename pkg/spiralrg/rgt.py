"""Closed-form RG recursions and the flow driver.

The exact quartic step takes the three corner parameters xi(n) to xi(n-2);
its large-n limit drops every n dependence except through gN. The sextic and
SSB steps are the large-N forms with O(1/N^3) terms dropped, written with the
initial cutoff N in their coefficients. Every stepper works on floats or on
mpmath numbers; the field is taken from the incoming xi.
"""

import enum
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from spiralrg.errors import DenominatorZero, DomainError, NonInvertible
from spiralrg.hamiltonian import Variant, xi_dimension
from spiralrg.precision import DEFAULT_BITS, DOUBLE_BITS, Precision, precision_of

logger = logging.getLogger(__name__)

DEFAULT_DENOMINATOR_TOL = 1e-12
EXACT_QUARTIC_FLOOR = 6


class EventKind(str, enum.Enum):
    DENOMINATOR_SIGN_CHANGE = "denominator_sign_change"
    DENOMINATOR_NEAR_ZERO = "denominator_near_zero"
    PIVOT_JUMP = "pivot_jump"
    DENOMINATOR_ZERO = "denominator_zero"
    VALIDITY_FLOOR = "validity_floor"


class StepperKind(str, enum.Enum):
    EXACT_QUARTIC = "exact_quartic"
    APPROX_QUARTIC = "approx_quartic"
    SEXTIC_LARGE_N = "sextic_large_n"
    SSB_LARGE_N = "ssb_large_n"

    @property
    def variant(self) -> Variant:
        if self is StepperKind.SEXTIC_LARGE_N:
            return Variant.SEXTIC
        if self is StepperKind.SSB_LARGE_N:
            return Variant.SSB
        return Variant.QUARTIC

    @property
    def stride(self) -> int:
        return 1 if self is StepperKind.SSB_LARGE_N else 2

    @property
    def min_cutoff(self) -> int:
        return {
            StepperKind.EXACT_QUARTIC: EXACT_QUARTIC_FLOOR,
            StepperKind.APPROX_QUARTIC: 0,
            StepperKind.SEXTIC_LARGE_N: 6,
            StepperKind.SSB_LARGE_N: 3,
        }[self]


@dataclass(frozen=True)
class XiVector:
    variant: Variant
    components: Tuple

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        object.__setattr__(self, "components", tuple(self.components))
        expected = xi_dimension(self.variant)
        if len(self.components) != expected:
            raise DomainError(
                f"{self.variant.value} xi has {expected} components, got {len(self.components)}"
            )

    @classmethod
    def ones(cls, variant, precision: Optional[Precision] = None) -> "XiVector":
        one = precision.number(1) if precision else 1.0
        return cls(variant, (one,) * xi_dimension(variant))

    def __getitem__(self, i):
        return self.components[i]

    def __len__(self) -> int:
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    def __sub__(self, other: "XiVector") -> Tuple:
        if other.variant is not self.variant or len(other) != len(self):
            raise DomainError(
                f"cannot subtract a {other.variant.value} xi ({len(other)}) "
                f"from a {self.variant.value} xi ({len(self)})"
            )
        return tuple(a - b for a, b in zip(self.components, other.components))

    def shifted(self, offsets) -> "XiVector":
        return XiVector(self.variant, tuple(c + o for c, o in zip(self.components, offsets)))

    def converted(self, precision: Precision) -> "XiVector":
        return XiVector(self.variant, tuple(precision.number(c) for c in self.components))

    def as_floats(self) -> np.ndarray:
        return np.array([float(c) for c in self.components])


def phi(n: int, precision: Optional[Precision] = None):
    """⟨n|x⁴|n⟩ = 6n² + 6n + 3."""
    value = 6 * n * n + 6 * n + 3
    return precision.number(value) if precision else float(value)


def phi_functions(n: int, precision: Optional[Precision] = None):
    """(φ1, φ2, φ3, φ) of the exact quartic step at cutoff n."""
    if n <= 3:
        raise DomainError(f"phi functions need n >= 4, got {n}")
    precision = precision or Precision.double()
    p = 6 * n * n + 6 * n + 3
    phi1 = precision.ratio(n * (n - 1) * (4 * n - 2) ** 2, (6 * n * n - 18 * n + 15) * p)
    phi2 = precision.ratio(n * (n - 1) * (n - 2) * (n - 3), (6 * n * n - 42 * n + 75) * p)
    phi3 = precision.ratio(n * (n - 1) * (4 * n - 2), (4 * n - 10) * p)
    return phi1, phi2, phi3, precision.number(p)


def _check_variant(xi: XiVector, variant: Variant):
    if xi.variant is not variant:
        raise DomainError(f"expected a {variant.value} xi, got {xi.variant.value}")


def exact_denominator(xi: XiVector, n: int, g, E):
    """d(n) = ξ1 + (n - E)/(g φ(n))."""
    precision = precision_of(*xi, g, E)
    return xi[0] + (n - E) / (g * phi(n, precision))


def step_exact_quartic(xi: XiVector, n: int, g, E=0) -> XiVector:
    _check_variant(xi, Variant.QUARTIC)
    if n < EXACT_QUARTIC_FLOOR:
        raise DomainError(f"exact quartic step needs n >= {EXACT_QUARTIC_FLOOR}, got {n}")
    precision = precision_of(*xi, g, E)
    phi1, phi2, phi3, _ = phi_functions(n, precision)
    d = exact_denominator(xi, n, g, E)
    if d == 0:
        raise DenominatorZero(f"d({n}) vanishes", value=d)
    one = precision.number(1)
    x1, x2, x3 = xi
    return XiVector(Variant.QUARTIC, (x2 - phi1 * x3 * x3 / d, one - phi2 / d, one - phi3 * x3 / d))


def approx_denominator(xi: XiVector, gN):
    """d_s = ξ1 + 1/(6gN)."""
    return xi[0] + 1 / (6 * gN)


def step_approx_quartic(xi: XiVector, gN) -> XiVector:
    _check_variant(xi, Variant.QUARTIC)
    if not gN > 0:
        raise DomainError(f"gN must be positive, got {gN}")
    precision = precision_of(*xi, gN)
    d = approx_denominator(xi, gN)
    if d == 0:
        raise DenominatorZero("d_s vanishes", value=d)
    one = precision.number(1)
    x1, x2, x3 = xi
    return XiVector(
        Variant.QUARTIC,
        (
            x2 - precision.ratio(4, 9) * x3 * x3 / d,
            one - precision.ratio(1, 36) / d,
            one - precision.ratio(1, 6) * x3 / d,
        ),
    )


def step_inverse_quartic(xi_next: XiVector, n: int, g, E=0) -> XiVector:
    """xi(n) from xi(n-2): algebraic inverse of the exact step at cutoff n."""
    _check_variant(xi_next, Variant.QUARTIC)
    precision = precision_of(*xi_next, g, E)
    phi1, phi2, phi3, p = phi_functions(n, precision)
    y1, y2, y3 = xi_next
    one = precision.number(1)
    gap = one - y2
    if gap == 0:
        raise NonInvertible(f"xi_2({n - 2}) = 1 has no preimage")
    shift = (n - E) / (g * p)
    return XiVector(
        Variant.QUARTIC,
        (
            -shift + phi2 / gap,
            y1 + (phi1 * phi2 / (phi3 * phi3)) * (one - y3) ** 2 / gap,
            (phi2 / phi3) * (one - y3) / gap,
        ),
    )


def sextic_coefficients(N: int, precision: Precision):
    n2 = N * N
    return (
        precision.ratio(36 * n2 + 63, 64 * n2),
        precision.ratio(9 * n2 + 63, 100 * n2),
        precision.ratio(4 * n2 + 63, 1600 * n2),
        precision.ratio(6 * n2 + 21, 20 * n2),
        precision.ratio(4 * n2 + 21, 32 * n2),
        precision.ratio(2 * n2 + 21, 100 * n2),
    )


def sextic_denominator(xi: XiVector, N: int, g):
    """d6 = ξ1 + 1/(20 g N²)."""
    return xi[0] + 1 / (20 * g * N * N)


def step_sextic_largeN(xi: XiVector, N: int, g) -> XiVector:
    _check_variant(xi, Variant.SEXTIC)
    precision = precision_of(*xi, g)
    a1, a2, a3, a4, a5, a6 = sextic_coefficients(N, precision)
    d = sextic_denominator(xi, N, g)
    if d == 0:
        raise DenominatorZero("d6 vanishes", value=d)
    one = precision.number(1)
    x1, x2, x3, x4, x5, x6 = xi
    return XiVector(
        Variant.SEXTIC,
        (
            x2 - a1 * x4 * x4 / d,
            x3 - a2 * x5 * x5 / d,
            one - a3 / d,
            x6 - a4 * x4 * x5 / d,
            one - a5 * x4 / d,
            one - a6 * x5 / d,
        ),
    )


def ssb_denominator(xi: XiVector, N: int, g):
    """d10 = ξ1 + 1/(6 g² N)."""
    return xi[0] + 1 / (6 * g * g * N)


def step_ssb_largeN(xi: XiVector, N: int, g) -> XiVector:
    _check_variant(xi, Variant.SSB)
    precision = precision_of(*xi, g)
    d = ssb_denominator(xi, N, g)
    if d == 0:
        raise DenominatorZero("d10 vanishes", value=d)
    one = precision.number(1)
    g2N = g * g * N
    x1, x2, x3, x4, x5, x6, x7, x8, x9, x10 = xi
    return XiVector(
        Variant.SSB,
        (
            x2 - x5 * x5 / (4 * g2N * d),
            x3 - precision.ratio(4, 9) * x6 * x6 / d,
            x4 - x7 * x7 / (36 * g2N * d),
            one - precision.ratio(1, 36) / d,
            x8 - precision.ratio(2 * N - 1, 3 * N) * x5 * x6 / d,
            x9 - x5 * x7 / (8 * g2N * d),
            one - precision.ratio(N - 1, 2 * N) * x5 / d,
            x10 - precision.ratio(2 * N - 1, 9 * N) * x6 * x7 / d,
            one - x6 / (6 * d),
            one - precision.ratio(N - 1, 18 * N) * x7 / d,
        ),
    )


@dataclass(frozen=True)
class Stepper:
    """One RG step bound to its couplings; ``N`` is the initial cutoff of large-N forms."""

    kind: StepperKind
    g: object
    E: object = 0
    N: int = 0

    @property
    def variant(self) -> Variant:
        return self.kind.variant

    @property
    def stride(self) -> int:
        return self.kind.stride

    def denominator(self, xi: XiVector, n: int):
        if self.kind is StepperKind.EXACT_QUARTIC:
            return exact_denominator(xi, n, self.g, self.E)
        if self.kind is StepperKind.APPROX_QUARTIC:
            return approx_denominator(xi, self.g * self.N)
        if self.kind is StepperKind.SEXTIC_LARGE_N:
            return sextic_denominator(xi, self.N, self.g)
        return ssb_denominator(xi, self.N, self.g)

    def __call__(self, xi: XiVector, n: int) -> XiVector:
        if self.kind is StepperKind.EXACT_QUARTIC:
            return step_exact_quartic(xi, n, self.g, self.E)
        if self.kind is StepperKind.APPROX_QUARTIC:
            return step_approx_quartic(xi, self.g * self.N)
        if self.kind is StepperKind.SEXTIC_LARGE_N:
            return step_sextic_largeN(xi, self.N, self.g)
        return step_ssb_largeN(xi, self.N, self.g)

    def as_array_map(self, n: int):
        """The step as a map on float arrays, for root finding."""

        def fn(x: np.ndarray) -> np.ndarray:
            out = self(XiVector(self.variant, tuple(float(v) for v in x)), n)
            return np.array(out.components, dtype=float)

        return fn


@dataclass(frozen=True)
class FlowParams:
    g: float
    N: int
    n_final: int
    stepper: StepperKind = StepperKind.EXACT_QUARTIC
    E: float = 0.0
    precision_bits: int = DEFAULT_BITS
    parity: Optional[str] = None
    denominator_tol: float = DEFAULT_DENOMINATOR_TOL

    def __post_init__(self):
        object.__setattr__(self, "stepper", StepperKind(self.stepper))
        problems = []
        if not float(self.g) > 0:
            problems.append(f"g must be positive, got {self.g}")
        if self.N < self.n_final:
            problems.append(f"N={self.N} is below n_final={self.n_final}")
        if (self.N - self.n_final) % self.stepper.stride:
            problems.append(f"N - n_final must be a multiple of {self.stepper.stride}")
        if self.n_final < 0:
            problems.append(f"n_final must be non-negative, got {self.n_final}")
        if self.precision_bits < DOUBLE_BITS:
            problems.append(f"precision_bits must be at least {DOUBLE_BITS}")
        if self.parity is not None and self.stepper is StepperKind.EXACT_QUARTIC:
            if self.parity not in ("even", "odd", "both"):
                problems.append(f"unknown parity {self.parity}")
            elif self.parity != "both" and (self.N % 2 == 0) != (self.parity == "even"):
                problems.append(f"N={self.N} is not in the {self.parity} sector")
        if problems:
            raise DomainError("; ".join(problems))

    @property
    def precision(self) -> Precision:
        return Precision(self.precision_bits)

    def working_g(self, precision: Precision):
        return precision.number(self.g)


@dataclass(frozen=True)
class FlowFrame:
    k: int
    n: int
    xi: XiVector
    d_value: object
    events: Tuple[EventKind, ...] = ()


@dataclass
class FlowTrace:
    params: FlowParams
    frames: List[FlowFrame] = field(default_factory=list)
    events: List[Tuple[int, EventKind]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.frames)

    def __iter__(self) -> Iterator[FlowFrame]:
        return iter(self.frames)

    @property
    def final(self) -> FlowFrame:
        return self.frames[-1]

    def as_mapping(self) -> Dict[int, XiVector]:
        return {frame.n: frame.xi for frame in self.frames}

    def events_of(self, kind: EventKind) -> List[int]:
        return [k for k, event in self.events if event is kind]

    def rows(self) -> List[dict]:
        out = []
        for frame in self.frames:
            row = {"k": frame.k, "n": frame.n}
            for i, value in enumerate(frame.xi, start=1):
                row[f"xi_{i}"] = float(value)
            row["d_value"] = float(frame.d_value) if frame.d_value is not None else float("nan")
            row["event"] = "|".join(e.value for e in frame.events)
            out.append(row)
        return out


def _step_extended(stepper: Stepper, xi: XiVector, n: int, precision: Precision) -> XiVector:
    wide = Precision(max(4 * precision.bits, DEFAULT_BITS))
    with wide.active():
        out = Stepper(stepper.kind, wide.number(stepper.g), wide.number(stepper.E), stepper.N)(
            xi.converted(wide), n
        )
    return out.converted(precision)


def run_flow(params: FlowParams, xi_start: XiVector) -> FlowTrace:
    """Iterate the configured stepper from N down to n_final.

    Denominator sign changes and near-zero denominators are recorded on the
    frame where they occur and the flow continues; an exactly vanishing
    denominator ends the trace with a terminal event.
    """
    if xi_start.variant is not params.stepper.variant:
        raise DomainError(
            f"{params.stepper.value} needs a {params.stepper.variant.value} xi, got {xi_start.variant.value}"
        )
    precision = params.precision
    trace = FlowTrace(params=params)
    floor = max(params.n_final, params.stepper.min_cutoff)
    with precision.active():
        g = params.working_g(precision)
        stepper = Stepper(params.stepper, g, precision.number(params.E), params.N)
        xi = xi_start.converted(precision)
        n, k = params.N, 0
        negative = False
        while True:
            d = stepper.denominator(xi, n)
            events = []
            if d < 0 and not negative:
                events.append(EventKind.DENOMINATOR_SIGN_CHANGE)
            negative = d < 0
            last = n - stepper.stride < floor
            if not last and d == 0:
                events.append(EventKind.DENOMINATOR_ZERO)
            elif not last and abs(d) < params.denominator_tol:
                events.append(EventKind.DENOMINATOR_NEAR_ZERO)
            trace.frames.append(FlowFrame(k, n, xi, d, tuple(events)))
            trace.events.extend((k, event) for event in events)
            if last or EventKind.DENOMINATOR_ZERO in events:
                break
            if EventKind.DENOMINATOR_NEAR_ZERO in events:
                xi = _step_extended(stepper, xi, n, precision)
            else:
                xi = stepper(xi, n)
            n -= stepper.stride
            k += 1
    if params.n_final < params.stepper.min_cutoff:
        trace.events.append((k, EventKind.VALIDITY_FLOOR))
        logger.warning(
            "%s flow stopped at n=%d; requested n_final=%d is below its validity floor",
            params.stepper.value, n, params.n_final,
        )
    logger.debug("flow %s: %d frames, %d events", params.stepper.value, len(trace.frames), len(trace.events))
    return trace


def repulsive_sequence(n_low: int, n_high: int, g, E=0, depth: int = 200,
                       seed: Optional[XiVector] = None, precision_bits: int = DEFAULT_BITS) -> Dict[int, XiVector]:
    """ξ⁻(n) for n_low <= n <= n_high (same parity), by inverse steps upward.

    The sweep starts ``depth`` steps below ``n_low``; every inverse step
    contracts towards the repulsive sequence, so the start is forgotten.
    """
    if (n_high - n_low) % 2:
        raise DomainError("n_low and n_high must have the same parity")
    start = n_low - 2 * depth
    if start < 4:
        raise DomainError(f"depth {depth} reaches below n=4 from n_low={n_low}")
    precision = Precision(precision_bits)
    out: Dict[int, XiVector] = {}
    with precision.active():
        g = precision.number(g)
        E = precision.number(E)
        if seed is None:
            from spiralrg.fixedpoints import analytic_pair

            seed = analytic_pair(g * start)[1]
        xi = seed.converted(precision)
        for n in range(start + 2, n_high + 1, 2):
            xi = step_inverse_quartic(xi, n, g, E)
            if n >= n_low:
                out[n] = xi
    return out
