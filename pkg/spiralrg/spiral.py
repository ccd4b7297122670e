"""Spiral diagnostics around the floating fixed point.

Near ξ⁺ the residual Δξ = ξ(n) − ξ⁺(n) splits into α along the invariant
direction v and (β, γ) in the rotating plane span{v1, v2}. Rescaling (β, γ)
by the accumulated contraction turns the inward spiral into a near-circle;
which contraction and which p the basis uses gives the four coordinate
systems written per frame.
"""

import enum
import logging
import math
from dataclasses import dataclass
from typing import List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from spiralrg.errors import DegenerateBasis, DegenerateDirection, DomainError, InsufficientFrames, PrecisionInsufficient
from spiralrg.fixedpoints import spiral_constants
from spiralrg.hamiltonian import Variant
from spiralrg.precision import Precision, atan2, field_of, is_multiprecision, precision_of, sqrt
from spiralrg.rgt import FlowTrace, XiVector, phi_functions

logger = logging.getLogger(__name__)

CONE_TOL = 1e-10
MIN_CIRCLE_K = 8

Reference = Union[XiVector, Mapping[int, XiVector]]


def decompose(dxi: Sequence, p) -> Tuple:
    """(α, β, γ) with Δξ = αv + βv1 + γv2 in the eigenbasis at p."""
    if p == 0:
        raise DegenerateBasis("coordinates diverge at p = 0")
    d1, d2, d3 = dxi
    one = field_of(p, *dxi)(1)
    p2 = p * p
    mix = (one - p) * d1 + (one + p) * d2
    alpha = 3 * mix / (4 * p2) - (one - p2) / p2 * d3
    beta = sqrt(one - p2) / p2 * (d3 - 3 * mix / 4)
    gamma = 3 * ((one - p) * d1 - (one + p) * d2) / (4 * p)
    return alpha, beta, gamma


def local_constants(n: int, g) -> Tuple:
    """(p_n, r_n): the spiral constants with N replaced by the floating cutoff n."""
    if n <= 0:
        raise DomainError(f"n must be positive, got {n}")
    constants = spiral_constants(g * n)
    return constants.p, constants.r


@dataclass(frozen=True)
class SpiralFrame:
    k: int
    n: int
    dxi: Tuple
    alpha: object
    beta: object
    gamma: object
    beta_n: object
    gamma_n: object
    fig1: Tuple
    scaling1: Tuple
    scaling2: Tuple
    scaling3: Tuple
    r_n: object
    R: object

    def pair(self, system: str) -> Tuple:
        return {
            "fig1": self.fig1,
            "scaling1": self.scaling1,
            "scaling2": self.scaling2,
            "scaling3": self.scaling3,
        }[system]

    def row(self) -> dict:
        row = {"k": self.k, "n": self.n}
        for i, value in enumerate(self.dxi, start=1):
            row[f"dxi_{i}"] = float(value)
        row.update(alpha=float(self.alpha), beta=float(self.beta), gamma=float(self.gamma))
        for name, prefix in (("fig1", "fig1"), ("scaling1", "s1"), ("scaling2", "s2"), ("scaling3", "s3")):
            b, g = self.pair(name)
            row[f"{prefix}_b"] = float(b)
            row[f"{prefix}_g"] = float(g)
        row.update(r_n=float(self.r_n), R=float(self.R))
        return row


def _reference_at(reference: Reference, n: int) -> XiVector:
    if isinstance(reference, XiVector):
        return reference
    try:
        return reference[n]
    except KeyError:
        raise DomainError(f"reference sequence has no entry at n={n}") from None


def _norm(values) -> object:
    return max(abs(v) for v in values)


def build_frames(trace: FlowTrace, reference: Reference, g, k_min: int = 0,
                 k_max: Optional[int] = None) -> List[SpiralFrame]:
    """Spiral frames for k in [k_min, k_max].

    The fixed basis uses p at the initial cutoff N, the tilde basis p_n at
    the frame's own n; R(N, k) accumulates r_n over every step from k = 1.
    """
    frames = trace.frames
    if not frames:
        raise InsufficientFrames("empty trace")
    sample = frames[0].xi[0]
    precision = Precision(trace.params.precision_bits) if is_multiprecision(sample) else Precision.double()
    out = []
    with precision.active():
        g = precision.number(g)
        p0, r0 = local_constants(frames[0].n, g)
        floor = 100 * precision.ulp
        R = precision.number(1)
        for frame in frames:
            if frame.k > 0:
                R = R * local_constants(frame.n, g)[1]
            if frame.k < k_min:
                continue
            if k_max is not None and frame.k > k_max:
                break
            dxi = frame.xi - _reference_at(reference, frame.n)
            if _norm(dxi) < floor * max(1, _norm(frame.xi)):
                raise PrecisionInsufficient(
                    f"|dxi| = {float(_norm(dxi)):.3e} at k={frame.k} is below {precision.bits}-bit resolution"
                )
            alpha, beta, gamma = decompose(dxi, p0)
            p_n, r_n = local_constants(frame.n, g)
            _, beta_n, gamma_n = decompose(dxi, p_n)
            boost = r0 ** (-frame.k)
            out.append(
                SpiralFrame(
                    k=frame.k, n=frame.n, dxi=tuple(dxi),
                    alpha=alpha, beta=beta, gamma=gamma, beta_n=beta_n, gamma_n=gamma_n,
                    fig1=(boost * beta, boost * gamma),
                    scaling1=(beta / R, gamma / R),
                    scaling2=(boost * beta_n, boost * gamma_n),
                    scaling3=(beta_n / R, gamma_n / R),
                    r_n=r_n, R=R,
                )
            )
    logger.debug("built %d spiral frames", len(out))
    return out


def rotation_angle(frames: Sequence[SpiralFrame], basis: str = "fixed") -> List[float]:
    """Clockwise angle between successive (β, γ) vectors, wrapped to (−π, π]."""
    if len(frames) < 3:
        raise InsufficientFrames(f"need at least 3 frames, got {len(frames)}")
    if basis not in ("fixed", "floating"):
        raise DomainError(f"basis must be 'fixed' or 'floating', got {basis}")
    angles = []
    for before, after in zip(frames, frames[1:]):
        if basis == "fixed":
            t0 = float(atan2(before.gamma, before.beta))
            t1 = float(atan2(after.gamma, after.beta))
        else:
            t0 = float(atan2(before.gamma_n, before.beta_n))
            t1 = float(atan2(after.gamma_n, after.beta_n))
        angle = math.remainder(t0 - t1, 2 * math.pi)
        angles.append(angle)
    return angles


def projection_f(trace: FlowTrace, plus: Reference, minus: Reference) -> List[float]:
    """f(k) = (ξ − ξ⁻)·(ξ⁺ − ξ⁻)/|ξ⁺ − ξ⁻|²: 0 at ξ⁻, 1 at ξ⁺."""
    values = []
    for frame in trace.frames:
        top = _reference_at(plus, frame.n)
        bottom = _reference_at(minus, frame.n)
        direction = top - bottom
        length = sum(x * x for x in direction)
        if length == 0:
            raise DegenerateDirection(f"ξ⁺ and ξ⁻ coincide at n={frame.n}")
        offset = frame.xi - bottom
        values.append(float(sum(a * b for a, b in zip(offset, direction)) / length))
    return values


def h_approx(v: Sequence):
    """Cone function of the approximate step: v1 v2 − (4/9) v3²."""
    return v[0] * v[1] - 4 * v[2] * v[2] / 9


def h_exact(v: Sequence, n: int):
    """Cone function of the exact step at cutoff n: v1 v2 − φ1(n) v3²."""
    phi1 = phi_functions(n, precision_of(*v))[0]
    return v[0] * v[1] - phi1 * v[2] * v[2]


class ConeKind(str, enum.Enum):
    APPROX = "approx"
    EXACT = "exact"


class TrajectoryClass(str, enum.Enum):
    CONVERGES = "converges"
    JUMP_THEN_CONVERGES = "jump_then_converges"
    CONE_TRAPPED = "cone_trapped"


@dataclass(frozen=True)
class ConeReport:
    kind: ConeKind
    h_values: Tuple[float, ...]
    relative_h: Tuple[float, ...]
    sign_change_steps: Tuple[int, ...]
    denominator_negative: Tuple[bool, ...]
    conservation_error: float
    classification: TrajectoryClass

    def summary(self) -> dict:
        return {
            "cone": self.kind.value,
            "classification": self.classification.value,
            "sign_change_steps": list(self.sign_change_steps),
            "denominator_negative_at_jumps": list(self.denominator_negative),
            "max_relative_h": max(self.relative_h) if self.relative_h else 0.0,
            "conservation_error": self.conservation_error,
        }


def cone_classify(trace: FlowTrace, minus: Reference, kind: str = "approx", g=None, E=0,
                  tol: float = CONE_TOL) -> ConeReport:
    """Track h[ξ − ξ⁻] along a flow and check its step-to-step conservation law.

    The approximate law is h' = h/(36 d_A d_B); the exact one is
    h[·, n−2] = φ2(n) h[·, n]/(d_A d_B). Errors are measured against the size
    of the terms in h, so a trajectory on the cone (h ≈ 0) is judged by
    cancellation rather than by a relative error of zero.
    """
    kind = ConeKind(kind)
    stepper = trace.params.stepper.value
    expected = "approx_quartic" if kind is ConeKind.APPROX else "exact_quartic"
    if stepper != expected:
        raise DomainError(f"{kind.value} cone needs a {expected} trace, got {stepper}")
    if trace.params.stepper.variant is not Variant.QUARTIC:
        raise DomainError("cone functions exist for the quartic variant only")
    precision = trace.params.precision
    with precision.active():
        g = precision.number(trace.params.g if g is None else g)
        E = precision.number(E)
        gN = g * trace.params.N
        h_values, scales, d_products = [], [], []
        for frame in trace.frames:
            partner = _reference_at(minus, frame.n)
            v = frame.xi - partner
            if kind is ConeKind.APPROX:
                h = h_approx(v)
                weight = precision.ratio(4, 9)
                d_a = frame.xi[0] + 1 / (6 * gN)
                d_b = partner[0] + 1 / (6 * gN)
            else:
                phi1, _, _, p = phi_functions(frame.n, precision)
                h = v[0] * v[1] - phi1 * v[2] * v[2]
                weight = phi1
                shift = (frame.n - E) / (g * p)
                d_a = frame.xi[0] + shift
                d_b = partner[0] + shift
            h_values.append(h)
            scales.append(abs(v[0] * v[1]) + abs(weight * v[2] * v[2]))
            d_products.append((d_a, d_b))

        worst = 0.0
        for i in range(len(trace.frames) - 1):
            d_a, d_b = d_products[i]
            if kind is ConeKind.APPROX:
                factor = 1 / (36 * d_a * d_b)
            else:
                factor = phi_functions(trace.frames[i].n, precision)[1] / (d_a * d_b)
            predicted = h_values[i] * factor
            size = scales[i + 1] + scales[i] * abs(factor)
            if size > 0:
                worst = max(worst, float(abs(h_values[i + 1] - predicted) / size))

        relative = tuple(float(abs(h) / s) if s > 0 else 0.0 for h, s in zip(h_values, scales))
        jumps, negative = [], []
        for i in range(len(h_values) - 1):
            if h_values[i] < 0 < h_values[i + 1]:
                jumps.append(trace.frames[i].k)
                d_a, d_b = d_products[i]
                negative.append(bool(d_a * d_b < 0))
                if not d_a * d_b < 0:
                    logger.warning("h turned positive at k=%d without a negative denominator", trace.frames[i].k)

    if relative and max(relative) <= tol:
        classification = TrajectoryClass.CONE_TRAPPED
    elif jumps:
        classification = TrajectoryClass.JUMP_THEN_CONVERGES
    else:
        classification = TrajectoryClass.CONVERGES
    return ConeReport(
        kind=kind,
        h_values=tuple(float(h) for h in h_values),
        relative_h=relative,
        sign_change_steps=tuple(jumps),
        denominator_negative=tuple(negative),
        conservation_error=worst,
        classification=classification,
    )


def seed_on_cone(minus: XiVector, dxi1, dxi2, n: Optional[int] = None, sign: int = 1) -> XiVector:
    """ξ⁻ + Δ with h[Δ] = 0: Δ3 = ±√(Δ1Δ2/w), w = 4/9 or φ1(n)."""
    product = dxi1 * dxi2
    if product < 0:
        raise DomainError("Δ1 Δ2 must be non-negative for a real point on the cone")
    one = field_of(dxi1, dxi2, *minus)(1)
    if n is None:
        weight = 4 * one / 9
    else:
        weight = phi_functions(n, precision_of(one))[0]
    dxi3 = sign * sqrt(product / weight)
    return minus.shifted((dxi1, dxi2, dxi3))


def circle_dispersion(frames: Sequence[SpiralFrame], system: str = "scaling3", k_min: int = MIN_CIRCLE_K) -> float:
    """std/mean of the radii of one coordinate system over frames with k >= k_min."""
    radii = np.array([math.hypot(*(float(x) for x in f.pair(system))) for f in frames if f.k >= k_min])
    if radii.size < 3:
        raise InsufficientFrames(f"need at least 3 frames with k >= {k_min}")
    return float(np.std(radii) / np.mean(radii))


def contraction_ratio(frames: Sequence[SpiralFrame]) -> List[float]:
    """|Δξ(N−2k)| / |Δξ(first frame)| divided by the R(N,k) accumulated since then."""
    if not frames:
        raise InsufficientFrames("no frames")
    first = frames[0]
    base = _norm(first.dxi)
    return [float(_norm(f.dxi) / base / (f.R / first.R)) for f in frames]
