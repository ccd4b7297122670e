import math

import numpy as np
import pytest

from spiralrg.errors import DenominatorZero, DomainError, NonInvertible
from spiralrg.precision import Precision
from spiralrg.rgt import (
    EventKind,
    FlowParams,
    Stepper,
    StepperKind,
    XiVector,
    exact_denominator,
    phi,
    phi_functions,
    repulsive_sequence,
    run_flow,
    sextic_coefficients,
    step_approx_quartic,
    step_exact_quartic,
    step_inverse_quartic,
    step_sextic_largeN,
    step_ssb_largeN,
)
from spiralrg.spiral import decompose, local_constants


def quartic(*values):
    return XiVector("quartic", values)


def test_subtraction_needs_matching_variant():
    assert quartic(1.0, 2.0, 3.0) - quartic(0.5, 0.5, 0.5) == (0.5, 1.5, 2.5)
    with pytest.raises(DomainError):
        XiVector.ones("sextic") - quartic(1.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        quartic(1.0, 1.0, 1.0) - XiVector.ones("ssb")


def test_phi_values():
    assert phi(0) == 3
    assert phi(10) == 663
    assert isinstance(phi(10, Precision(128)), type(Precision(128).number(1)))


def test_phi_functions_large_n_limits():
    phi1, phi2, phi3, _ = phi_functions(10**6)
    assert phi1 == pytest.approx(4 / 9, rel=1e-5)
    assert phi2 == pytest.approx(1 / 36, rel=1e-5)
    assert phi3 == pytest.approx(1 / 6, rel=1e-5)


def test_phi_functions_reject_small_n():
    with pytest.raises(DomainError):
        phi_functions(3)


def test_sextic_coefficients_large_cutoff_limits():
    got = sextic_coefficients(10**6, Precision.double())
    np.testing.assert_allclose(got, [9 / 16, 9 / 100, 1 / 400, 3 / 10, 1 / 8, 1 / 50], rtol=1e-9)


def test_exact_denominator():
    assert exact_denominator(quartic(1.0, 1.0, 1.0), 10, 1.0, 0.0) == pytest.approx(1 + 10 / 663)


def test_exact_step_at_vanishing_coupling():
    xi = quartic(0.3, 0.7, 0.4)
    out = step_exact_quartic(xi, 10, 1e-12)
    np.testing.assert_allclose(out.as_floats(), [0.7, 1.0, 1.0], atol=1e-9)


def test_exact_step_floor():
    with pytest.raises(DomainError):
        step_exact_quartic(quartic(1.0, 1.0, 1.0), 5, 1.0)


def test_step_rejects_other_variant():
    with pytest.raises(DomainError):
        step_exact_quartic(XiVector.ones("sextic"), 10, 1.0)
    with pytest.raises(DomainError):
        XiVector("quartic", (1.0, 2.0))


def test_vanishing_denominator_raises():
    with pytest.raises(DenominatorZero):
        step_approx_quartic(quartic(-1 / 3, 1.0, 1.0), 0.5)


def test_inverse_needs_gap():
    with pytest.raises(NonInvertible):
        step_inverse_quartic(quartic(0.2, 1.0, 0.5), 10, 1.0)


def test_inverse_round_trip():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        n = int(rng.integers(10, 101))
        x = quartic(*rng.uniform(0, 2, size=3))
        back = step_inverse_quartic(step_exact_quartic(x, n, 1.0), n, 1.0)
        np.testing.assert_allclose(back.as_floats(), x.as_floats(), rtol=1e-12, atol=1e-12)


def test_forward_after_inverse_round_trip():
    rng = np.random.default_rng(11)
    checked = 0
    while checked < 1000:
        n = int(rng.integers(10, 101))
        y = quartic(*rng.uniform(0, 2, size=3))
        if abs(1 - y[1]) < 0.05:
            continue
        again = step_exact_quartic(step_inverse_quartic(y, n, 1.0), n, 1.0)
        np.testing.assert_allclose(again.as_floats(), y.as_floats(), rtol=1e-12, atol=1e-12)
        checked += 1


def test_exact_step_approaches_large_n_form():
    xi = quartic(0.2, 0.8, 0.5)

    def gap(n):
        exact = step_exact_quartic(xi, n, 1.0).as_floats()
        approx = step_approx_quartic(xi, float(n)).as_floats()
        return float(np.max(np.abs(exact - approx)))

    ratio = gap(10**4) / gap(10**5)
    assert 5 < ratio < 20
    assert gap(10**6) < gap(10**5)


def test_sextic_step_at_vanishing_coupling():
    xi = XiVector("sextic", (0.1, 0.2, 0.3, 0.4, 0.5, 0.6))
    out = step_sextic_largeN(xi, 10, 1e-15)
    np.testing.assert_allclose(out.as_floats(), [0.2, 0.3, 1.0, 0.6, 1.0, 1.0], atol=1e-9)


def test_ssb_step_from_ones_is_finite():
    out = step_ssb_largeN(XiVector.ones("ssb"), 100, 0.5)
    assert len(out) == 10
    assert np.all(np.isfinite(out.as_floats()))
    assert out[3] == pytest.approx(1 - (1 / 36) / (1 + 1 / (6 * 0.25 * 100)))


def test_stepper_dispatch_and_array_map():
    stepper = Stepper(StepperKind.APPROX_QUARTIC, 1.0, 0.0, 100)
    xi = quartic(0.2, 0.8, 0.5)
    assert stepper(xi, 100) == step_approx_quartic(xi, 100.0)
    fn = stepper.as_array_map(100)
    np.testing.assert_array_equal(fn(np.array([0.2, 0.8, 0.5])), step_approx_quartic(xi, 100.0).as_floats())
    assert StepperKind.SSB_LARGE_N.stride == 1
    assert StepperKind("sextic_large_n").variant.value == "sextic"


def test_flow_params_list_every_problem():
    with pytest.raises(DomainError) as info:
        FlowParams(g=-1.0, N=20, n_final=25)
    message = str(info.value)
    assert "g must be positive" in message
    assert "below n_final" in message
    with pytest.raises(DomainError):
        FlowParams(g=1.0, N=21, n_final=8)
    with pytest.raises(DomainError):
        FlowParams(g=1.0, N=21, n_final=9, parity="even")


def test_flow_of_zero_steps_is_one_frame():
    trace = run_flow(FlowParams(g=1.0, N=20, n_final=20, precision_bits=53), quartic(1.0, 1.0, 1.0))
    assert len(trace) == 1
    assert trace.final.xi == quartic(1.0, 1.0, 1.0)


def test_flow_length_and_rows():
    trace = run_flow(FlowParams(g=1.0, N=1000, n_final=8, precision_bits=53), XiVector.ones("quartic"))
    assert len(trace) == 497
    assert trace.final.n == 8
    assert trace.final.k == 496
    row = trace.rows()[0]
    assert list(row) == ["k", "n", "xi_1", "xi_2", "xi_3", "d_value", "event"]


def test_flow_runs_in_extended_precision():
    trace = run_flow(FlowParams(g=1.0, N=40, n_final=20, precision_bits=200), XiVector.ones("quartic"))
    double = run_flow(FlowParams(g=1.0, N=40, n_final=20, precision_bits=53), XiVector.ones("quartic"))
    assert type(trace.final.xi[0]).__name__ == "mpf"
    np.testing.assert_allclose(trace.final.xi.as_floats(), double.final.xi.as_floats(), rtol=1e-13)


def test_flow_stops_at_validity_floor():
    trace = run_flow(FlowParams(g=1.0, N=20, n_final=2, precision_bits=53), XiVector.ones("quartic"))
    assert trace.final.n == 6
    assert trace.events_of(EventKind.VALIDITY_FLOOR) == [trace.final.k]


def test_negative_denominator_is_recorded_once():
    trace = run_flow(FlowParams(g=1.0, N=20, n_final=18, precision_bits=53), quartic(-2.0, -2.0, 1.0))
    assert EventKind.DENOMINATOR_SIGN_CHANGE in trace.frames[0].events
    assert trace.events_of(EventKind.DENOMINATOR_SIGN_CHANGE)[0] == 0


def test_zero_denominator_ends_flow():
    params = FlowParams(g=0.25, N=2, n_final=0, stepper="approx_quartic", precision_bits=53)
    trace = run_flow(params, quartic(-1 / 3, 1.0, 1.0))
    assert len(trace) == 1
    assert trace.events_of(EventKind.DENOMINATOR_ZERO) == [0]


def test_small_denominator_steps_in_extended_precision():
    params = FlowParams(g=0.25, N=2, n_final=0, stepper="approx_quartic", precision_bits=53)
    trace = run_flow(params, quartic(-1 / 3 + 1e-14, 1.0, 1.0))
    assert trace.events_of(EventKind.DENOMINATOR_NEAR_ZERO) == [0]
    assert len(trace) == 2
    assert np.all(np.isfinite(trace.final.xi.as_floats()))


def test_flow_rejects_mismatched_start():
    with pytest.raises(DomainError):
        run_flow(FlowParams(g=1.0, N=20, n_final=8), XiVector.ones("sextic"))


def test_repulsive_sequence_depth_check():
    with pytest.raises(DomainError):
        repulsive_sequence(100, 100, 1.0, depth=60)
    with pytest.raises(DomainError):
        repulsive_sequence(100, 101, 1.0)


def _norm(values):
    return math.sqrt(sum(float(v) ** 2 for v in values))


@pytest.mark.slow
def test_departure_from_repulsive_sequence_grows_at_inverse_contraction():
    g, N, steps = 1.0, 2000, 60
    n_final = N - 2 * steps
    minus = repulsive_sequence(n_final, N, g, depth=400)
    precision = Precision(256)
    with precision.active():
        start = minus[N].shifted(tuple(precision.number("1e-30") for _ in range(3)))
    trace = run_flow(FlowParams(g=g, N=N, n_final=n_final), start)
    with precision.active():
        first = decompose(trace.frames[0].xi - minus[N], -local_constants(N, g)[0])
        last = decompose(trace.final.xi - minus[n_final], -local_constants(n_final, g)[0])
    growth = (_norm(last) / _norm(first)) ** (1 / steps)
    expected = float(np.mean([1 / local_constants(n, g)[1] for n in range(N, n_final, -2)]))
    assert growth == pytest.approx(expected, rel=0.05)
