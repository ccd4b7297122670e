import cmath
import math

import numpy as np
import pytest

from spiralrg.errors import DegenerateBasis, DomainError
from spiralrg.fixedpoints import (
    Classification,
    analytic_pair,
    classify,
    default_seeds,
    eigensystem,
    find_numeric,
    floating_fp_approx,
    floating_fp_numeric,
    floating_fp_sequence,
    floating_spectrum,
    linearized_map,
    numeric_jacobian,
    repulsive_fp_numeric,
    sextic_seeds,
    spiral_constants,
    spiral_matrix,
)
from spiralrg.precision import Precision
from spiralrg.rgt import StepperKind, XiVector, step_approx_quartic
from spiralrg.spiral import local_constants


@pytest.mark.parametrize("six_gN", [1e2, 1e3, 1e6])
def test_analytic_pair_is_fixed(six_gN):
    gN = six_gN / 6
    plus, minus, _ = analytic_pair(gN)
    for point in (plus, minus):
        image = step_approx_quartic(point, gN)
        np.testing.assert_allclose(image.as_floats(), point.as_floats(), rtol=0, atol=1e-12)
    assert plus[2] + minus[2] == pytest.approx(1.0, abs=1e-15)


def test_analytic_pair_merges_at_strong_coupling():
    plus, minus, _ = analytic_pair(1e9 / 6)
    assert np.max(np.abs(plus.as_floats() - minus.as_floats())) < 1e-2


def test_analytic_pair_in_extended_precision():
    precision = Precision(256)
    with precision.active():
        gN = precision.number(1000) / 6
        plus, minus, constants = analytic_pair(gN)
        image = step_approx_quartic(plus, gN)
        residual = max(abs(x - y) for x, y in zip(image, plus))
    assert float(residual) < 1e-70
    assert float(constants.r) == pytest.approx((1 - float(constants.p)) / (1 + float(constants.p)))


def test_spiral_constants():
    constants = spiral_constants(1000 / 6)
    a = 1 / (4 * 1000 / 6)
    assert float(constants.p) ** 2 == pytest.approx(math.sqrt(a + a * a / 4) - a / 2, rel=1e-12)
    assert constants.omega == pytest.approx(2 * math.asin(constants.p))
    assert constants.period == pytest.approx(2 * math.pi / constants.omega)
    repulsive = constants.repulsive()
    assert repulsive.p == -constants.p
    assert repulsive.r == pytest.approx(1 / constants.r)
    with pytest.raises(DomainError):
        spiral_constants(0.0)


@pytest.mark.parametrize("p", [0.05, 0.2, 0.5])
def test_spiral_matrix_spectrum(p):
    omega = 2 * math.asin(p)
    eigenvalues = sorted(np.linalg.eigvals(spiral_matrix(p)), key=lambda z: z.imag)
    expected = [cmath.exp(-1j * omega), 1.0, cmath.exp(1j * omega)]
    np.testing.assert_allclose(eigenvalues, expected, atol=1e-10)
    r = (1 - p) / (1 + p)
    np.testing.assert_allclose(np.abs(np.linalg.eigvals(linearized_map(p))), [r, r, r], atol=1e-10)


@pytest.mark.parametrize("p", [0.05, 0.2, 0.5])
def test_eigenbasis_relations(p):
    G = spiral_matrix(p)
    v, v1, v2 = eigensystem(p)
    omega = 2 * math.asin(p)
    np.testing.assert_allclose(G @ v, v, atol=1e-12)
    np.testing.assert_allclose(G @ v1, math.cos(omega) * v1 - math.sin(omega) * v2, atol=1e-12)
    np.testing.assert_allclose(G @ v2, math.sin(omega) * v1 + math.cos(omega) * v2, atol=1e-12)


def test_eigenbasis_degenerates_at_zero():
    with pytest.raises(DegenerateBasis):
        eigensystem(0.0)


def test_jacobian_at_attractive_point_matches_linearization():
    gN = 1000 / 6
    plus, _, constants = analytic_pair(gN)
    jacobian = numeric_jacobian(lambda x: step_approx_quartic(XiVector("quartic", tuple(x)), gN).as_floats(),
                                plus.as_floats())
    np.testing.assert_allclose(jacobian, linearized_map(constants.p), atol=1e-6)


def test_numeric_jacobian_of_linear_map():
    A = np.array([[1.0, 2.0], [3.0, -4.0]])
    np.testing.assert_allclose(numeric_jacobian(lambda x: A @ x, np.array([0.3, 0.7])), A, atol=1e-8)


def test_classify():
    assert classify([0.5, 0.5j]) is Classification.ATTRACTIVE
    assert classify([1.5, -2.0]) is Classification.REPULSIVE
    assert classify([0.5, 2.0]) is Classification.MIXED


def test_numeric_quartic_fixed_points_match_analytic_pair():
    gN = 1000 / 6
    records = find_numeric(StepperKind.APPROX_QUARTIC, 3, 1000, 1 / 6)
    assert len(records) == 2
    plus, minus, constants = analytic_pair(gN)
    by_class = {record.classification: record for record in records}
    assert set(by_class) == {Classification.ATTRACTIVE, Classification.REPULSIVE}
    np.testing.assert_allclose(by_class[Classification.ATTRACTIVE].location.as_floats(), plus.as_floats(), atol=1e-8)
    np.testing.assert_allclose(by_class[Classification.REPULSIVE].location.as_floats(), minus.as_floats(), atol=1e-8)
    moduli = np.abs(by_class[Classification.ATTRACTIVE].jacobian_eigenvalues)
    np.testing.assert_allclose(moduli, [constants.r] * 3, atol=1e-6)
    assert by_class[Classification.ATTRACTIVE].as_dict()["classification"] == "attractive"


def test_find_numeric_rejects_exact_stepper_and_wrong_dimension():
    with pytest.raises(DomainError):
        find_numeric(StepperKind.EXACT_QUARTIC, 3, 100, 1.0)
    with pytest.raises(DomainError):
        find_numeric(StepperKind.APPROX_QUARTIC, 6, 100, 1.0)


def test_floating_fp_approx_reaches_analytic_pair():
    approx = floating_fp_approx(10**6, 1.0)
    plus, _, _ = analytic_pair(1e6)
    np.testing.assert_allclose(approx.as_floats(), plus.as_floats(), atol=1e-4)


def test_floating_fp_approx_floor():
    with pytest.raises(DomainError):
        floating_fp_approx(4, 1.0)


@pytest.mark.slow
def test_floating_fp_approx_tracks_numeric_sequence():
    even = floating_fp_sequence(6, 1.0, 0.0, 1200, precision_bits=53)
    odd = floating_fp_sequence(7, 1.0, 0.0, 1201, precision_bits=53)
    for n in range(6, 201):
        numeric = (even if n % 2 == 0 else odd)[n].as_floats()
        error = np.max(np.abs(floating_fp_approx(n, 1.0).as_floats() / numeric - 1))
        assert error < 0.05, n
        if n >= 80:
            assert error < 0.01, n


def test_floating_fixed_point_forgets_its_seed():
    first = floating_fp_numeric(100, 1.0, 0.0, 1200, precision_bits=53)
    second = floating_fp_numeric(
        100, 1.0, 0.0, 1400, xi_seed=XiVector("quartic", (0.5, 1.2, 0.7)), precision_bits=53
    )
    np.testing.assert_allclose(first.as_floats(), second.as_floats(), rtol=0, atol=1e-10)


def test_floating_sequence_rejects_parity_mismatch():
    with pytest.raises(DomainError):
        floating_fp_sequence(100, 1.0, 0.0, 1201)


def test_repulsive_fixed_point_forgets_its_seed():
    precision = Precision(256)
    with precision.active():
        _, minus, _ = analytic_pair(precision.number(200))
        shifted = minus.shifted((precision.number("0.01"), precision.number("-0.01"), precision.number("0.01")))
    first = repulsive_fp_numeric(600, 1.0)
    second = repulsive_fp_numeric(600, 1.0, seed=shifted)
    np.testing.assert_allclose(first.as_floats(), second.as_floats(), rtol=0, atol=1e-10)


def test_repulsive_fixed_point_approaches_analytic_pair():
    numeric = repulsive_fp_numeric(20000, 1.0, depth=400)
    _, minus, _ = analytic_pair(20000.0)
    np.testing.assert_allclose(numeric.as_floats(), minus.as_floats(), atol=1e-3)


def test_floating_spectrum_contracts_at_local_rate():
    plus = floating_fp_numeric(2000, 1.0, 0.0, 2400, precision_bits=53)
    moduli = np.abs(floating_spectrum(2000, 1.0, 0.0, plus))
    _, r_n = local_constants(2000, 1.0)
    assert np.all(moduli < 1)
    assert float(np.prod(moduli)) ** (1 / 3) == pytest.approx(r_n, rel=0.02)


@pytest.mark.slow
@pytest.mark.parametrize("N", [1000, 10000])
@pytest.mark.parametrize("g", [0.1, 1.0, 10.0])
def test_sextic_fixed_point_census(N, g):
    seeds = [np.ones(6)] + sextic_seeds(N, g)
    records = find_numeric(StepperKind.SEXTIC_LARGE_N, 6, N, g, seeds=seeds)
    assert len(records) == 4
    classes = [record.classification for record in records]
    assert classes.count(Classification.ATTRACTIVE) == 1
    assert classes.count(Classification.REPULSIVE) == 1
    assert classes.count(Classification.MIXED) == 2


def test_ssb_fixed_points_are_genuine():
    seeds = default_seeds(StepperKind.SSB_LARGE_N, 1000, 1.0, random_starts=20)
    records = find_numeric(StepperKind.SSB_LARGE_N, 10, 1000, 1.0, seeds=seeds)
    for record in records:
        assert record.residual < 1e-10
        assert len(record.jacobian_eigenvalues) == 10
