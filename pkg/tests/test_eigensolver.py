import numpy as np
import pytest
import scipy.linalg

from spiralrg.eigensolver import (
    SpectrumRequest,
    ground_energy,
    lowest_eigenvalues,
    sturm_count,
    tridiagonalize,
    verify_renormalization,
)
from spiralrg.errors import DomainError
from spiralrg.hamiltonian import BandedSymMatrix, ModelVariant, Variant, build_matrix, free_matrix


def test_free_spectrum():
    values = lowest_eigenvalues(SpectrumRequest(free_matrix(11), 11))
    np.testing.assert_allclose(values, np.arange(11), atol=1e-10)


def test_weak_coupling_ground_energy():
    g = 1e-4
    energy = ground_energy(build_matrix(ModelVariant(Variant.QUARTIC, g), 60))
    assert abs(energy - 3 * g) <= 50 * g * g


@pytest.mark.parametrize("variant", ["quartic", "sextic", "ssb"])
def test_lowest_eigenvalues_match_dense(variant):
    matrix = build_matrix(ModelVariant(variant, 0.5), 40)
    values = lowest_eigenvalues(SpectrumRequest(matrix, 5))
    dense = scipy.linalg.eigvalsh(matrix.to_dense())[:5]
    np.testing.assert_allclose(values, dense, rtol=1e-9, atol=1e-8)


def test_tridiagonal_form_is_similar():
    matrix = build_matrix(ModelVariant(Variant.QUARTIC, 1.0), 30)
    diagonal, off = tridiagonalize(matrix)
    tridiagonal = np.diag(diagonal) + np.diag(off, 1) + np.diag(off, -1)
    np.testing.assert_allclose(
        scipy.linalg.eigvalsh(tridiagonal), scipy.linalg.eigvalsh(matrix.to_dense()), rtol=1e-10, atol=1e-8
    )


def test_sturm_count_against_dense():
    rng = np.random.default_rng(1)
    for dim in (2, 7, 25, 50):
        diagonal = rng.normal(size=dim)
        off = rng.normal(size=dim - 1)
        dense = np.diag(diagonal) + np.diag(off, 1) + np.diag(off, -1)
        eigenvalues = scipy.linalg.eigvalsh(dense)
        for x in rng.uniform(-4, 4, size=10):
            if np.min(np.abs(eigenvalues - x)) < 1e-9:
                continue
            assert sturm_count(diagonal, off, x) == int(np.sum(eigenvalues < x))


def test_one_by_one_matrix():
    matrix = BandedSymMatrix.from_dense(np.array([[2.5]]), 0)
    assert lowest_eigenvalues(SpectrumRequest(matrix, 1)) == [2.5]


def test_request_validation():
    matrix = free_matrix(4)
    with pytest.raises(DomainError):
        SpectrumRequest(matrix, 0)
    with pytest.raises(DomainError):
        SpectrumRequest(matrix, 5)
    with pytest.raises(DomainError):
        SpectrumRequest(matrix, 1, tol=0.0)


def test_verify_rejects_inverted_cutoffs():
    with pytest.raises(DomainError):
        verify_renormalization(1.0, 0.0, 10, 10)


@pytest.mark.parametrize("half_bandwidth", [1, 2, 3, 5])
def test_band_reduction_keeps_spectrum(half_bandwidth):
    rng = np.random.default_rng(half_bandwidth)
    dim = 40
    dense = np.zeros((dim, dim))
    for d in range(half_bandwidth + 1):
        values = rng.normal(size=dim - d) * (3.0 if d == 0 else 1.0)
        dense += np.diag(values, d)
        if d:
            dense += np.diag(values, -d)
    matrix = BandedSymMatrix.from_dense(dense, half_bandwidth)
    diagonal, off = tridiagonalize(matrix)
    assert diagonal.shape == (dim,) and off.shape == (dim - 1,)
    tridiagonal = np.diag(diagonal) + np.diag(off, 1) + np.diag(off, -1)
    np.testing.assert_allclose(
        scipy.linalg.eigvalsh(tridiagonal), scipy.linalg.eigvalsh(dense), rtol=1e-10, atol=1e-10
    )


def test_ssb_band_reduction_keeps_spectrum():
    matrix = build_matrix(ModelVariant(Variant.SSB, 0.3), 50)
    diagonal, off = tridiagonalize(matrix)
    tridiagonal = np.diag(diagonal) + np.diag(off, 1) + np.diag(off, -1)
    np.testing.assert_allclose(
        scipy.linalg.eigvalsh(tridiagonal), scipy.linalg.eigvalsh(matrix.to_dense()), rtol=1e-10, atol=1e-8
    )


def test_weak_coupling_verification_errors_vanish():
    report = verify_renormalization(1e-3, 0.0, 60, 10)
    assert report.e0_full == pytest.approx(3e-3, rel=0.05)
    assert report.error_renormalized < 1e-6
    assert report.error_plain < 1e-6


@pytest.mark.slow
def test_renormalized_error_shrinks_with_cutoff():
    errors = [verify_renormalization(10.0, 0.0, 200, n).error_renormalized for n in (10, 20, 30)]
    assert errors[0] > errors[1] > errors[2]


@pytest.mark.slow
def test_ground_energy_converged_at_two_hundred():
    model = ModelVariant(Variant.QUARTIC, 10.0)
    e200 = ground_energy(build_matrix(model, 200))
    e400 = ground_energy(build_matrix(model, 400))
    assert abs(e200 - e400) < 1e-8 * abs(e400)


@pytest.mark.slow
def test_renormalized_cutoff_beats_plain_truncation():
    report = verify_renormalization(10.0, 0.0, 200, 10)
    assert report.error_renormalized <= 0.005
    assert report.improvement >= 50
    assert report.as_dict()["n"] == 10
