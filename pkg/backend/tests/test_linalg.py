"""
Tests for the dense eigensolver and biorthogonal eigensystems
"""

import numpy as np
import pytest
import scipy.linalg

from errors import DegenerateSpectrum, DimensionMismatch, InvalidSpec, NonPositiveEigenvalue, SingularBasis
from linalg import (
    biorthogonalize,
    complex_matrix,
    eigen_general,
    eigen_values,
    format_matrix_text,
    inf_norm,
    inverse,
    kron,
    mat_adjoint,
    mat_log_via_eigen,
    mat_mul,
    parse_matrix_text,
    read_matrix_file,
    reassemble,
    solve,
)
from models import IDENTITY_2, SIGMA_Z


def random_complex(rng, d):
    return rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))


def check_eigenpairs(matrix, values, vectors):
    scale = np.abs(matrix).max()
    assert np.abs(matrix @ vectors - vectors * values).max() <= 1e-9 * scale * len(values)
    assert np.allclose(np.linalg.norm(vectors, axis=0), 1.0)
    det = np.linalg.det(matrix)
    assert abs(np.prod(values) - det) <= 1e-7 * max(abs(det), 1.0) * len(values)


def test_eigen_general_random(rng):
    for d in (1, 2, 3, 6, 9):
        matrix = random_complex(rng, d)
        values, vectors = eigen_general(matrix)
        check_eigenpairs(matrix, values, vectors)


@pytest.mark.slow
def test_eigen_general_random_sweep(rng):
    for _ in range(1000):
        d = int(rng.integers(1, 13))
        matrix = random_complex(rng, d)
        values, vectors = eigen_general(matrix)
        check_eigenpairs(matrix, values, vectors)


def test_eigen_general_rejects_rectangular():
    with pytest.raises(DimensionMismatch):
        eigen_general(np.ones((2, 3)))


def test_eigen_values_match_scipy(rng):
    matrix = random_complex(rng, 5)
    ours = np.sort_complex(eigen_values(matrix))
    reference = np.sort_complex(scipy.linalg.eigvals(matrix))
    assert np.allclose(ours, reference, atol=1e-10)


def test_complex_matrix_validation():
    with pytest.raises(DimensionMismatch):
        complex_matrix([1.0, 2.0])
    with pytest.raises(DimensionMismatch):
        complex_matrix(np.ones((2, 3)), square=True)
    with pytest.raises(InvalidSpec):
        complex_matrix([[np.nan, 0.0], [0.0, 1.0]])


def test_biorthogonalize_qubit(qubit_eig):
    half_gap = np.sqrt(3.0) / 2
    assert np.allclose(qubit_eig.energies, [-half_gap, half_gap], atol=1e-12)
    assert qubit_eig.pt_unbroken

    right, left = qubit_eig.right_vectors, qubit_eig.left_vectors
    assert np.allclose(np.linalg.norm(right, axis=0), 1.0)
    assert np.abs(left.conj().T @ right - np.eye(2)).max() < 1e-12
    # phase convention: first entry of at least half the largest magnitude is real positive
    assert np.allclose(right[0], [0.5, 0.5])


def test_biorthogonalize_reassembles(rng):
    for d in (2, 4, 7):
        matrix = random_complex(rng, d)
        eig = biorthogonalize(matrix)
        assert np.abs(reassemble(eig) - matrix).max() < 1e-9 * np.abs(matrix).max()
        assert np.all(np.diff(eig.energies.real) >= 0)


def test_biorthogonalize_broken_qubit():
    hamiltonian = np.array([[0, -2.0], [4.0, 0]], dtype=complex)
    eig = biorthogonalize(hamiltonian)
    assert not eig.pt_unbroken
    assert np.allclose(np.abs(eig.energies.imag), np.sqrt(8.0))


def test_biorthogonalize_degenerate():
    with pytest.raises(DegenerateSpectrum):
        biorthogonalize(np.eye(2))
    # Jordan block
    with pytest.raises(DegenerateSpectrum):
        biorthogonalize([[1.0, 1.0], [0.0, 1.0]])


def test_biorthogonalize_near_defective():
    with pytest.raises(SingularBasis):
        biorthogonalize([[1.0, 1.0], [0.0, 1.0 + 1e-14]], tol=1e-16)


def test_rescaled_keeps_biorthonormality(qubit_eig):
    eig = qubit_eig.rescaled(np.array([2.0, 0.25]))
    assert np.abs(eig.left_vectors.conj().T @ eig.right_vectors - np.eye(2)).max() < 1e-12
    assert np.allclose(np.linalg.norm(eig.right_vectors, axis=0), [2.0, 0.25])


def test_mat_log_matches_logm(rng):
    x = random_complex(rng, 4)
    rho = x @ x.conj().T + np.eye(4)
    assert np.allclose(mat_log_via_eigen(rho), scipy.linalg.logm(rho), atol=1e-9)


def test_mat_log_rejects_negative():
    with pytest.raises(NonPositiveEigenvalue):
        mat_log_via_eigen(np.diag([1.0, -1.0]))


def test_kron_leftmost_factor_is_site_zero():
    op = kron(SIGMA_Z, IDENTITY_2)
    assert np.allclose(np.diagonal(op), [1, 1, -1, -1])


def test_inf_norm():
    assert inf_norm(np.array([[1, -2], [3j, 0.5]])) == pytest.approx(3.5)


def test_small_helpers(rng):
    a, b, c = (random_complex(rng, 3) for _ in range(3))
    assert np.allclose(mat_mul(a, b, c), a @ b @ c)
    assert np.array_equal(mat_mul(a), a)
    assert np.array_equal(mat_adjoint(a), a.conj().T)
    assert np.allclose(a @ solve(a, b), b)
    assert np.allclose(inverse(a) @ a, np.eye(3))
    with pytest.raises(SingularBasis):
        inverse(np.zeros((2, 2)))


def test_matrix_text_fixture(tmp_path, rng):
    matrix = random_complex(rng, 3)
    path = tmp_path / "rho.txt"
    path.write_text(format_matrix_text(matrix))
    assert np.array_equal(read_matrix_file(path), matrix)

    with pytest.raises(DimensionMismatch):
        parse_matrix_text("2\n1+0j 0+0j\n")
