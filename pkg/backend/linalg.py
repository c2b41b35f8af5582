"""
Dense complex linear algebra for nhtherm
General eigensolver, biorthogonal eigensystems and the small matrix helpers the
rest of the package builds on
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Tuple, Union

import numpy as np
import scipy.linalg

from errors import (
    DegenerateSpectrum,
    DimensionMismatch,
    InvalidSpec,
    NonConvergence,
    NonPositiveEigenvalue,
    SingularBasis,
)

logger = logging.getLogger(__name__)

# Condition number beyond which the right-vector matrix counts as singular
CONDITION_LIMIT = 1e12
MAX_DIMENSION = 4096


@dataclass(frozen=True)
class BiorthogonalEigensystem:
    """Energies with paired right / left eigenvectors (columns)"""
    energies: np.ndarray
    right_vectors: np.ndarray
    left_vectors: np.ndarray
    pt_unbroken: bool
    degeneracy_tol: float

    @property
    def dim(self) -> int:
        return len(self.energies)

    def projector(self, m: int, n: int) -> np.ndarray:
        """|m_R><n_L|"""
        return np.outer(self.right_vectors[:, m], self.left_vectors[:, n].conj())

    def coefficients(self, operator: np.ndarray) -> np.ndarray:
        """Matrix of <m_L|O|n_R>"""
        return self.left_vectors.conj().T @ operator @ self.right_vectors

    def rescaled(self, alpha: np.ndarray) -> "BiorthogonalEigensystem":
        """
        Same eigensystem with |n_R> -> alpha_n |n_R> and |n_L> -> |n_L> / conj(alpha_n)

        Biorthonormality is preserved; the self-normalization is not.
        """
        alpha = np.asarray(alpha, dtype=complex)
        return BiorthogonalEigensystem(
            energies=self.energies,
            right_vectors=self.right_vectors * alpha[np.newaxis, :],
            left_vectors=self.left_vectors / alpha.conj()[np.newaxis, :],
            pt_unbroken=self.pt_unbroken,
            degeneracy_tol=self.degeneracy_tol,
        )


def complex_matrix(entries, square: bool = False) -> np.ndarray:
    """
    Validate and convert input to a dense complex128 matrix

    Args:
        entries: Nested sequence or array
        square: Require rows == cols

    Returns:
        2-D complex ndarray (copy)
    """
    matrix = np.array(entries, dtype=complex)
    if matrix.ndim != 2 or matrix.shape[0] < 1 or matrix.shape[1] < 1:
        raise DimensionMismatch(f"expected a non-empty 2-D matrix, got shape {matrix.shape}")
    if square and matrix.shape[0] != matrix.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise InvalidSpec("matrix has non-finite entries")
    return matrix


def _fix_phase(vector: np.ndarray) -> np.ndarray:
    """Make the first entry of at least half the largest magnitude real positive"""
    magnitudes = np.abs(vector)
    pivot = int(np.argmax(magnitudes >= 0.5 * magnitudes.max()))
    return vector * (abs(vector[pivot]) / vector[pivot])


def _triangular_eigenvectors(schur_t: np.ndarray) -> np.ndarray:
    """Eigenvectors of an upper-triangular matrix by back-substitution"""
    d = schur_t.shape[0]
    norm = max(np.abs(schur_t).max(), np.finfo(float).tiny)
    small = np.finfo(float).eps * norm
    vectors = np.zeros((d, d), dtype=complex)

    for k in range(d):
        vectors[k, k] = 1.0
        if k == 0:
            continue
        shifted = schur_t[:k, :k] - schur_t[k, k] * np.eye(k)
        # Vanishing pivots (repeated eigenvalues) are perturbed, as LAPACK trevc does
        diag = np.diagonal(shifted).copy()
        tiny = np.abs(diag) < small
        diag[tiny] = small
        np.fill_diagonal(shifted, diag)
        vectors[:k, k] = scipy.linalg.solve_triangular(shifted, -schur_t[:k, k])

    return vectors


def eigen_general(matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Eigenvalues and right eigenvectors of a general complex matrix

    Balancing, unitary Hessenberg reduction, shifted QR to complex Schur form,
    then back-substitution on the triangular factor.

    Args:
        matrix: Square complex matrix

    Returns:
        (values, vectors) with unit-norm eigenvectors as columns

    Raises:
        DimensionMismatch: Non-square input
        NonConvergence: QR iteration failed
    """
    matrix = complex_matrix(matrix)
    if matrix.shape[0] != matrix.shape[1]:
        raise DimensionMismatch(f"eigen_general needs a square matrix, got {matrix.shape}")
    d = matrix.shape[0]
    if d > MAX_DIMENSION:
        raise DimensionMismatch(f"dimension {d} exceeds {MAX_DIMENSION}")

    balanced, scaling = scipy.linalg.matrix_balance(matrix, permute=True, scale=True)
    hess, q = scipy.linalg.hessenberg(balanced, calc_q=True)
    try:
        schur_t, schur_z = scipy.linalg.schur(hess, output="complex")
    except scipy.linalg.LinAlgError as e:
        raise NonConvergence(f"QR iteration did not converge: {e}") from e

    values = np.diagonal(schur_t).copy()
    vectors = scaling @ (q @ (schur_z @ _triangular_eigenvectors(schur_t)))
    vectors /= np.linalg.norm(vectors, axis=0)[np.newaxis, :]

    residual = np.abs(matrix @ vectors - vectors * values[np.newaxis, :]).max()
    scale = max(np.abs(matrix).max(), np.finfo(float).tiny)
    if residual > 1e-9 * scale * d:
        logger.warning(f"⚠ eigen residual {residual:.3e} exceeds 1e-9*|M| (near-defective input?)")

    return values, vectors


def eigen_values(matrix: np.ndarray) -> np.ndarray:
    """Eigenvalues only (diagonal of the complex Schur form)"""
    matrix = complex_matrix(matrix, square=True)
    try:
        schur_t, _ = scipy.linalg.schur(matrix, output="complex")
    except scipy.linalg.LinAlgError as e:
        raise NonConvergence(f"QR iteration did not converge: {e}") from e
    return np.diagonal(schur_t).copy()


def biorthogonalize(hamiltonian: np.ndarray, tol: float = 1e-9) -> BiorthogonalEigensystem:
    """
    Build the biorthogonal eigensystem of a (non-Hermitian) Hamiltonian

    Right vectors are unit-norm with a fixed phase; left vectors are the
    conjugated rows of R^-1, so <m_L|n_R> = delta_mn.

    Args:
        hamiltonian: Square complex matrix
        tol: Relative eigenvalue separation / PT tolerance

    Returns:
        BiorthogonalEigensystem sorted by ascending real energy

    Raises:
        DegenerateSpectrum: Two eigenvalues closer than tol * spectral radius
        SingularBasis: Right-vector matrix numerically singular
    """
    hamiltonian = complex_matrix(hamiltonian, square=True)
    values, vectors = eigen_general(hamiltonian)
    d = len(values)

    order = np.lexsort((np.arange(d), values.imag, values.real))
    values = values[order]
    vectors = vectors[:, order]

    radius = np.abs(values).max()
    separation = np.abs(values[:, np.newaxis] - values[np.newaxis, :]) + np.diag(np.full(d, np.inf))
    if d > 1 and separation.min() <= tol * max(radius, np.finfo(float).tiny):
        raise DegenerateSpectrum(
            f"eigenvalues coincide within {tol:g} * spectral radius (min gap {separation.min():.3e})"
        )

    right = np.column_stack([_fix_phase(vectors[:, m]) for m in range(d)])
    right /= np.linalg.norm(right, axis=0)[np.newaxis, :]

    condition = np.linalg.cond(right)
    if not np.isfinite(condition) or condition > CONDITION_LIMIT:
        raise SingularBasis(f"right-vector matrix condition {condition:.3e} exceeds {CONDITION_LIMIT:g}")

    left = scipy.linalg.inv(right).conj().T

    overlap = left.conj().T @ right
    if np.abs(overlap - np.eye(d)).max() > 1e-8:
        raise SingularBasis("biorthonormalization lost to round-off")

    pt_unbroken = bool(np.abs(values.imag).max() < tol * max(radius, np.finfo(float).tiny) or radius == 0.0)

    return BiorthogonalEigensystem(
        energies=values,
        right_vectors=right,
        left_vectors=left,
        pt_unbroken=pt_unbroken,
        degeneracy_tol=tol,
    )


def reassemble(eig: BiorthogonalEigensystem) -> np.ndarray:
    """Sum_m e_m |m_R><m_L|"""
    return (eig.right_vectors * eig.energies[np.newaxis, :]) @ eig.left_vectors.conj().T


def mat_func_via_eigen(rho: np.ndarray, func: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """
    Matrix function f(rho) = V f(Lambda) V^-1

    Raises:
        SingularBasis: Eigenbasis singular or reconstruction off by more than 1e-8
    """
    rho = complex_matrix(rho, square=True)
    values, vectors = eigen_general(rho)
    condition = np.linalg.cond(vectors)
    if not np.isfinite(condition) or condition > CONDITION_LIMIT:
        raise SingularBasis(f"eigenbasis condition {condition:.3e} exceeds {CONDITION_LIMIT:g}")
    inverse_vectors = scipy.linalg.inv(vectors)

    if np.abs(vectors @ np.diag(values) @ inverse_vectors - rho).max() > 1e-8:
        raise SingularBasis("eigen-reconstruction residual exceeds 1e-8")

    return vectors @ np.diag(func(values)) @ inverse_vectors


def mat_log_via_eigen(rho: np.ndarray) -> np.ndarray:
    """
    Principal matrix logarithm through the eigendecomposition

    Raises:
        NonPositiveEigenvalue: Some eigenvalue has real part <= 1e-14
    """
    def _log(values: np.ndarray) -> np.ndarray:
        if np.any(values.real <= 1e-14):
            raise NonPositiveEigenvalue(f"eigenvalue real parts must be positive, min {values.real.min():.3e}")
        logger.debug(f"log: max |Im lambda| = {np.abs(values.imag).max():.3e}")
        return np.log(values)

    return mat_func_via_eigen(rho, _log)


def mat_mul(*matrices: np.ndarray) -> np.ndarray:
    if len(matrices) == 1:
        return np.asarray(matrices[0])
    return np.linalg.multi_dot(matrices)


def mat_adjoint(matrix: np.ndarray) -> np.ndarray:
    return np.asarray(matrix).conj().T


def solve(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        return scipy.linalg.solve(matrix, rhs)
    except scipy.linalg.LinAlgError as e:
        raise SingularBasis(str(e)) from e


def inverse(matrix: np.ndarray) -> np.ndarray:
    try:
        return scipy.linalg.inv(matrix)
    except scipy.linalg.LinAlgError as e:
        raise SingularBasis(str(e)) from e


def inf_norm(matrix: np.ndarray) -> float:
    """Induced infinity norm: max absolute row sum"""
    return float(np.abs(matrix).sum(axis=1).max())


def max_entry_norm(matrix: np.ndarray) -> float:
    return float(np.abs(matrix).max())


def trace(matrix: np.ndarray) -> complex:
    return complex(np.trace(matrix))


def kron(*matrices: np.ndarray) -> np.ndarray:
    """Kronecker product of any number of factors, leftmost first"""
    result = np.array([[1.0 + 0j]])
    for matrix in matrices:
        result = np.kron(result, matrix)
    return result


def format_matrix_text(matrix: np.ndarray) -> str:
    """Fixture format: first line d, then d rows of re+imj entries"""
    matrix = complex_matrix(matrix, square=True)
    lines = [str(matrix.shape[0])]
    for row in matrix:
        lines.append(" ".join(f"{z.real:.17g}{z.imag:+.17g}j" for z in row))
    return "\n".join(lines) + "\n"


def parse_matrix_text(text: str) -> np.ndarray:
    """
    Parse the fixture format written by format_matrix_text

    Raises:
        DimensionMismatch: Row count or width disagrees with the header
    """
    lines: List[str] = [line for line in text.strip().splitlines() if line.strip()]
    d = int(lines[0])
    rows = [[complex(token) for token in line.split()] for line in lines[1:]]
    if len(rows) != d or any(len(row) != d for row in rows):
        raise DimensionMismatch(f"matrix text declares d={d} but rows do not match")
    return complex_matrix(rows, square=True)


def read_matrix_file(path: Union[str, Path]) -> np.ndarray:
    return parse_matrix_text(Path(path).read_text())
