"""
Tests for reference states, variances, entropies and Bloch vectors
"""

import numpy as np
import pytest

from conftest import chain_system
from diagnostics import (
    bloch_vector,
    entropies,
    reference_state,
    spectrum_for_entropy,
    variance,
    variance_max_entry,
)
from errors import ComplexSpectrum, DimensionMismatch, InvalidSpec, NonPositiveEigenvalue, PTBroken
from models import ModelSpec, model_eigensystem


def gibbs_entropy(energies, beta):
    weights = np.exp(-beta * energies)
    weights /= weights.sum()
    return float(-np.sum(weights * np.log(weights)))


def test_bbs_qubit(qubit_eig):
    bbs = reference_state("BBS", qubit_eig, 1.0)
    chi_e = 1.0 / (1.0 + np.exp(np.sqrt(3.0)))
    assert bbs.weights == pytest.approx([1 - chi_e, chi_e])
    assert np.trace(bbs.matrix) == pytest.approx(1.0)
    assert bbs.partition == pytest.approx(2 * np.cosh(np.sqrt(3.0) / 2))


def test_bbs_spin_vector_leaves_unit_ball(qubit_eig):
    # low temperature: the BBS approaches |g_R><g_L|
    bbs = reference_state("BBS", qubit_eig, 40.0)
    sx, sy, sz = bloch_vector(bbs.matrix)
    assert sx.real == pytest.approx(-2 / np.sqrt(3.0), abs=1e-9)
    assert abs(sz) < 1e-12
    assert sy.real == pytest.approx(0.0, abs=1e-12)
    assert np.sqrt(abs(sx) ** 2 + abs(sy) ** 2 + abs(sz) ** 2) > 1.0


def test_brs_is_a_density_matrix(qubit_eig):
    brs = reference_state("BRS", qubit_eig, 1.0)
    assert np.allclose(brs.matrix, brs.matrix.conj().T)
    assert np.trace(brs.matrix) == pytest.approx(1.0)
    assert np.linalg.eigvalsh(brs.matrix).min() > 0
    sx, sy, sz = bloch_vector(brs.matrix)
    assert np.sqrt(abs(sx) ** 2 + abs(sy) ** 2 + abs(sz) ** 2) <= 1.0


def test_brs_gauge_normalization(qubit_eig):
    brs = reference_state("BRS", qubit_eig, 1.0, gauge=np.array([1.0, 2.0]))
    assert np.trace(brs.matrix) == pytest.approx(1.0)


def test_reference_state_validation(qubit_eig):
    with pytest.raises(InvalidSpec):
        reference_state("Gibbs", qubit_eig, 1.0)
    with pytest.raises(InvalidSpec):
        reference_state("BBS", qubit_eig, -1.0)
    broken = model_eigensystem(ModelSpec.qubit(1.0, 1.5))
    with pytest.raises(PTBroken):
        reference_state("BBS", broken, 1.0)


def test_variance_norms():
    rho = np.array([[0.5, 0.25], [0.25, 0.5]])
    ref = np.diag([0.5, 0.5])
    assert variance(rho, ref) == pytest.approx(0.25)
    assert variance_max_entry(rho, ref) == pytest.approx(0.25)
    assert variance(np.array([[1, -1], [1, 1]]) * 0.1, np.zeros((2, 2))) == pytest.approx(0.2)
    with pytest.raises(DimensionMismatch):
        variance(rho, np.eye(3))


def test_bbs_entropy_equals_gibbs(qubit_eig):
    """S_von of the BBS equals the Gibbs entropy"""
    for beta in (0.2, 1.0, 3.0):
        bbs = reference_state("BBS", qubit_eig, beta)
        result = entropies(bbs, beta, qubit_eig.energies.real)
        assert result.S_von == pytest.approx(gibbs_entropy(qubit_eig.energies.real, beta), abs=1e-12)
        assert abs(result.delta_S) < 1e-12


def test_qubit_gibbs_entropy_value(qubit_eig):
    result = entropies(reference_state("BBS", qubit_eig, 1.0), 1.0, qubit_eig.energies.real)
    chi_e = 1.0 / (1.0 + np.exp(np.sqrt(3.0)))
    expected = -(chi_e * np.log(chi_e) + (1 - chi_e) * np.log(1 - chi_e))
    assert result.S_gib == pytest.approx(expected, rel=1e-12)
    assert result.S_gib == pytest.approx(0.4233, abs=1e-4)


def test_brs_entropy_differs_from_gibbs():
    _, _, eig, _ = chain_system(4, coupling="SigmaX")
    brs = reference_state("BRS", eig, 1.0)
    result = entropies(brs, 1.0, eig.energies.real)
    assert result.S_gib == pytest.approx(gibbs_entropy(eig.energies.real, 1.0))
    # right states are not orthogonal, the BRS spectrum is not the Boltzmann weights
    assert abs(result.delta_S) > 1e-6


def test_entropy_of_hermitian_state():
    rho = np.diag([0.5, 0.5]).astype(complex)
    result = entropies(rho, 1.0, np.array([0.0, 1.0]))
    assert result.S_von == pytest.approx(np.log(2.0))


def test_spectrum_for_entropy_errors():
    with pytest.raises(NonPositiveEigenvalue):
        spectrum_for_entropy(np.diag([1.5, -0.5]))
    rotation = np.array([[0.5, -0.5], [0.5, 0.5]])
    with pytest.raises(ComplexSpectrum):
        spectrum_for_entropy(rotation)


def test_bloch_vector_validation():
    with pytest.raises(DimensionMismatch):
        bloch_vector(np.eye(4))
    sx, sy, sz = bloch_vector(np.array([[1, 0], [0, 0]], dtype=complex))
    assert (sx, sy, sz) == (0, 0, 1)
