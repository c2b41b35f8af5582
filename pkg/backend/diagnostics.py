"""
Thermal reference states and figures of merit
Boltzmann biorthogonal (BBS) and right-eigenstate (BRS) statistics, variance
against them, von Neumann vs Gibbs entropies, Bloch vectors
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
import scipy.linalg
from scipy.special import entr, logsumexp, softmax

from errors import ComplexSpectrum, DimensionMismatch, InvalidSpec, NonPositiveEigenvalue, PTBroken
from linalg import BiorthogonalEigensystem, eigen_values, inf_norm, max_entry_norm
from models import SIGMA_X, SIGMA_Y, SIGMA_Z

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ReferenceState:
    kind: str
    matrix: np.ndarray
    weights: np.ndarray
    partition: float
    energies: np.ndarray


def reference_state(
    kind: str,
    eig: BiorthogonalEigensystem,
    beta: float,
    gauge: Optional[np.ndarray] = None,
) -> ReferenceState:
    """
    BBS: sum chi_m |m_R><m_L|; BRS: sum chi_m |m_R><m_R| over right states scaled by gauge

    With the default (unit) gauge the BRS trace is 1 by self-normalization;
    otherwise the matrix is trace-normalized.

    Raises:
        PTBroken: Energies not real
    """
    if kind not in ("BBS", "BRS"):
        raise InvalidSpec(f"reference kind must be BBS or BRS, got {kind!r}")
    if not eig.pt_unbroken:
        raise PTBroken("Boltzmann statistics need a real spectrum")
    if beta < 0:
        raise InvalidSpec("beta must be non-negative")

    energies = eig.energies.real
    weights = softmax(-beta * energies)
    partition = float(np.exp(logsumexp(-beta * energies)))

    if kind == "BBS":
        matrix = (eig.right_vectors * weights[np.newaxis, :]) @ eig.left_vectors.conj().T
    else:
        right = eig.right_vectors if gauge is None else eig.right_vectors * np.asarray(gauge)[np.newaxis, :]
        matrix = (right * weights[np.newaxis, :]) @ right.conj().T
        if gauge is not None:
            matrix = matrix / np.trace(matrix).real

    return ReferenceState(kind=kind, matrix=matrix, weights=weights, partition=partition, energies=energies)


def _as_matrix(ref: Union[ReferenceState, np.ndarray]) -> np.ndarray:
    return ref.matrix if isinstance(ref, ReferenceState) else np.asarray(ref)


def variance(rho: np.ndarray, ref: Union[ReferenceState, np.ndarray]) -> float:
    """Induced infinity norm (max absolute row sum) of rho - ref"""
    rho = np.asarray(rho)
    target = _as_matrix(ref)
    if rho.shape != target.shape:
        raise DimensionMismatch(f"state {rho.shape} vs reference {target.shape}")
    return inf_norm(rho - target)


def variance_max_entry(rho: np.ndarray, ref: Union[ReferenceState, np.ndarray]) -> float:
    rho = np.asarray(rho)
    target = _as_matrix(ref)
    if rho.shape != target.shape:
        raise DimensionMismatch(f"state {rho.shape} vs reference {target.shape}")
    return max_entry_norm(rho - target)


@dataclass(frozen=True)
class Entropies:
    S_von: float
    S_gib: float
    delta_S: float


def spectrum_for_entropy(rho: np.ndarray) -> np.ndarray:
    """
    Real eigenvalues of the trace-normalized state

    Raises:
        ComplexSpectrum: Some |Im lambda| >= 1e-10
        NonPositiveEigenvalue: Some lambda < -1e-12
    """
    rho = np.asarray(rho, dtype=complex)
    rho = rho / np.trace(rho)
    if np.abs(rho - rho.conj().T).max() < 1e-12:
        values = scipy.linalg.eigvalsh((rho + rho.conj().T) / 2)
    else:
        values = eigen_values(rho)
        if np.abs(values.imag).max() >= 1e-10:
            raise ComplexSpectrum(f"state spectrum not real (max |Im| = {np.abs(values.imag).max():.3e})")
        values = values.real
    if values.min() < -1e-12:
        raise NonPositiveEigenvalue(f"negative eigenvalue {values.min():.3e} in state spectrum")
    return np.clip(values, 0.0, None)


def entropies(
    state: Union[ReferenceState, np.ndarray],
    beta: float,
    energies: np.ndarray,
) -> Entropies:
    """
    S_von = -tr rho ln rho from the spectrum of rho, S_gib = -sum chi ln chi

    For a BBS reference the spectrum is the weights themselves; it is still
    re-diagonalized as a cross-check.
    """
    chi = softmax(-beta * np.asarray(energies).real)
    s_gib = float(np.sum(entr(chi)))

    if isinstance(state, ReferenceState) and state.kind == "BBS":
        s_von = float(np.sum(entr(state.weights)))
        try:
            numeric = float(np.sum(entr(spectrum_for_entropy(state.matrix))))
            if abs(numeric - s_von) > 1e-8:
                logger.warning(f"⚠ BBS entropy cross-check off by {abs(numeric - s_von):.3e}")
        except (ComplexSpectrum, NonPositiveEigenvalue) as e:
            logger.warning(f"⚠ BBS entropy cross-check skipped: {e}")
    else:
        s_von = float(np.sum(entr(spectrum_for_entropy(_as_matrix(state)))))

    return Entropies(S_von=s_von, S_gib=s_gib, delta_S=s_von - s_gib)


def bloch_vector(rho: np.ndarray) -> Tuple[complex, complex, complex]:
    """(<sigma^x>, <sigma^y>, <sigma^z>) of a qubit state, trace-normalized"""
    rho = np.asarray(rho)
    if rho.shape != (2, 2):
        raise DimensionMismatch(f"Bloch vector needs a 2x2 state, got {rho.shape}")
    tr = np.trace(rho)
    return tuple(complex(np.sum(rho * op.T) / tr) for op in (SIGMA_X, SIGMA_Y, SIGMA_Z))
