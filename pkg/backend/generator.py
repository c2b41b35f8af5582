"""
GKSL generators for nhtherm
Frequency-resolved jump decomposition in the biorthogonal eigenbasis, the
thermalization condition and the biorthogonal (BTE) / right-state (RTE)
Liouvillians, optionally materialized as column-stacked superoperators
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from bath import SpectralFunction, gamma
from errors import (
    DimensionMismatch,
    InvalidSpec,
    MismatchedBasis,
    PTBroken,
    TooLarge,
    UnstableGenerator,
    ZeroFrequency,
    ZeroTrace,
)
from linalg import BiorthogonalEigensystem, complex_matrix, eigen_values

logger = logging.getLogger(__name__)

KINDS = ("BTE", "RTE")
MAX_SUPEROPERATOR_DIM = 4096
# Coefficients below this fraction of the largest magnitude do not constrain the gauge
GAUGE_CUTOFF = 1e-8
# relative to max |S|; BTE eigenvalues above this count as growing
GROWTH_TOL = 1e-10


def vectorize(rho: np.ndarray) -> np.ndarray:
    """Column stacking: vec(A X B) = (B^T kron A) vec(X)"""
    return np.asarray(rho).reshape(-1, order="F")


def unvectorize(vec: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(vec).reshape((dim, dim), order="F")


def condition_residual(coeffs: np.ndarray) -> float:
    """max over m != n of |A_mn - conj(A_nm)|"""
    diff = np.abs(coeffs - coeffs.conj().T)
    np.fill_diagonal(diff, 0.0)
    return float(diff.max())


def rescale_coefficients(coeffs: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """A_mn -> (alpha_n / alpha_m) A_mn for right states rescaled by alpha"""
    return coeffs * alpha[np.newaxis, :] / alpha[:, np.newaxis]


def group_frequencies(energies: np.ndarray, freq_tol: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Cluster Bohr frequencies e_n - e_m of sorted real energies

    Args:
        energies: Real energies, ascending
        freq_tol: Spacings within freq_tol * max|e| share a group

    Returns:
        (frequencies, group_index): sorted representative frequencies (negative
        groups mirror the positive ones exactly) and a d x d matrix of indices
        into them, -1 on the diagonal

    Raises:
        ZeroFrequency: Two distinct levels share an energy within tolerance
    """
    d = len(energies)
    group_index = np.full((d, d), -1, dtype=int)
    if d < 2:
        return np.zeros(0), group_index

    tol = freq_tol * max(np.abs(energies).max(), np.finfo(float).tiny)
    m_idx, n_idx = np.triu_indices(d, k=1)
    omegas = energies[n_idx] - energies[m_idx]
    if omegas.min() <= tol:
        raise ZeroFrequency(f"off-diagonal pair with zero Bohr frequency (min spacing {omegas.min():.3e})")

    order = np.argsort(omegas, kind="stable")
    cluster = np.concatenate([[0], np.cumsum(np.diff(omegas[order]) > tol)])
    n_clusters = int(cluster[-1]) + 1
    reps = np.bincount(cluster, weights=omegas[order]) / np.bincount(cluster)

    frequencies = np.concatenate([-reps[::-1], reps])
    positive = n_clusters + cluster
    group_index[m_idx[order], n_idx[order]] = positive
    group_index[n_idx[order], m_idx[order]] = 2 * n_clusters - 1 - positive
    return frequencies, group_index


@dataclass(frozen=True, eq=False)
class JumpDecomposition:
    """
    Coupling operator A resolved into Bohr-frequency jump operators

    coeffs holds A_mn = <m_L|A|n_R> for the self-normalized eigensystem;
    gauge is the right-state rescaling under which the condition is tested.
    """
    eig: BiorthogonalEigensystem
    operator: np.ndarray
    coeffs: np.ndarray
    frequencies: np.ndarray
    group_index: np.ndarray
    freq_groups: Dict[float, List[Tuple[int, int]]]
    jump_ops: Dict[float, np.ndarray]
    therm_residual: float
    raw_residual: float
    gauge: np.ndarray

    @property
    def dim(self) -> int:
        return self.coeffs.shape[0]

    @property
    def kappa(self) -> np.ndarray:
        """kappa_mn = A_mn A_nm (gauge invariant)"""
        return self.coeffs * self.coeffs.T

    def partner(self, k: int) -> int:
        """Index of -frequencies[k]"""
        return len(self.frequencies) - 1 - k


@dataclass(frozen=True, eq=False)
class GaugeReport:
    alpha: np.ndarray
    residuals: List[float]
    inconsistency: float
    components: int

    @property
    def residual(self) -> float:
        return max(self.residuals) if self.residuals else 0.0


def _balance(coeff_mats: Sequence[np.ndarray]) -> GaugeReport:
    d = coeff_mats[0].shape[0]
    rows_m: List[np.ndarray] = []
    rows_n: List[np.ndarray] = []
    rhs: List[np.ndarray] = []
    adjacency = np.zeros((d, d), dtype=bool)

    for coeffs in coeff_mats:
        mag = np.abs(coeffs)
        cut = GAUGE_CUTOFF * max(mag.max(), np.finfo(float).tiny)
        usable = np.triu((mag > cut) & (mag.T > cut), k=1)
        m, n = np.nonzero(usable)
        rows_m.append(m)
        rows_n.append(n)
        rhs.append(np.log(mag[m, n]) - np.log(mag[n, m]))
        adjacency |= usable

    m = np.concatenate(rows_m)
    n = np.concatenate(rows_n)
    b = np.concatenate(rhs)
    n_components, labels = connected_components(csr_matrix(adjacency), directed=False)

    log_alpha = np.zeros(d)
    inconsistency = 0.0
    if len(b):
        system = np.zeros((len(b), d))
        system[np.arange(len(b)), m] = 2.0
        system[np.arange(len(b)), n] = -2.0
        log_alpha = scipy.linalg.lstsq(system, b)[0]
        inconsistency = float(np.abs(system @ log_alpha - b).max())
        for label in range(n_components):
            members = labels == label
            log_alpha[members] -= log_alpha[members].mean()

    alpha = np.exp(log_alpha)
    residuals = [condition_residual(rescale_coefficients(c, alpha)) for c in coeff_mats]
    return GaugeReport(alpha=alpha, residuals=residuals, inconsistency=inconsistency, components=int(n_components))


def balance_gauge(decomps: Sequence[JumpDecomposition]) -> GaugeReport:
    """
    Positive right-state norms alpha balancing |A_mn| against |A_nm| for all operators at once

    Least squares on 2 ln(alpha_m / alpha_n) = ln|A_mn| - ln|A_nm| over every
    coefficient pair above the cutoff; geometric mean 1 on each connected
    component of the coupling graph.
    """
    if not decomps:
        raise InvalidSpec("balance_gauge needs at least one decomposition")
    report = _balance([dec.coeffs for dec in decomps])
    if report.inconsistency > 1e-6:
        logger.warning(f"⚠ gauge balancing inconsistent across pairs (max misfit {report.inconsistency:.3e})")
    return report


def decompose(eig: BiorthogonalEigensystem, operator: np.ndarray, freq_tol: float = 1e-9) -> JumpDecomposition:
    """
    Build the jump decomposition of a Hermitian coupling operator

    Args:
        eig: Eigensystem of the (PT-unbroken) Hamiltonian
        operator: Hermitian coupling operator A
        freq_tol: Relative Bohr-frequency grouping tolerance

    Raises:
        PTBroken: Energies not real
        DimensionMismatch: Operator size differs from the eigensystem
        InvalidSpec: Operator not Hermitian
    """
    if not eig.pt_unbroken:
        raise PTBroken(
            "spectrum is complex; dynamics in the PT-broken region are not simulated",
            report={"max_imag": float(np.abs(eig.energies.imag).max())},
        )
    operator = complex_matrix(operator, square=True)
    if operator.shape[0] != eig.dim:
        raise DimensionMismatch(f"operator is {operator.shape[0]}x{operator.shape[0]}, eigensystem has d = {eig.dim}")
    if np.abs(operator - operator.conj().T).max() > 1e-12 * max(np.abs(operator).max(), 1.0):
        raise InvalidSpec("coupling operator must be Hermitian")

    coeffs = eig.coefficients(operator)
    frequencies, group_index = group_frequencies(eig.energies.real, freq_tol)

    freq_groups: Dict[float, List[Tuple[int, int]]] = {}
    jump_ops: Dict[float, np.ndarray] = {}
    left_dag = eig.left_vectors.conj().T
    for k, omega in enumerate(frequencies):
        mask = group_index == k
        m, n = np.nonzero(mask)
        freq_groups[float(omega)] = list(zip(m.tolist(), n.tolist()))
        jump_ops[float(omega)] = eig.right_vectors @ np.where(mask, coeffs, 0.0) @ left_dag

    gauge = _balance([coeffs])
    return JumpDecomposition(
        eig=eig,
        operator=operator,
        coeffs=coeffs,
        frequencies=frequencies,
        group_index=group_index,
        freq_groups=freq_groups,
        jump_ops=jump_ops,
        therm_residual=gauge.residual,
        raw_residual=condition_residual(coeffs),
        gauge=gauge.alpha,
    )


@dataclass(frozen=True, eq=False)
class ThermalizationVerdict:
    satisfied: bool
    max_residual: float
    worst_operator: int
    residuals: List[float]
    raw_residuals: List[float]
    gauge: GaugeReport

    @property
    def verdict(self) -> str:
        return "Satisfied" if self.satisfied else "Violated"

    def to_dict(self) -> Dict:
        return {
            "verdict": self.verdict,
            "max_residual": self.max_residual,
            "worst_operator": self.worst_operator,
            "residuals": list(self.residuals),
            "raw_residuals": list(self.raw_residuals),
            "gauge_inconsistency": self.gauge.inconsistency,
        }


def check_thermalization(decomps: Sequence[JumpDecomposition], tol: float = 1e-8) -> ThermalizationVerdict:
    """
    Test A_mn = conj(A_nm) for every coupling operator in one common gauge

    Satisfied iff every operator's residual is within tol.
    """
    gauge = balance_gauge(decomps)
    residuals = gauge.residuals
    worst = int(np.argmax(residuals))
    return ThermalizationVerdict(
        satisfied=all(r <= tol for r in residuals),
        max_residual=float(residuals[worst]),
        worst_operator=worst,
        residuals=list(residuals),
        raw_residuals=[dec.raw_residual for dec in decomps],
        gauge=gauge,
    )


@dataclass(eq=False)
class Liouvillian:
    """
    drho/dt = -i G rho + i rho G' + sum rate * left @ rho @ right

    BTE: G = H - i K/2, G' = H + i K/2, jumps A_w rho A_-w
    RTE: G = H - i K/2, G' = G^dagger, jumps A_w rho A_w^dagger
    with K = sum gamma(w) A_-w A_w.
    """
    kind: str
    dim: int
    hamiltonian: np.ndarray
    left_generator: np.ndarray
    right_generator: np.ndarray
    jumps: List[Tuple[float, np.ndarray, np.ndarray]] = field(default_factory=list)
    superoperator: Optional[np.ndarray] = None

    def apply(self, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho, dtype=complex)
        if rho.shape != (self.dim, self.dim):
            raise DimensionMismatch(f"state is {rho.shape}, generator acts on {self.dim}x{self.dim}")
        out = -1j * (self.left_generator @ rho) + 1j * (rho @ self.right_generator)
        for rate, left, right in self.jumps:
            out += rate * (left @ rho @ right)
        return out

    def matvec(self, vec: np.ndarray) -> np.ndarray:
        """Action on a column-stacked state; uses the superoperator when materialized"""
        if self.superoperator is not None:
            return self.superoperator @ vec
        return vectorize(self.apply(unvectorize(vec, self.dim)))


def build_liouvillian(
    kind: str,
    hamiltonian: np.ndarray,
    decomps: Sequence[JumpDecomposition],
    sf: Optional[SpectralFunction],
) -> Liouvillian:
    """
    Assemble the BTE or RTE generator

    Args:
        kind: "BTE" or "RTE"
        hamiltonian: System Hamiltonian
        decomps: Jump decompositions against the eigensystem of hamiltonian (empty: closed system)
        sf: Bath spectral function shared by every coupling operator

    Raises:
        MismatchedBasis: A decomposition has a different dimension
    """
    if kind not in KINDS:
        raise InvalidSpec(f"evolution kind must be BTE or RTE, got {kind!r}")
    hamiltonian = complex_matrix(hamiltonian, square=True)
    d = hamiltonian.shape[0]

    dissipative = np.zeros((d, d), dtype=complex)
    jumps: List[Tuple[float, np.ndarray, np.ndarray]] = []
    for dec in decomps:
        if dec.dim != d:
            raise MismatchedBasis(f"decomposition has d = {dec.dim}, Hamiltonian d = {d}")
        for k, omega in enumerate(dec.frequencies):
            rate = gamma(sf, omega)
            jump = dec.jump_ops[float(omega)]
            reverse = dec.jump_ops[float(dec.frequencies[dec.partner(k)])]
            dissipative += rate * (reverse @ jump)
            jumps.append((rate, jump, reverse if kind == "BTE" else jump.conj().T))

    left_generator = hamiltonian - 0.5j * dissipative
    if kind == "BTE":
        right_generator = hamiltonian + 0.5j * dissipative
    else:
        right_generator = left_generator.conj().T

    return Liouvillian(
        kind=kind,
        dim=d,
        hamiltonian=hamiltonian,
        left_generator=left_generator,
        right_generator=right_generator,
        jumps=jumps,
    )


def materialize_superoperator(liou: Liouvillian) -> np.ndarray:
    """
    Dense d^2 x d^2 superoperator (column stacking), cached on the Liouvillian

    Raises:
        TooLarge: d^2 above 4096
    """
    if liou.superoperator is not None:
        return liou.superoperator
    d = liou.dim
    if d * d > MAX_SUPEROPERATOR_DIM:
        raise TooLarge(f"superoperator of size {d * d} exceeds {MAX_SUPEROPERATOR_DIM}")

    eye = np.eye(d, dtype=complex)
    superop = -1j * np.kron(eye, liou.left_generator) + 1j * np.kron(liou.right_generator.T, eye)
    for rate, left, right in liou.jumps:
        superop += rate * np.kron(right.T, left)

    liou.superoperator = superop
    return superop


@dataclass(frozen=True, eq=False)
class LiouvillianSpectrum:
    eigenvalues: np.ndarray
    steady_state: np.ndarray
    dominant: complex

    @property
    def gap(self) -> float:
        """Distance in real part between the dominant eigenvalue and the next one"""
        if len(self.eigenvalues) < 2:
            return float("inf")
        return float(self.eigenvalues[0].real - self.eigenvalues[1].real)


def liouvillian_spectrum(liou: Liouvillian) -> LiouvillianSpectrum:
    """
    Eigenvalues of the superoperator (descending real part) and the long-time state

    The long-time state is the trace-normalized eigenvector of the eigenvalue
    with the largest real part: the null vector for BTE, the dominant mode of
    the non-trace-preserving RTE generator.

    Raises:
        UnstableGenerator: BTE eigenvalue with positive real part
        ZeroTrace: Dominant eigenvector is traceless
    """
    superop = materialize_superoperator(liou)
    values = eigen_values(superop)
    values = values[np.lexsort((-values.imag, -values.real))]
    dominant = values[0]

    growth_tol = GROWTH_TOL * max(np.abs(superop).max(), 1.0)
    if liou.kind == "BTE" and dominant.real > growth_tol:
        growing = values[values.real > growth_tol]
        raise UnstableGenerator(
            f"BTE generator has {len(growing)} growing modes, max Re lambda = {dominant.real:.6e}",
            report={
                "max_re": float(dominant.real),
                "growing": [[float(z.real), float(z.imag)] for z in growing],
                "tolerance": growth_tol,
            },
        )

    shifted = superop - dominant * np.eye(superop.shape[0])
    vec = scipy.linalg.svd(shifted)[2][-1].conj()
    state = unvectorize(vec, liou.dim)
    tr = np.trace(state)
    if abs(tr) < 1e-12 * np.abs(state).max():
        raise ZeroTrace("dominant eigenvector of the generator has zero trace")
    return LiouvillianSpectrum(eigenvalues=values, steady_state=state / tr, dominant=complex(dominant))
