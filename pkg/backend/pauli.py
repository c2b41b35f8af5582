"""
Pauli master equations for nhtherm
Energy-bias sectors of the BTE generator, dc/dt = Lc, with diagonal-dominance
diagnostics; Boltzmann steady weights; the right-state rate equation
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
from scipy.special import softmax

from bath import SpectralFunction, gamma
from errors import ConditionViolated, InvalidSpec, NoNullVector, PTBroken
from generator import JumpDecomposition, balance_gauge, rescale_coefficients
from linalg import BiorthogonalEigensystem, eigen_values

logger = logging.getLogger(__name__)

MAX_SECTOR_SIZE = 4096


@dataclass(frozen=True, eq=False)
class Sector:
    """
    One bias sector: rho = sum_p c_p |m_p R><n_p L| with e_{n_p} - e_{m_p} = delta

    lmat excludes the coherent rotation exp(i delta t) common to the sector.
    """
    delta: float
    pairs: List[Tuple[int, int]]
    lmat: np.ndarray
    gershgorin_margins: np.ndarray
    in_sector_diag: np.ndarray
    out_sector_diag: np.ndarray
    margin_bounds: np.ndarray
    spectrum: np.ndarray

    @property
    def size(self) -> int:
        return len(self.pairs)

    @property
    def is_diagonal(self) -> bool:
        return all(m == n for m, n in self.pairs)

    def propagate(self, c0: np.ndarray, t: float) -> np.ndarray:
        """Sector coefficients at time t, including the coherent phase"""
        return np.exp(1j * self.delta * t) * (scipy.linalg.expm(self.lmat * t) @ np.asarray(c0, dtype=complex))

    def to_dict(self) -> Dict[str, Any]:
        report = dominance_report(self)
        return {
            "delta": self.delta,
            "M": self.size,
            "pairs": [list(p) for p in self.pairs],
            "margins": self.gershgorin_margins.tolist(),
            "margin_bounds": self.margin_bounds.tolist(),
            "spectrum": [[float(z.real), float(z.imag)] for z in self.spectrum],
            "dominant": report["strictly_dominant"],
            "all_re_negative": report["all_re_negative"],
            "min_margin": report["min_margin"],
        }


def _rates(decomp: JumpDecomposition, sf: SpectralFunction) -> np.ndarray:
    """gamma(w_mn) for every off-diagonal pair using the grouped frequency, 0 on the diagonal"""
    rates = np.zeros(decomp.group_index.shape)
    for k, omega in enumerate(decomp.frequencies):
        rates[decomp.group_index == k] = gamma(sf, omega)
    return rates


def _sector_pairs(decomp: JumpDecomposition) -> List[Tuple[float, List[Tuple[int, int]]]]:
    d = decomp.dim
    sectors = [(0.0, [(m, m) for m in range(d)])]
    for k, omega in enumerate(decomp.frequencies):
        m, n = np.nonzero(decomp.group_index == k)
        sectors.append((float(omega), list(zip(m.tolist(), n.tolist()))))
    return sectors


def _assemble(
    delta: float,
    pairs: List[Tuple[int, int]],
    terms: Sequence[Tuple[np.ndarray, np.ndarray, np.ndarray]],
) -> Sector:
    """terms: per coupling operator (coeffs in the working gauge, rates, group_index)"""
    size = len(pairs)
    m = np.array([p[0] for p in pairs])
    n = np.array([p[1] for p in pairs])
    lmat = np.zeros((size, size), dtype=complex)
    in_diag = np.zeros(size)
    bounds = np.zeros(size)

    for coeffs, rates, group_index in terms:
        kappa = coeffs * coeffs.T
        # decay of level b: sum_a gamma(e_b - e_a) kappa_ab, rates[a, b] = gamma(e_b - e_a)
        decay = np.sum(rates * kappa, axis=0)
        lmat[np.diag_indices(size)] += -0.5 * (decay[m] + decay[n])

        # rows p target, columns q source: gamma(w_{m_p m_q}) A_{m_p m_q} A_{n_q n_p}
        same = (group_index[np.ix_(m, m)] == group_index[np.ix_(n, n)]) & (group_index[np.ix_(m, m)] >= 0)
        jump = rates[np.ix_(m, m)] * coeffs[np.ix_(m, m)] * coeffs[np.ix_(n, n)].T
        lmat += np.where(same, jump, 0.0)

        # in-sector part of the diagonal and the dominance lower bound, per source column q
        rates_qp = rates[np.ix_(m, m)]
        in_diag += -0.5 * np.sum(
            np.where(same, rates_qp * (kappa[np.ix_(m, m)] + kappa[np.ix_(n, n)]).real, 0.0), axis=0
        )
        spread = (np.abs(coeffs[np.ix_(m, m)]).T - np.abs(coeffs[np.ix_(n, n)]).T) ** 2
        bounds += 0.5 * np.sum(np.where(same, rates_qp * spread, 0.0), axis=0)

    diag = np.diagonal(lmat)
    off = np.abs(lmat).sum(axis=0) - np.abs(diag)
    margins = np.abs(diag) - off

    return Sector(
        delta=delta,
        pairs=list(pairs),
        lmat=lmat,
        gershgorin_margins=margins,
        in_sector_diag=in_diag,
        out_sector_diag=diag.real - in_diag,
        margin_bounds=bounds,
        spectrum=eigen_values(lmat),
    )


def build_sectors(
    eig: BiorthogonalEigensystem,
    decomps: Union[JumpDecomposition, Sequence[JumpDecomposition]],
    sf: SpectralFunction,
    gauge: Optional[np.ndarray] = None,
    workers: int = 1,
) -> List[Sector]:
    """
    All bias sectors of the BTE generator, summed over coupling operators

    Args:
        eig: Eigensystem the decompositions were built on
        decomps: One decomposition or one per coupling operator
        sf: Bath spectral function
        gauge: Right-state norms for the coefficients (default: jointly balanced)
        workers: Threads used to assemble sectors

    Returns:
        Sectors ordered by delta, the delta = 0 sector included

    Raises:
        PTBroken: Spectrum not real
    """
    if not eig.pt_unbroken:
        raise PTBroken("sector decomposition needs a real spectrum")
    if isinstance(decomps, JumpDecomposition):
        decomps = [decomps]
    if not decomps:
        raise InvalidSpec("build_sectors needs at least one decomposition")
    if gauge is None:
        gauge = balance_gauge(decomps).alpha

    terms = [(rescale_coefficients(dec.coeffs, gauge), _rates(dec, sf), dec.group_index) for dec in decomps]
    sector_pairs = sorted(_sector_pairs(decomps[0]), key=lambda s: s[0])

    oversized = [delta for delta, pairs in sector_pairs if len(pairs) > MAX_SECTOR_SIZE]
    if oversized:
        logger.warning(f"⚠ {len(oversized)} sectors exceed {MAX_SECTOR_SIZE} pairs and are skipped")
        sector_pairs = [s for s in sector_pairs if len(s[1]) <= MAX_SECTOR_SIZE]

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            sectors = list(pool.map(lambda s: _assemble(s[0], s[1], terms), sector_pairs))
    else:
        sectors = [_assemble(delta, pairs, terms) for delta, pairs in sector_pairs]

    logger.debug(f"built {len(sectors)} sectors, largest M = {max(s.size for s in sectors)}")
    return sectors


def diagonal_sector(sectors: Sequence[Sector]) -> Sector:
    for sector in sectors:
        if sector.delta == 0.0:
            return sector
    raise InvalidSpec("no delta = 0 sector present")


def dominance_report(sector: Sector) -> Dict[str, Any]:
    """Strict diagonal dominance (by columns) and the sign of the spectrum"""
    scale = max(np.abs(sector.lmat).max(), np.finfo(float).tiny)
    return {
        "strictly_dominant": bool(np.all(sector.gershgorin_margins > 0)),
        "min_margin": float(sector.gershgorin_margins.min()),
        "all_re_negative": bool(sector.spectrum.real.max() < -1e-12 * scale),
    }


@dataclass(frozen=True)
class StabilityReport:
    """Growth diagnostics of the BTE generator assembled from its sectors"""
    max_re: float
    growing_deltas: List[float]
    min_diagonal_margin: float
    negative_transitions: int
    tolerance: float

    @property
    def stable(self) -> bool:
        return self.max_re <= self.tolerance

    def to_dict(self) -> Dict[str, Any]:
        return {
            "stable": self.stable,
            "max_re": self.max_re,
            "growing_deltas": list(self.growing_deltas),
            "min_diagonal_margin": self.min_diagonal_margin,
            "negative_transitions": self.negative_transitions,
            "tolerance": self.tolerance,
        }


def stability_report(sectors: Sequence[Sector]) -> StabilityReport:
    """
    Largest real part over all sector spectra plus the delta = 0 column margins

    Sector spectra together are the spectrum of the BTE superoperator, so
    max_re > 0 means some coefficient grows without bound. Negative
    transitions are off-diagonal delta = 0 entries gamma kappa with negative
    real part; they make the delta = 0 margins negative.
    """
    scale = max(max(np.abs(s.lmat).max() for s in sectors), 1.0)
    tol = 1e-10 * scale
    max_re = max(float(s.spectrum.real.max()) for s in sectors)
    growing = [s.delta for s in sectors if s.spectrum.real.max() > tol]

    sector0 = diagonal_sector(sectors)
    off = sector0.lmat[~np.eye(sector0.size, dtype=bool)]
    return StabilityReport(
        max_re=max_re,
        growing_deltas=growing,
        min_diagonal_margin=float(sector0.gershgorin_margins.min()),
        negative_transitions=int(np.sum(off.real < -tol)),
        tolerance=tol,
    )


def boltzmann_weights(beta: float, energies: np.ndarray) -> np.ndarray:
    return softmax(-beta * np.asarray(energies).real)


@dataclass(frozen=True)
class SteadyWeights:
    weights: np.ndarray
    boltzmann: np.ndarray
    residual: float
    max_deviation: float


def steady_weights(sector0: Sector, beta: float, energies: np.ndarray) -> SteadyWeights:
    """
    Null vector of the delta = 0 sector, normalized to unit sum

    Raises:
        NoNullVector: No eigenvalue within 1e-8 * |L| of zero
        ConditionViolated: Null vector is not the Boltzmann distribution
    """
    lmat = sector0.lmat
    scale = max(np.abs(lmat).max(), np.finfo(float).tiny)
    smallest = np.abs(sector0.spectrum).min()
    if smallest > 1e-8 * scale:
        raise NoNullVector(f"smallest |lambda| = {smallest:.3e} exceeds 1e-8 * |L|")

    null = scipy.linalg.svd(lmat)[2][-1].conj()
    weights = null / null.sum()
    if np.abs(weights.imag).max() > 1e-9:
        logger.warning(f"⚠ steady weights carry imaginary parts up to {np.abs(weights.imag).max():.3e}")
    weights = weights.real

    chi = boltzmann_weights(beta, energies)
    residual = float(np.abs(lmat @ weights).max())
    deviation = float(np.abs(weights - chi).max())
    if residual > 1e-10 * max(scale, 1.0):
        raise NoNullVector(f"null-vector residual {residual:.3e} too large")
    if deviation > 1e-9:
        raise ConditionViolated(f"steady weights deviate from Boltzmann weights by {deviation:.3e}")
    return SteadyWeights(weights=weights, boltzmann=chi, residual=residual, max_deviation=deviation)


def detailed_balance_report(sector0: Sector, sf: SpectralFunction, energies: np.ndarray) -> Dict[str, Any]:
    """
    Check gamma(w_nm) kappa chi_m = gamma(w_mn) kappa chi_n for every level pair

    Uses the transition rates of the delta = 0 sector at the Boltzmann weights.
    """
    chi = boltzmann_weights(sf.beta, energies)
    lmat = sector0.lmat
    records = []
    worst = 0.0
    d = len(chi)
    for m in range(d):
        for n in range(m + 1, d):
            forward = lmat[n, m] * chi[m]
            backward = lmat[m, n] * chi[n]
            size = max(abs(forward), abs(backward))
            rel = float(abs(forward - backward) / size) if size > 0 else 0.0
            worst = max(worst, rel)
            records.append({
                "m": m,
                "n": n,
                "forward": [float(forward.real), float(forward.imag)],
                "backward": [float(backward.real), float(backward.imag)],
                "rel_residual": rel,
            })
    return {"pairs": records, "max_rel_residual": worst}


def rte_rate_matrix(
    eig: BiorthogonalEigensystem,
    decomps: Union[JumpDecomposition, Sequence[JumpDecomposition]],
    sf: SpectralFunction,
    gauge: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Rate matrix of the RTE generator on rho = sum c_m |m_R><m_R|

    dc_m/dt = sum_k gamma(w_mk) |A_mk|^2 c_k - sum_k gamma(w_km) Re(kappa_mk) c_m,
    with A taken in the gauge alpha (right states alpha_m |m_R>).
    """
    if isinstance(decomps, JumpDecomposition):
        decomps = [decomps]
    d = eig.dim
    alpha = np.ones(d) if gauge is None else np.asarray(gauge)
    rates_matrix = np.zeros((d, d))
    for dec in decomps:
        coeffs = rescale_coefficients(dec.coeffs, alpha)
        rates = _rates(dec, sf)
        # rates[k, m] = gamma(e_m - e_k) = gamma(w_km); gain m <- k uses gamma(w_mk) = rates[m, k]
        gain = rates * np.abs(coeffs) ** 2
        loss = np.sum(rates * (coeffs * coeffs.T).real, axis=0)
        rates_matrix += gain - np.diag(loss)
    return rates_matrix


def rte_steady_weights(rates_matrix: np.ndarray) -> Tuple[np.ndarray, float]:
    """Dominant eigenvector of the rate matrix, unit sum; returns (weights, eigenvalue)"""
    values = eigen_values(rates_matrix)
    dominant = values[np.argmax(values.real)]
    vec = scipy.linalg.svd(rates_matrix - dominant * np.eye(len(values)))[2][-1].conj()
    weights = (vec / vec.sum()).real
    return weights, float(dominant.real)


def _two_level(eig: BiorthogonalEigensystem, dec: JumpDecomposition, sf: SpectralFunction, m: int, n: int,
               alpha: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """2x2 RTE Pauli matrix on (m, n) and its normalized steady density matrix"""
    coeffs = rescale_coefficients(dec.coeffs, alpha)
    e = eig.energies.real
    rate_mn = gamma(sf, e[n] - e[m])
    rate_nm = gamma(sf, e[m] - e[n])
    kappa = float((coeffs[m, n] * coeffs[n, m]).real)
    matrix = np.array([
        [-rate_nm * kappa, rate_mn * abs(coeffs[m, n]) ** 2],
        [rate_nm * abs(coeffs[n, m]) ** 2, -rate_mn * kappa],
    ])
    null = scipy.linalg.svd(matrix)[2][-1]
    weights = null / null.sum()
    right = eig.right_vectors * alpha[np.newaxis, :]
    rho = (weights[0] * np.outer(right[:, m], right[:, m].conj())
           + weights[1] * np.outer(right[:, n], right[:, n].conj()))
    return matrix, rho / np.trace(rho)


def rte_two_level_check(
    eig: BiorthogonalEigensystem,
    decomp: JumpDecomposition,
    sf: SpectralFunction,
    m: int,
    n: int,
    scales: Sequence[float] = (0.5, 2.0, 10.0),
    tol: float = 1e-8,
) -> Dict[str, Any]:
    """
    Two-level RTE Pauli equation and invariance of its steady state under |n_R> -> a |n_R>

    Raises:
        ConditionViolated: A_mn != conj(A_nm) for the pair in the decomposition's gauge
    """
    if m == n:
        raise InvalidSpec("two distinct levels required")
    alpha = decomp.gauge.copy()
    coeffs = rescale_coefficients(decomp.coeffs, alpha)
    pair_residual = abs(coeffs[m, n] - np.conj(coeffs[n, m]))
    if pair_residual > tol:
        raise ConditionViolated(f"pair ({m}, {n}) violates the thermalization condition by {pair_residual:.3e}")

    matrix, rho_ref = _two_level(eig, decomp, sf, m, n, alpha)
    omega_mn = eig.energies.real[n] - eig.energies.real[m]
    expected = np.array([np.exp(sf.beta * omega_mn), 1.0]) / (1.0 + np.exp(sf.beta * omega_mn))
    null = scipy.linalg.svd(matrix)[2][-1]
    weights = null / null.sum()

    deviations = {}
    for scale in scales:
        rescaled = alpha.copy()
        rescaled[n] *= scale
        _, rho = _two_level(eig, decomp, sf, m, n, rescaled)
        deviations[str(scale)] = float(np.abs(rho - rho_ref).max())

    return {
        "pair": [m, n],
        "matrix": matrix.tolist(),
        "weights": weights.tolist(),
        "expected_weights": expected.tolist(),
        "weight_error": float(np.abs(weights - expected).max()),
        "rescaling_deviation": deviations,
        "invariant": all(dev <= 1e-10 for dev in deviations.values()),
    }
