"""
Model Hamiltonians for nhtherm
PT-symmetric qubit and the non-Hermitian transverse-field Ising chain,
their bath coupling operators and PT-region classification
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from errors import InvalidSpec
from linalg import BiorthogonalEigensystem, biorthogonalize, kron

logger = logging.getLogger(__name__)

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)

PAULIS = {"SigmaX": SIGMA_X, "SigmaY": SIGMA_Y, "SigmaZ": SIGMA_Z}

# Distance to the exceptional line (in field units) under which the PT rule is only advisory
EXCEPTIONAL_GUARD = 0.05


@dataclass(frozen=True)
class ModelSpec:
    """
    Qubit: H = h_x sigma^x - i h_y sigma^y (L = 1)
    IsingChain: H = J sum sigma^x_l sigma^x_{l+1} + sum (i h_y sigma^y_l + h_z sigma^z_l), open ends

    Site 0 is the leftmost Kronecker factor.
    """
    kind: str
    h_x: float = 1.0
    h_y: float = 0.0
    h_z: float = 0.0
    J: float = 1.0
    L: int = 1
    coupling_choice: str = "SigmaZ"

    def __post_init__(self):
        if self.kind not in ("Qubit", "IsingChain"):
            raise InvalidSpec(f"unknown model kind {self.kind!r}")
        if self.coupling_choice not in ("SigmaZ", "SigmaX"):
            raise InvalidSpec(f"coupling_choice must be SigmaZ or SigmaX, got {self.coupling_choice!r}")
        if not all(np.isfinite([self.h_x, self.h_y, self.h_z, self.J])):
            raise InvalidSpec("field strengths must be finite")
        if self.kind == "Qubit" and self.L != 1:
            raise InvalidSpec(f"Qubit has L = 1, got L = {self.L}")
        if self.kind == "IsingChain" and not 2 <= self.L <= 12:
            raise InvalidSpec(f"IsingChain needs 2 <= L <= 12, got L = {self.L}")

    @property
    def dim(self) -> int:
        return 2 ** self.L

    @classmethod
    def qubit(cls, h_x: float, h_y: float, coupling_choice: str = "SigmaZ") -> "ModelSpec":
        return cls(kind="Qubit", h_x=h_x, h_y=h_y, L=1, coupling_choice=coupling_choice)

    @classmethod
    def chain(cls, L: int, J: float, h_y: float, h_z: float, coupling_choice: str = "SigmaX") -> "ModelSpec":
        return cls(kind="IsingChain", J=J, h_y=h_y, h_z=h_z, L=L, coupling_choice=coupling_choice)

    @classmethod
    def from_config(cls, model_config) -> "ModelSpec":
        return cls(
            kind=model_config.kind,
            h_x=model_config.h_x,
            h_y=model_config.h_y,
            h_z=model_config.h_z,
            J=model_config.J,
            L=model_config.L,
            coupling_choice=model_config.coupling,
        )


def site_operator(op: np.ndarray, site: int, L: int) -> np.ndarray:
    """Embed a single-site operator at `site` of an L-site chain"""
    if not 0 <= site < L:
        raise InvalidSpec(f"site {site} outside chain of length {L}")
    return kron(*[op if s == site else IDENTITY_2 for s in range(L)])


def build_hamiltonian(spec: ModelSpec) -> np.ndarray:
    """
    Hamiltonian matrix of the model

    Args:
        spec: Model specification

    Returns:
        d x d complex matrix, d = 2^L
    """
    if spec.kind == "Qubit":
        return spec.h_x * SIGMA_X - 1j * spec.h_y * SIGMA_Y

    L = spec.L
    hamiltonian = np.zeros((spec.dim, spec.dim), dtype=complex)
    for site in range(L - 1):
        hamiltonian += spec.J * kron(*[
            SIGMA_X if s in (site, site + 1) else IDENTITY_2 for s in range(L)
        ])
    onsite = 1j * spec.h_y * SIGMA_Y + spec.h_z * SIGMA_Z
    for site in range(L):
        hamiltonian += site_operator(onsite, site, L)
    return hamiltonian


def coupling_operators(spec: ModelSpec) -> List[np.ndarray]:
    """Hermitian bath coupling operators: one for the qubit, one per site for the chain"""
    pauli = PAULIS[spec.coupling_choice]
    if spec.kind == "Qubit":
        return [pauli.copy()]
    return [site_operator(pauli, site, spec.L) for site in range(spec.L)]


@dataclass(frozen=True)
class PTReport:
    unbroken: bool
    max_imag: float
    max_abs: float
    rule_unbroken: Optional[bool] = None
    warnings: List[str] = field(default_factory=list)

    @property
    def verdict(self) -> str:
        return "Unbroken" if self.unbroken else "Broken"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "verdict": self.verdict,
            "max_imag": self.max_imag,
            "max_abs": self.max_abs,
            "rule_unbroken": self.rule_unbroken,
            "warnings": list(self.warnings),
        }


def _rule_unbroken(spec: ModelSpec) -> Tuple[bool, float]:
    """Field rule for the PT-unbroken region and the distance to its boundary"""
    if spec.kind == "Qubit":
        return abs(spec.h_y) < abs(spec.h_x), abs(abs(spec.h_x) - abs(spec.h_y))
    return abs(spec.h_z) > abs(spec.h_y), abs(abs(spec.h_z) - abs(spec.h_y))


def pt_classify(eig: BiorthogonalEigensystem, spec: Optional[ModelSpec] = None) -> PTReport:
    """
    Classify the PT region from the computed spectrum

    The field rule (|h_y| < |h_x| for the qubit, |h_z| > |h_y| for the chain)
    is only a consistency check; disagreement or proximity to the exceptional
    line is reported as a warning.
    """
    max_imag = float(np.abs(eig.energies.imag).max())
    max_abs = float(np.abs(eig.energies).max())
    warnings: List[str] = []
    rule = None

    if spec is not None:
        rule, distance = _rule_unbroken(spec)
        if rule != eig.pt_unbroken:
            warnings.append(
                f"PT classification from spectrum ({'Unbroken' if eig.pt_unbroken else 'Broken'}) "
                f"disagrees with field rule ({'Unbroken' if rule else 'Broken'})"
            )
        elif distance < EXCEPTIONAL_GUARD:
            warnings.append(f"within {distance:.3g} of the exceptional line")

    for message in warnings:
        logger.warning(f"⚠ {message}")

    return PTReport(
        unbroken=eig.pt_unbroken,
        max_imag=max_imag,
        max_abs=max_abs,
        rule_unbroken=rule,
        warnings=warnings,
    )


def model_eigensystem(spec: ModelSpec, degeneracy_tol: float = 1e-9) -> BiorthogonalEigensystem:
    return biorthogonalize(build_hamiltonian(spec), tol=degeneracy_tol)
