"""
Exception hierarchy for nhtherm
Every library failure is a SimulationError; the CLI maps each class to an exit code
"""

from typing import Any, Dict, List, Optional


class SimulationError(Exception):
    """Base class for all nhtherm errors"""
    exit_code = 1


class DimensionMismatch(SimulationError):
    """Operand shapes do not fit together"""
    pass


class NonConvergence(SimulationError):
    """Iterative eigen-reduction did not converge"""
    pass


class DegenerateSpectrum(SimulationError):
    """Two eigenvalues coincide within tolerance"""
    pass


class SingularBasis(SimulationError):
    """Eigenvector matrix is numerically singular"""
    pass


class NonPositiveEigenvalue(SimulationError):
    pass


class ComplexSpectrum(SimulationError):
    """Eigenvalues expected real are not"""
    pass


class InvalidSpec(SimulationError):
    """Model specification violates its invariants"""
    pass


class ZeroFrequency(SimulationError):
    pass


class PTBroken(SimulationError):
    """Spectrum is not real; dynamics in the broken region are refused"""
    exit_code = 3

    def __init__(self, message: str, report: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.report = report or {}


class MismatchedBasis(SimulationError):
    pass


class TooLarge(SimulationError):
    pass


class StepSizeUnderflow(SimulationError):
    pass


class NonFiniteState(SimulationError):
    pass


class ZeroTrace(SimulationError):
    pass


class NoNullVector(SimulationError):
    """Generator has no eigenvalue close enough to zero"""
    pass


class ConditionViolated(SimulationError):
    """Thermalization condition fails where it is required"""
    pass


class UnstableGenerator(SimulationError):
    """BTE generator has an eigenvalue with positive real part; no steady state attracts"""
    exit_code = 5

    def __init__(self, message: str, report: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.report = report or {}


class ConfigError(SimulationError):
    """Configuration could not be parsed or validated"""
    exit_code = 2

    def __init__(self, message: str, keys: Optional[List[str]] = None):
        super().__init__(message)
        self.keys = keys or []
