"""
Thermal bath spectral functions
Both shapes satisfy the KMS condition gamma(-w) / gamma(w) = exp(-beta w) exactly
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from errors import InvalidSpec, ZeroFrequency

ZERO_FREQUENCY = 1e-14


@dataclass(frozen=True)
class SpectralFunction:
    """
    gamma(w) for a bosonic bath at inverse temperature beta

    Ohmic:   gamma0 * w / (1 - exp(-beta w))
    FlatKMS: gamma0 * exp(beta w / 2) / (2 cosh(beta w / 2)); beta = 0 allowed
    """
    beta: float
    gamma0: float = 0.1
    shape: str = "Ohmic"

    def __post_init__(self):
        if self.shape not in ("Ohmic", "FlatKMS"):
            raise InvalidSpec(f"unknown bath shape {self.shape!r}")
        if not self.gamma0 > 0:
            raise InvalidSpec(f"gamma0 must be positive, got {self.gamma0}")
        if self.shape == "Ohmic" and not self.beta > 0:
            raise InvalidSpec(f"Ohmic bath needs beta > 0, got {self.beta}")
        if self.beta < 0 or not np.isfinite(self.beta):
            raise InvalidSpec(f"beta must be finite and non-negative, got {self.beta}")

    @classmethod
    def from_temperature(cls, temperature: float, gamma0: float = 0.1, shape: str = "Ohmic") -> "SpectralFunction":
        if not temperature > 0:
            raise InvalidSpec(f"temperature must be positive, got {temperature}")
        return cls(beta=1.0 / temperature, gamma0=gamma0, shape=shape)

    @classmethod
    def from_config(cls, bath_config) -> "SpectralFunction":
        return cls.from_temperature(bath_config.temperature, bath_config.gamma0, bath_config.shape)

    def __call__(self, omega: float) -> float:
        return gamma(self, omega)


def gamma(sf: SpectralFunction, omega: float) -> float:
    """
    Bath rate at Bohr frequency omega

    Raises:
        ZeroFrequency: |omega| below 1e-14 * max(gamma0, 1)
    """
    omega = float(omega)
    if abs(omega) < ZERO_FREQUENCY * max(sf.gamma0, 1.0):
        raise ZeroFrequency(f"gamma(w) undefined at w = {omega:g}")

    x = sf.beta * omega
    if sf.shape == "Ohmic":
        return sf.gamma0 * omega / -np.expm1(-x)
    return sf.gamma0 * float(expit(x))
