"""
Shared fixtures for the nhtherm test suite
"""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from bath import SpectralFunction  # noqa: E402
from config import reset_settings  # noqa: E402
from generator import decompose  # noqa: E402
from models import ModelSpec, build_hamiltonian, coupling_operators, model_eigensystem  # noqa: E402

# Qubit at h_x = 1, h_y = 0.5 has energies -/+ sqrt(3) / 2
QUBIT_GAP = np.sqrt(3.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(autouse=True)
def _isolated_settings(monkeypatch, tmp_path):
    for key in ("NHTHERM_OUTPUT_DIR", "NHTHERM_WORKERS", "NHTHERM_LOG_LEVEL"):
        monkeypatch.delenv(key, raising=False)
    monkeypatch.chdir(tmp_path)
    reset_settings()
    yield
    reset_settings()


@pytest.fixture
def qubit_spec():
    return ModelSpec.qubit(h_x=1.0, h_y=0.5, coupling_choice="SigmaZ")


@pytest.fixture
def qubit_eig(qubit_spec):
    return model_eigensystem(qubit_spec)


@pytest.fixture
def qubit_decomp(qubit_spec, qubit_eig):
    return decompose(qubit_eig, coupling_operators(qubit_spec)[0])


@pytest.fixture
def ohmic():
    return SpectralFunction.from_temperature(1.0, gamma0=0.1)


def chain_system(L, h_y=0.2, h_z=0.75, coupling="SigmaX"):
    """(spec, H, eig, decomps) for the open Ising chain"""
    spec = ModelSpec.chain(L=L, J=1.0, h_y=h_y, h_z=h_z, coupling_choice=coupling)
    eig = model_eigensystem(spec)
    decomps = [decompose(eig, op) for op in coupling_operators(spec)]
    return spec, build_hamiltonian(spec), eig, decomps
