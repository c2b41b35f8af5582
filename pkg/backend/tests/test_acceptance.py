"""
End-to-end physics checks on the reference qubit and the open Ising chain
"""

import numpy as np
import pytest
import scipy.linalg

from bath import SpectralFunction
from conftest import chain_system
from config import SimulationConfig
from diagnostics import bloch_vector, entropies, reference_state, variance
from dynamics import avg_polarization_z, propagate_exact
from errors import UnstableGenerator
from experiments import EXIT_OK, cmd_evolve, cmd_scan, long_time_state, prepare_model
from generator import build_liouvillian, liouvillian_spectrum, materialize_superoperator
from models import ModelSpec, build_hamiltonian, model_eigensystem
from pauli import (
    build_sectors,
    detailed_balance_report,
    diagonal_sector,
    dominance_report,
    stability_report,
    steady_weights,
)


def chain_config(tmp_path, coupling, **run):
    return SimulationConfig.model_validate({
        "model": {"kind": "IsingChain", "L": 4, "h_y": 0.2, "h_z": 0.75, "coupling": coupling},
        "bath": {"gamma0": 1.0},
        "evolution": "RTE" if run.pop("rte", False) else "BTE",
        "run": run,
        "output": {"directory": str(tmp_path / coupling)},
    })


@pytest.mark.parametrize("temperature", [0.1, 0.5, 1.0, 2.0, 5.0])
def test_bte_qubit_spin_stays_on_x_axis(qubit_spec, qubit_decomp, temperature):
    sf = SpectralFunction.from_temperature(temperature, gamma0=0.1)
    liou = build_liouvillian("BTE", build_hamiltonian(qubit_spec), [qubit_decomp], sf)
    sx, sy, sz = bloch_vector(liouvillian_spectrum(liou).steady_state)
    assert abs(sy.real) < 1e-7
    assert abs(sz.real) < 1e-7
    if temperature == 0.1:
        assert np.sqrt(abs(sx) ** 2 + abs(sy) ** 2 + abs(sz) ** 2) > 1.0


def test_bath_shape_does_not_change_steady_state(qubit_spec, qubit_decomp):
    hamiltonian = build_hamiltonian(qubit_spec)
    states = []
    for shape in ("Ohmic", "FlatKMS"):
        sf = SpectralFunction.from_temperature(1.0, gamma0=0.3, shape=shape)
        states.append(liouvillian_spectrum(build_liouvillian("BTE", hamiltonian, [qubit_decomp], sf)).steady_state)
    assert np.abs(states[0] - states[1]).max() < 1e-8


def test_hermitian_limit_collapses_bte_and_rte():
    _, hamiltonian, eig, decomps = chain_system(2, h_y=0.0, h_z=0.75)
    sf = SpectralFunction.from_temperature(1.0, gamma0=0.5)
    bte = build_liouvillian("BTE", hamiltonian, decomps, sf)
    rte = build_liouvillian("RTE", hamiltonian, decomps, sf)
    assert np.abs(materialize_superoperator(bte) - materialize_superoperator(rte)).max() < 1e-10

    gibbs = scipy.linalg.expm(-hamiltonian)
    gibbs /= np.trace(gibbs)
    for liou in (bte, rte):
        assert np.abs(liouvillian_spectrum(liou).steady_state - gibbs).max() < 1e-8


def test_diagonal_sector_structure():
    _, _, eig, decomps = chain_system(2, coupling="SigmaX")
    sf = SpectralFunction.from_temperature(1.0, gamma0=0.1)
    sector0 = diagonal_sector(build_sectors(eig, decomps, sf))
    # (1, ..., 1) is a left null vector
    assert np.abs(np.ones(sector0.size) @ sector0.lmat).max() < 1e-12
    assert steady_weights(sector0, sf.beta, eig.energies.real).max_deviation < 1e-9
    assert detailed_balance_report(sector0, sf, eig.energies.real)["max_rel_residual"] < 1e-9


def test_sigma_z_chain_bte_has_growing_mode(tmp_path):
    sf = SpectralFunction.from_temperature(1.0, gamma0=0.1)
    _, hamiltonian, eig, decomps = chain_system(4, coupling="SigmaZ")

    report = stability_report(build_sectors(eig, decomps, sf))
    assert not report.stable
    assert 0.02 < report.max_re < 0.03
    assert 0.0 in report.growing_deltas
    assert report.min_diagonal_margin < -0.1
    assert report.negative_transitions > 0

    with pytest.raises(UnstableGenerator) as excinfo:
        liouvillian_spectrum(build_liouvillian("BTE", hamiltonian, decomps, sf))
    assert excinfo.value.report["max_re"] == pytest.approx(report.max_re, abs=1e-8)
    assert excinfo.value.exit_code == 5

    with pytest.raises(UnstableGenerator):
        cmd_evolve(chain_config(tmp_path, "SigmaZ"))


def test_sigma_x_chain_bte_is_stable_and_dominant():
    sf = SpectralFunction.from_temperature(1.0, gamma0=0.1)
    _, _, eig, decomps = chain_system(4, coupling="SigmaX")
    sectors = build_sectors(eig, decomps, sf)

    report = stability_report(sectors)
    assert report.stable
    assert report.negative_transitions == 0
    assert report.min_diagonal_margin >= -report.tolerance
    for sector in sectors:
        if sector.delta != 0.0:
            dominance = dominance_report(sector)
            assert dominance["strictly_dominant"], sector.delta
            assert dominance["all_re_negative"]


def test_sigma_x_chain_plateau_independent_of_initial_state():
    sf = SpectralFunction.from_temperature(1.0, gamma0=1.0)
    _, hamiltonian, eig, decomps = chain_system(4, coupling="SigmaX")
    liou = build_liouvillian("BTE", hamiltonian, decomps, sf)
    t = 40.0 / liouvillian_spectrum(liou).gap

    mixed = np.eye(16, dtype=complex) / 16
    pure = eig.projector(1, 1)
    plateaus = [avg_polarization_z(propagate_exact(liou, rho0, t), 4) for rho0 in (mixed, pure)]
    bbs = avg_polarization_z(reference_state("BBS", eig, sf.beta).matrix, 4)
    assert abs(plateaus[0] - plateaus[1]) < 1e-7
    assert abs(plateaus[0] - bbs) < 1e-7


def test_sigma_z_chain_rte_misses_brs(tmp_path):
    config = chain_config(tmp_path, "SigmaZ")
    prepared = prepare_model(config)
    assert not prepared.verdict.satisfied
    state = long_time_state(config, prepared, "RTE")
    brs = reference_state("BRS", prepared.eig, prepared.sf.beta, gauge=prepared.gauge)
    assert variance(state, brs) > 1e-3


@pytest.mark.slow
def test_sigma_z_chain_rte_run_not_thermalized(tmp_path):
    _, summary = cmd_evolve(chain_config(tmp_path, "SigmaZ", rte=True, t_end_cap=200.0))
    assert summary["status"] == "NotThermalized"
    assert summary["thermalization"]["verdict"] == "Violated"


@pytest.mark.slow
def test_sigma_x_chain_bte_run(tmp_path):
    code, summary = cmd_evolve(chain_config(tmp_path, "SigmaX"))
    assert code == EXIT_OK
    assert summary["status"] == "Thermalized"
    assert summary["final_variance"]["lr"] < 1e-6


def test_brs_entropy_bounded_by_gibbs():
    for h_y in (0.0, 0.2, 0.4, 0.6, 0.7):
        eig = model_eigensystem(ModelSpec.chain(L=4, J=1.0, h_y=h_y, h_z=0.8))
        brs = reference_state("BRS", eig, 1.0)
        result = entropies(brs, 1.0, eig.energies.real)
        assert result.delta_S <= 1e-12
        if h_y == 0.0:
            assert abs(result.delta_S) < 1e-10


@pytest.mark.slow
def test_full_wedge_scan(tmp_path):
    config = SimulationConfig.model_validate({
        "model": {"kind": "IsingChain", "L": 4, "coupling": "SigmaX"},
        "output": {"directory": str(tmp_path / "scan")},
    })
    code, rows = cmd_scan(config, (0.0, 0.7, 10), (0.8, 1.5, 10), workers=2)
    assert code == EXIT_OK
    assert len(rows) == 100
    for row in rows:
        assert row[9] == "Unbroken", row[13]
        assert row[2] < 1e-4
        assert row[3] < 1e-4
        assert abs(row[7]) < 1e-10
        assert row[8] <= 1e-12

