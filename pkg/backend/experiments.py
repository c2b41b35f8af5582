"""
Experiment runners for nhtherm
evolve, scan, sectors and bloch: each takes a SimulationConfig, writes its
CSV / JSON outputs and returns (exit_code, payload)
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from bath import SpectralFunction
from config import SimulationConfig, get_settings
from diagnostics import bloch_vector, entropies, reference_state, variance, variance_max_entry
from dynamics import EvolveOptions, Trajectory, avg_polarization_z, evolve
from errors import ConfigError, DimensionMismatch, PTBroken, SimulationError, UnstableGenerator
from export import trajectory_rows, write_csv, write_json
from generator import (
    MAX_SUPEROPERATOR_DIM,
    JumpDecomposition,
    Liouvillian,
    ThermalizationVerdict,
    build_liouvillian,
    check_thermalization,
    decompose,
    liouvillian_spectrum,
)
from linalg import BiorthogonalEigensystem, biorthogonalize, read_matrix_file
from models import SIGMA_X, SIGMA_Y, SIGMA_Z, ModelSpec, PTReport, build_hamiltonian, coupling_operators, pt_classify
from pauli import (
    build_sectors,
    detailed_balance_report,
    diagonal_sector,
    dominance_report,
    rte_rate_matrix,
    rte_steady_weights,
    StabilityReport,
    rte_two_level_check,
    stability_report,
    steady_weights,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_NOT_CONVERGED = 4

SCAN_HEADER = [
    "h_y", "h_z", "V_lr", "V_rr", "S_von_lr", "S_von_rr", "S_gib",
    "delta_S_lr", "delta_S_rr", "pt_flag", "V_lr_max", "V_rr_max", "therm_residual", "errors",
]


@dataclass(eq=False)
class PreparedModel:
    """Everything derived from the model and bath blocks of a config"""
    spec: ModelSpec
    hamiltonian: np.ndarray
    eig: BiorthogonalEigensystem
    pt: PTReport
    decomps: List[JumpDecomposition]
    verdict: ThermalizationVerdict
    sf: SpectralFunction

    @property
    def gauge(self) -> np.ndarray:
        return self.verdict.gauge.alpha

    def liouvillian(self, kind: str) -> Liouvillian:
        return build_liouvillian(kind, self.hamiltonian, self.decomps, self.sf)


def prepare_model(config: SimulationConfig, spec: Optional[ModelSpec] = None) -> PreparedModel:
    """
    Build Hamiltonian, eigensystem, decompositions and thermalization verdict

    Raises:
        PTBroken: Spectrum not real (carries the classification report)
    """
    spec = spec or ModelSpec.from_config(config.model)
    hamiltonian = build_hamiltonian(spec)
    eig = biorthogonalize(hamiltonian, tol=config.run.degeneracy_tol)
    pt = pt_classify(eig, spec)
    if not pt.unbroken:
        raise PTBroken(f"{spec.kind} is in the PT-broken region", report=pt.to_dict())

    decomps = [decompose(eig, op, config.run.freq_tol) for op in coupling_operators(spec)]
    verdict = check_thermalization(decomps, config.run.thermalization_tol)
    logger.info(
        f"{'✓' if verdict.satisfied else '⚠'} thermalization condition {verdict.verdict} "
        f"(max residual {verdict.max_residual:.3e})"
    )
    return PreparedModel(
        spec=spec,
        hamiltonian=hamiltonian,
        eig=eig,
        pt=pt,
        decomps=decomps,
        verdict=verdict,
        sf=SpectralFunction.from_config(config.bath),
    )


def initial_state(config: SimulationConfig, prepared: PreparedModel, kind: Optional[str] = None) -> np.ndarray:
    """Initial density matrix in the convention of the evolution kind"""
    kind = kind or config.evolution
    eig = prepared.eig
    d = eig.dim
    choice = config.initial_state.kind

    if choice == "FullyPolarizedUp":
        rho = np.zeros((d, d), dtype=complex)
        rho[0, 0] = 1.0
        return rho
    if choice == "InfiniteTemperature":
        if kind == "BTE":
            return eig.right_vectors @ eig.left_vectors.conj().T / d
        rho = eig.right_vectors @ eig.right_vectors.conj().T
        return rho / np.trace(rho)
    if choice == "GroundProjectorBiorthogonal":
        if kind == "BTE":
            return eig.projector(0, 0)
        return np.outer(eig.right_vectors[:, 0], eig.right_vectors[:, 0].conj())

    rho = read_matrix_file(config.initial_state.path)
    if rho.shape != (d, d):
        raise DimensionMismatch(f"initial state file is {rho.shape[0]}x{rho.shape[0]}, model has d = {d}")
    return rho


def output_directory(config: SimulationConfig, command: str) -> Path:
    base = Path(config.output.directory) if config.output.directory else get_settings().output_dir / command
    try:
        base.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigError(f"output directory {base} is not writable: {e}", keys=["output.directory"]) from e
    return base


def _observables(prepared: PreparedModel, kind: str) -> Dict[str, Any]:
    eig = prepared.eig
    # BTE: rho = sum c_mn |m_R><n_L|; RTE: rho = sum c_mn |m_R><n_R|
    right_dual = eig.left_vectors if kind == "RTE" else eig.right_vectors

    def coefficient(m: int, n: int):
        return lambda rho: complex(eig.left_vectors[:, m].conj() @ rho @ right_dual[:, n] / np.trace(rho))

    observables: Dict[str, Any] = {}
    if prepared.spec.kind == "Qubit":
        observables.update({"sx": SIGMA_X, "sy": SIGMA_Y, "sz": SIGMA_Z})
        for m in range(eig.dim):
            for n in range(eig.dim):
                observables[f"c_{m}{n}"] = coefficient(m, n)
    else:
        L = prepared.spec.L
        observables["sz_avg"] = lambda rho: avg_polarization_z(rho, L)
        for m in range(eig.dim):
            observables[f"c_{m}{m}"] = coefficient(m, m)
    return observables


def _final_variances(rho: np.ndarray, prepared: PreparedModel, beta: float) -> Dict[str, float]:
    rho = rho / np.trace(rho)
    bbs = reference_state("BBS", prepared.eig, beta)
    brs = reference_state("BRS", prepared.eig, beta, gauge=prepared.gauge)
    return {
        "lr": variance(rho, bbs),
        "rr": variance(rho, brs),
        "lr_max": variance_max_entry(rho, bbs),
        "rr_max": variance_max_entry(rho, brs),
    }


def bte_stability(prepared: PreparedModel) -> Optional[StabilityReport]:
    """
    Sector-spectrum check run before any BTE integration

    Returns None when the system is too large to enumerate sectors.

    Raises:
        UnstableGenerator: Some sector eigenvalue has positive real part
    """
    if prepared.eig.dim ** 2 > MAX_SUPEROPERATOR_DIM:
        logger.warning(f"⚠ d = {prepared.eig.dim}: BTE stability not checked")
        return None
    sectors = build_sectors(prepared.eig, prepared.decomps, prepared.sf, gauge=prepared.gauge)
    report = stability_report(sectors)
    if not report.stable:
        raise UnstableGenerator(
            f"BTE generator grows: max Re lambda = {report.max_re:.6e} "
            f"({report.negative_transitions} negative delta = 0 transitions)",
            report=report.to_dict(),
        )
    if report.min_diagonal_margin < -report.tolerance:
        logger.warning(f"⚠ delta = 0 margin {report.min_diagonal_margin:.3e} is negative but no mode grows")
    return report


def run_trajectory(config: SimulationConfig, prepared: PreparedModel, kind: Optional[str] = None,
                   observables: Optional[Dict[str, Any]] = None) -> Trajectory:
    kind = kind or config.evolution
    if kind == "BTE":
        bte_stability(prepared)
    run = config.run
    opts = EvolveOptions(rtol=run.rtol, atol=run.atol, steady_tol=run.steady_tol)
    return evolve(
        initial_state(config, prepared, kind),
        prepared.liouvillian(kind),
        run.time_cap(config.bath.gamma0),
        run.sample_dt,
        opts,
        observables if observables is not None else _observables(prepared, kind),
    )


def cmd_evolve(config: SimulationConfig) -> Tuple[int, Dict[str, Any]]:
    """
    Integrate one trajectory, write trajectory.csv and summary.json

    Exit code 4 when no steady state is reached within the time cap.
    """
    prepared = prepare_model(config)
    kind = config.evolution
    observables = _observables(prepared, kind)
    trajectory = run_trajectory(config, prepared, kind, observables)
    beta = prepared.sf.beta

    variances = _final_variances(trajectory.final_state, prepared, beta)
    target = variances["lr"] if kind == "BTE" else variances["rr"]
    thermalized = trajectory.converged and target < config.run.variance_threshold

    summary = {
        "model": config.model.model_dump(),
        "evolution": kind,
        "bath": config.bath.model_dump(),
        "initial_state": config.initial_state.kind,
        "converged": trajectory.converged,
        "converged_at": trajectory.converged_at,
        "t_final": float(trajectory.times[-1]),
        "final_variance": variances,
        "status": "Thermalized" if thermalized else "NotThermalized",
        "thermalization": prepared.verdict.to_dict(),
        "pt": prepared.pt.to_dict(),
        "energies": prepared.eig.energies.real,
        "integrator": trajectory.integrator_stats,
        "final_observables": {name: series[-1] for name, series in trajectory.observables.items()},
    }

    out = output_directory(config, "evolve")
    if "csv" in config.output.formats:
        header, rows = trajectory_rows(trajectory, list(observables))
        write_csv(out / "trajectory.csv", header, rows)
    if "json" in config.output.formats:
        write_json(out / "summary.json", summary)

    logger.info(f"{'✓' if thermalized else '⚠'} {kind} run {summary['status']} (V = {target:.3e})")
    return (EXIT_OK if trajectory.converged else EXIT_NOT_CONVERGED), summary


def long_time_state(config: SimulationConfig, prepared: PreparedModel, kind: str) -> np.ndarray:
    """Trace-normalized long-time state: dominant generator mode, or the end of a trajectory"""
    if config.run.scan_method == "spectral":
        return liouvillian_spectrum(prepared.liouvillian(kind)).steady_state
    trajectory = run_trajectory(config, prepared, kind, observables={})
    if not trajectory.converged:
        logger.warning(f"⚠ {kind} run hit the time cap without converging")
    final = trajectory.final_state
    return final / np.trace(final)


def in_guard_band(h_y: float, h_z: float, J: float) -> bool:
    return abs(h_z) - abs(h_y) <= 0.05 * abs(J)


def _scan_point(task: Tuple[str, int, int, float, float, bool]) -> Tuple[int, int, List[Any]]:
    config_json, i, j, h_y, h_z, include_exceptional = task
    config = SimulationConfig.model_validate_json(config_json)
    row: List[Any] = [h_y, h_z] + [None] * 7 + ["", None, None, None, ""]

    if not include_exceptional and in_guard_band(h_y, h_z, config.model.J):
        row[9] = "Excluded"
        row[13] = "outside unbroken wedge or inside guard band"
        return i, j, row

    try:
        spec = ModelSpec.from_config(config.model.model_copy(update={"h_y": h_y, "h_z": h_z}))
        prepared = prepare_model(config, spec)
        beta = prepared.sf.beta
        energies = prepared.eig.energies.real

        bte_state = long_time_state(config, prepared, "BTE")
        rte_state = long_time_state(config, prepared, "RTE")
        bbs = reference_state("BBS", prepared.eig, beta)
        brs_balanced = reference_state("BRS", prepared.eig, beta, gauge=prepared.gauge)
        brs = reference_state("BRS", prepared.eig, beta)

        s_lr = entropies(bbs, beta, energies)
        s_rr = entropies(brs, beta, energies)
        row[2:9] = [
            variance(bte_state, bbs),
            variance(rte_state, brs_balanced),
            s_lr.S_von,
            s_rr.S_von,
            s_lr.S_gib,
            s_lr.delta_S,
            s_rr.delta_S,
        ]
        row[9] = prepared.pt.verdict
        row[10] = variance_max_entry(bte_state, bbs)
        row[11] = variance_max_entry(rte_state, brs_balanced)
        row[12] = prepared.verdict.max_residual
    except PTBroken as e:
        row[9] = "Broken"
        row[13] = str(e)
    except SimulationError as e:
        row[13] = f"{type(e).__name__}: {e}"
    return i, j, row


def _grid(spec: Tuple[float, float, int]) -> np.ndarray:
    start, stop, steps = spec
    return np.linspace(start, stop, int(steps))


def cmd_scan(
    config: SimulationConfig,
    hy: Tuple[float, float, int],
    hz: Tuple[float, float, int],
    include_exceptional: bool = False,
    workers: Optional[int] = None,
) -> Tuple[int, List[List[Any]]]:
    """
    Variance and entropy map over the (h_y, h_z) plane of the Ising chain

    Rows are emitted in grid order (h_y outer, h_z inner) regardless of scheduling;
    failed points are kept with their error text.
    """
    if config.model.kind != "IsingChain":
        raise ConfigError("scan needs model.kind = IsingChain", keys=["model.kind"])
    workers = workers or get_settings().workers
    config_json = config.model_dump_json()
    tasks = [
        (config_json, i, j, float(h_y), float(h_z), include_exceptional)
        for i, h_y in enumerate(_grid(hy))
        for j, h_z in enumerate(_grid(hz))
    ]

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_scan_point, tasks))
    else:
        results = [_scan_point(task) for task in tasks]

    rows = [row for _, _, row in sorted(results, key=lambda r: (r[0], r[1]))]
    failed = sum(1 for row in rows if row[13] and row[9] != "Excluded")
    if failed:
        logger.warning(f"⚠ {failed} scan points failed")

    out = output_directory(config, "scan")
    write_csv(out / "scan.csv", SCAN_HEADER, rows)
    logger.info(f"✓ scanned {len(rows)} points with {workers} workers")
    return EXIT_OK, rows


def cmd_sectors(config: SimulationConfig, workers: Optional[int] = None) -> Tuple[int, Dict[str, Any]]:
    """Pauli-sector report: matrices, margins, spectra, dominance, steady weights"""
    prepared = prepare_model(config)
    workers = workers or get_settings().workers
    eig, sf = prepared.eig, prepared.sf
    sectors = build_sectors(eig, prepared.decomps, sf, gauge=prepared.gauge, workers=workers)
    sector0 = diagonal_sector(sectors)
    energies = eig.energies.real

    off_diagonal = [s for s in sectors if s.delta != 0.0]
    reports = [dominance_report(s) for s in off_diagonal]
    bound_ok = all(
        np.all(s.gershgorin_margins >= s.margin_bounds - 1e-12) for s in off_diagonal
    )
    report: Dict[str, Any] = {
        "model": config.model.model_dump(),
        "bath": config.bath.model_dump(),
        "thermalization": prepared.verdict.to_dict(),
        "gauge": prepared.gauge,
        "sectors": [s.to_dict() for s in sectors],
        "summary": {
            "n_sectors": len(sectors),
            "offdiag_all_re_negative": all(r["all_re_negative"] for r in reports),
            "offdiag_strictly_dominant": all(r["strictly_dominant"] for r in reports),
            "margin_bound_respected": bool(bound_ok),
        },
        "detailed_balance": detailed_balance_report(sector0, sf, energies),
        "stability": stability_report(sectors).to_dict(),
    }

    try:
        weights = steady_weights(sector0, sf.beta, energies)
        report["steady_weights"] = {"weights": weights.weights, "boltzmann": weights.boltzmann,
                                    "residual": weights.residual}
    except SimulationError as e:
        report["steady_weights"] = {"error": f"{type(e).__name__}: {e}"}

    rte_weights, rte_rate = rte_steady_weights(rte_rate_matrix(eig, prepared.decomps, sf, prepared.gauge))
    report["rte"] = {"weights": rte_weights, "dominant_rate": rte_rate}
    if eig.dim == 2:
        try:
            report["rte"]["two_level"] = rte_two_level_check(eig, prepared.decomps[0], sf, 1, 0)
        except SimulationError as e:
            report["rte"]["two_level"] = {"error": f"{type(e).__name__}: {e}"}

    out = output_directory(config, "sectors")
    write_json(out / "sectors.json", report)
    logger.info(f"✓ {len(sectors)} sectors written")
    return EXIT_OK, report


def cmd_bloch(config: SimulationConfig, temperatures: Sequence[float]) -> Tuple[int, List[List[Any]]]:
    """Long-time spin vector of the qubit under BTE and RTE over a temperature list"""
    if config.model.kind != "Qubit":
        raise ConfigError("bloch needs model.kind = Qubit", keys=["model.kind"])
    header = ["temperature", "kind", "sx_re", "sx_im", "sy_re", "sy_im", "sz_re", "sz_im", "norm"]
    rows: List[List[Any]] = []
    for temperature in temperatures:
        point = config.model_copy(update={"bath": config.bath.model_copy(update={"temperature": temperature})})
        prepared = prepare_model(point)
        for kind in ("BTE", "RTE"):
            vector = bloch_vector(long_time_state(point, prepared, kind))
            norm = float(np.sqrt(sum(abs(v) ** 2 for v in vector)))
            rows.append([float(temperature), kind] + [p for v in vector for p in (v.real, v.imag)] + [norm])

    out = output_directory(config, "bloch")
    write_csv(out / "bloch.csv", header, rows)
    return EXIT_OK, rows
