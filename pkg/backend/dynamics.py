"""
Time evolution for nhtherm
Adaptive Dormand-Prince integration of drho/dt = L[rho] with dense sampling,
steady-state detection and observable recording
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np
import scipy.linalg
from scipy.integrate import RK45

from errors import DimensionMismatch, InvalidSpec, NonFiniteState, StepSizeUnderflow, ZeroTrace
from generator import MAX_SUPEROPERATOR_DIM, Liouvillian, materialize_superoperator, unvectorize, vectorize
from linalg import BiorthogonalEigensystem, complex_matrix, inf_norm
from models import SIGMA_Z, site_operator

logger = logging.getLogger(__name__)

# Function evaluations per attempted Dormand-Prince step (FSAL)
_FEVALS_PER_ATTEMPT = 6
TRACE_BUDGET = 1e-6

Observable = Union[np.ndarray, Callable[[np.ndarray], complex]]


@dataclass
class EvolveOptions:
    rtol: float = 1e-8
    atol: float = 1e-10
    steady_tol: float = 1e-10
    stop_on_converge: bool = True
    first_step: Optional[float] = None
    max_step: float = np.inf


@dataclass
class Trajectory:
    """Sampled solution; RTE states are stored trace-normalized"""
    kind: str
    times: np.ndarray
    states: np.ndarray
    trace_log: np.ndarray
    observables: Dict[str, np.ndarray] = field(default_factory=dict)
    converged_at: Optional[float] = None
    integrator_stats: Dict[str, int] = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.converged_at is not None

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


def expectation(rho: np.ndarray, operator: np.ndarray) -> complex:
    """
    tr(rho O) / tr(rho)

    Raises:
        ZeroTrace: tr(rho) vanishes
        DimensionMismatch: Shapes differ
    """
    rho = np.asarray(rho)
    operator = np.asarray(operator)
    if rho.shape != operator.shape:
        raise DimensionMismatch(f"state {rho.shape} and operator {operator.shape} differ")
    tr = np.trace(rho)
    if abs(tr) <= 1e-14 * max(np.abs(rho).max(), np.finfo(float).tiny):
        raise ZeroTrace("expectation of a traceless state")
    # tr(rho O) without forming the product
    return complex(np.sum(rho * operator.T) / tr)


def avg_polarization_z(rho: np.ndarray, L: int) -> complex:
    """Site-averaged <sigma^z_l>"""
    rho = np.asarray(rho)
    if rho.shape != (2 ** L, 2 ** L):
        raise DimensionMismatch(f"state {rho.shape} is not a {L}-site state")
    return complex(np.mean([expectation(rho, site_operator(SIGMA_Z, site, L)) for site in range(L)]))


def eigen_coefficients(rho: np.ndarray, eig: BiorthogonalEigensystem) -> np.ndarray:
    """c_mn = <m_L|rho|n_R>, so rho = sum c_mn |m_R><n_L|"""
    return eig.left_vectors.conj().T @ np.asarray(rho) @ eig.right_vectors


def _normalize(rho: np.ndarray) -> np.ndarray:
    tr = np.trace(rho)
    if abs(tr) <= 1e-300:
        raise ZeroTrace("state trace vanished")
    return rho / tr


def _record(rho: np.ndarray, kind: str, observables: Mapping[str, Observable]) -> Tuple[np.ndarray, Dict[str, complex]]:
    state = _normalize(rho) if kind == "RTE" else rho
    values = {}
    for name, obs in observables.items():
        values[name] = obs(state) if callable(obs) else expectation(state, obs)
    return state, values


def evolve(
    rho0: np.ndarray,
    liou: Liouvillian,
    t_end: float,
    sample_dt: float,
    opts: Optional[EvolveOptions] = None,
    observables: Optional[Mapping[str, Observable]] = None,
) -> Trajectory:
    """
    Integrate the master equation with an adaptive Runge-Kutta 4(5) stepper

    Args:
        rho0: Initial density matrix (tr != 0)
        liou: Generator
        t_end: Final time (hard cap)
        sample_dt: Sampling interval
        opts: Tolerances and steady-state criterion
        observables: name -> operator (or callable on the recorded state)

    Returns:
        Trajectory sampled at multiples of sample_dt (and t_end)

    Raises:
        StepSizeUnderflow: Step size collapsed
        NonFiniteState: State blew up
    """
    opts = opts or EvolveOptions()
    observables = dict(observables or {})
    rho0 = complex_matrix(rho0, square=True)
    d = liou.dim
    if rho0.shape != (d, d):
        raise DimensionMismatch(f"initial state {rho0.shape} does not match generator dimension {d}")
    if not t_end > 0 or not sample_dt > 0:
        raise InvalidSpec("t_end and sample_dt must be positive")
    if abs(np.trace(rho0)) <= 1e-14:
        raise ZeroTrace("initial state has zero trace")

    if liou.superoperator is None and d * d <= MAX_SUPEROPERATOR_DIM:
        materialize_superoperator(liou)
    max_step = opts.max_step
    if liou.superoperator is not None:
        # h |S| <= 1 keeps the stepper inside its stability region near the steady state
        max_step = min(max_step, 1.0 / max(inf_norm(liou.superoperator), np.finfo(float).tiny))

    def rhs(t, y):
        return liou.matvec(y)

    solver = RK45(
        rhs, 0.0, vectorize(rho0), t_end,
        rtol=opts.rtol, atol=opts.atol,
        first_step=opts.first_step, max_step=max_step,
    )

    sample_count = int(np.floor(t_end / sample_dt + 1e-9))
    sample_times = [k * sample_dt for k in range(sample_count + 1)]
    if t_end - sample_times[-1] > 1e-9 * sample_dt:
        sample_times.append(t_end)

    times: List[float] = []
    states: List[np.ndarray] = []
    traces: List[complex] = []
    series: Dict[str, List[complex]] = {name: [] for name in observables}
    trace0 = complex(np.trace(rho0))
    trace_drift = 0.0
    converged_at: Optional[float] = None

    def take(t: float, rho: np.ndarray):
        nonlocal converged_at, trace_drift
        if not np.all(np.isfinite(rho)):
            raise NonFiniteState(f"state not finite at t = {t:g}")
        state, values = _record(rho, liou.kind, observables)
        tr = complex(np.trace(rho))
        if liou.kind == "BTE":
            trace_drift = max(trace_drift, abs(tr - trace0))
        if states and converged_at is None:
            change = np.abs(state - states[-1]).max() / (t - times[-1])
            if change < opts.steady_tol:
                converged_at = t
        times.append(t)
        states.append(state)
        traces.append(tr)
        for name, value in values.items():
            series[name].append(value)

    take(0.0, rho0)
    next_sample = 1
    steps = rejected = 0

    while solver.status == "running" and next_sample < len(sample_times):
        fevals_before = solver.nfev
        message = solver.step()
        if solver.status == "failed":
            raise StepSizeUnderflow(f"integrator failed at t = {solver.t:g}: {message}")
        steps += 1
        rejected += max(0, (solver.nfev - fevals_before) // _FEVALS_PER_ATTEMPT - 1)
        if not np.all(np.isfinite(solver.y)):
            raise NonFiniteState(f"state not finite at t = {solver.t:g}")

        dense = solver.dense_output()
        while next_sample < len(sample_times) and sample_times[next_sample] <= solver.t + 1e-12:
            t = sample_times[next_sample]
            take(t, unvectorize(dense(t), d))
            next_sample += 1
            if converged_at is not None and opts.stop_on_converge:
                break
        if converged_at is not None and opts.stop_on_converge:
            break

    if trace_drift > TRACE_BUDGET:
        logger.warning(f"⚠ BTE trace drifted by {trace_drift:.3e}")
    if converged_at is not None:
        logger.info(f"✓ converged at t={converged_at:g}")
    else:
        logger.info(f"⚠ no steady state within t={times[-1]:g}")

    return Trajectory(
        kind=liou.kind,
        times=np.array(times),
        states=np.array(states),
        trace_log=np.array(traces),
        observables={name: np.array(values) for name, values in series.items()},
        converged_at=converged_at,
        integrator_stats={"steps": steps, "rejected": rejected, "nfev": int(solver.nfev)},
    )


def integrate_fixed_rk4(liou: Liouvillian, rho0: np.ndarray, t_end: float, n_steps: int) -> np.ndarray:
    """Classical fixed-step RK4, used as an order reference"""
    if n_steps < 1:
        raise InvalidSpec("n_steps must be at least 1")
    h = t_end / n_steps
    y = vectorize(complex_matrix(rho0, square=True))
    for _ in range(n_steps):
        k1 = liou.matvec(y)
        k2 = liou.matvec(y + 0.5 * h * k1)
        k3 = liou.matvec(y + 0.5 * h * k2)
        k4 = liou.matvec(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return unvectorize(y, liou.dim)


def propagate_exact(liou: Liouvillian, rho0: np.ndarray, t: float) -> np.ndarray:
    """exp(t S) vec(rho0) with the dense superoperator"""
    superop = materialize_superoperator(liou)
    return unvectorize(scipy.linalg.expm(t * superop) @ vectorize(rho0), liou.dim)
