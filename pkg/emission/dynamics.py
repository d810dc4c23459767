"""
Variational Dynamics

Dirac-Frenkel equations of motion for the multi-D1 ansatz, RK4 propagation
and the deviation sigma^2(t) from the exact Schrodinger equation.

The equations are assembled in the holomorphic parametrization

    |D> = sum_a at_a |s_a> exp(Z_a . b^dag) |0>,   at_a = c_a exp(-|Z_a|^2 / 2)

in which the Dirac-Frenkel conditions form a Hermitian linear system L x = r
over the unknowns x = (d at_a / dt, d Z_aj / dt). L couples only components
with the same sigma_x spin, so the system splits into two blocks. Within a
block the displacement part of L is (diag(at^*) E diag(at)) (x) 1_modes plus a
low-rank term; eliminating it leaves a dense system of size M^2 + M in the
amplitude derivatives and the mode-summed products P_ab = Z_a^* . dZ_b/dt.
Tikhonov regularization L + eps 1 is applied to the full system.
"""

import logging
from typing import Dict, List, NamedTuple, Optional, Tuple

import numpy as np
import scipy.linalg as la

from .ansatz import (
    HamiltonianTerms,
    h_squared,
    hamiltonian_brackets,
    norm,
    photon_numbers,
    qubit_observables,
    stacked_components,
    state_from_components,
)
from .errors import ConsistencyError, DomainError, EomSolveError, PropagationError
from .types import (
    DiscretizedBath,
    EomSolveReport,
    ModelParams,
    MultiD1State,
    ObservableSet,
    ParameterDerivative,
    PhotonSnapshot,
    TrajectoryRecord,
)

logger = logging.getLogger(__name__)

ACCURACY_GATE = 1e-2
STATIONARITY_TOLERANCE = 0.05
RESIDUAL_WARNING = 1e-8
SIGMA2_ERROR = -1e-6
STEP_TOLERANCE = 1e-9
# largest accepted drift of each conserved quantity over a trajectory
CONSERVATION_TOLERANCES = {"norm": 1e-4, "energy": 1e-3, "parity": 1e-3}


class _BlockSolution(NamedTuple):
    amplitude_rate: np.ndarray
    displacement_rate: np.ndarray
    condition: float
    residual_sq: float
    rhs_sq: float
    tangent_norm_sq: float
    tangent_energy: float


class _EomSolution(NamedTuple):
    amplitude_rate: np.ndarray
    displacement_rate: np.ndarray
    gram_condition: float
    regularization: float
    residual: float
    tangent_norm_sq: float
    tangent_energy: float


def _apply_block(overlaps, holo, disp, amp_rate, disp_rate):
    """L x for one spin block, without the regularization"""
    products = np.conj(disp) @ disp_rate.T
    mixed = amp_rate[None, :] + holo[None, :] * products
    weighted = overlaps * mixed
    amplitude_rows = weighted.sum(axis=1)
    displacement_rows = np.conj(holo)[:, None] * (
        weighted @ disp + (overlaps * holo[None, :]) @ disp_rate
    )
    return amplitude_rows, displacement_rows


def _solve_block(overlaps, holo, disp, rhs_amp, rhs_disp, eps, with_condition) -> _BlockSolution:
    m = holo.shape[0]
    identity = np.eye(m)
    metric = np.conj(holo)[:, None] * overlaps * holo[None, :] + eps * identity
    try:
        metric_lu = la.lu_factor(metric)
        scaled_inverse = la.lu_solve(metric_lu, np.diag(np.conj(holo)))
        mode_products = np.conj(disp) @ disp.T
        coupling = np.einsum("da,ab,cb->cdab", scaled_inverse, overlaps, mode_products)

        size = m * m + m
        system = np.zeros((size, size), dtype=complex)
        system[: m * m, : m * m] = np.eye(m * m) + (coupling * holo[None, None, None, :]).reshape(
            m * m, m * m
        )
        system[: m * m, m * m :] = coupling.sum(axis=2).reshape(m * m, m)
        system[m * m :, : m * m] = np.einsum(
            "ia,ab->iab", identity, overlaps * holo[None, :]
        ).reshape(m, m * m)
        system[m * m :, m * m :] = overlaps + eps * identity
        system_lu = la.lu_factor(system)
    except (la.LinAlgError, ValueError) as exc:
        raise EomSolveError(f"equations of motion are singular: {exc}") from exc

    def solve(r_amp, r_disp):
        free_part = la.lu_solve(metric_lu, r_disp)
        rhs = np.concatenate(((np.conj(disp) @ free_part.T).ravel(), r_amp))
        solution = la.lu_solve(system_lu, rhs)
        products = solution[: m * m].reshape(m, m)
        amp_rate = solution[m * m :]
        mixed = amp_rate[None, :] + holo[None, :] * products
        disp_rate = free_part - scaled_inverse @ ((overlaps * mixed) @ disp)
        return amp_rate, disp_rate

    def residual(amp_rate, disp_rate):
        amp_rows, disp_rows = _apply_block(overlaps, holo, disp, amp_rate, disp_rate)
        return (
            rhs_amp - amp_rows - eps * amp_rate,
            rhs_disp - disp_rows - eps * disp_rate,
        )

    amp_rate, disp_rate = solve(rhs_amp, rhs_disp)
    # one step of iterative refinement on the full system
    res_amp, res_disp = residual(amp_rate, disp_rate)
    delta_amp, delta_disp = solve(res_amp, res_disp)
    amp_rate = amp_rate + delta_amp
    disp_rate = disp_rate + delta_disp
    res_amp, res_disp = residual(amp_rate, disp_rate)

    if not (np.all(np.isfinite(amp_rate)) and np.all(np.isfinite(disp_rate))):
        raise EomSolveError("equations of motion produced non-finite derivatives")

    amp_rows, disp_rows = _apply_block(overlaps, holo, disp, amp_rate, disp_rate)
    tangent_norm_sq = float(np.real(np.vdot(amp_rate, amp_rows) + np.vdot(disp_rate, disp_rows)))
    tangent_energy = float(np.real(np.vdot(amp_rate, rhs_amp) + np.vdot(disp_rate, rhs_disp)))
    condition = (
        max(float(np.linalg.cond(metric)), float(np.linalg.cond(system)))
        if with_condition
        else float("nan")
    )
    return _BlockSolution(
        amplitude_rate=amp_rate,
        displacement_rate=disp_rate,
        condition=condition,
        residual_sq=float(np.sum(np.abs(res_amp) ** 2) + np.sum(np.abs(res_disp) ** 2)),
        rhs_sq=float(np.sum(np.abs(rhs_amp) ** 2) + np.sum(np.abs(rhs_disp) ** 2)),
        tangent_norm_sq=tangent_norm_sq,
        tangent_energy=tangent_energy,
    )


def _eom_arrays(
    spins: np.ndarray,
    amplitudes: np.ndarray,
    displacements: np.ndarray,
    params: ModelParams,
    bath: DiscretizedBath,
    eps_rel: float,
    with_condition: bool = False,
) -> _EomSolution:
    """Derivatives of the normalized-coherent-state amplitudes and the displacements"""
    if eps_rel < 0.0:
        raise DomainError(f"regularization must be nonnegative, got {eps_rel}")

    sq = np.sum(np.abs(displacements) ** 2, axis=1)
    holo = amplitudes * np.exp(-0.5 * sq)
    overlaps = np.exp(np.conj(displacements) @ displacements.T)
    same_spin = spins[:, None] == spins[None, :]

    terms = HamiltonianTerms(displacements, params, bath)
    h_elements = overlaps * hamiltonian_brackets(spins, terms, params.omega0)
    same_overlaps = overlaps * same_spin

    # r_a = -i <a|H|D>,  R_aj = -i <a| b_j H |D>  (unnormalized bras)
    rhs_amp = -1j * (h_elements @ holo)
    field = (
        (h_elements * holo[None, :]) @ displacements
        + ((same_overlaps * holo[None, :]) @ displacements) * terms.frequencies[None, :]
        + 0.5 * (spins * (same_overlaps @ holo))[:, None] * terms.couplings[None, :]
    )
    rhs_disp = np.conj(holo)[:, None] * (-1j * field)

    n_components, n_modes = displacements.shape
    mean_diagonal = (
        np.sum(np.exp(sq)) + np.sum(np.abs(amplitudes) ** 2 * (n_modes + sq))
    ) / (n_components * (1 + n_modes))
    eps = eps_rel * mean_diagonal

    amp_rate = np.empty_like(holo)
    disp_rate = np.empty_like(displacements)
    condition = 0.0
    residual_sq = rhs_sq = tangent_norm_sq = tangent_energy = 0.0
    for spin in (1.0, -1.0):
        block = spins == spin
        solution = _solve_block(
            overlaps[np.ix_(block, block)],
            holo[block],
            displacements[block],
            rhs_amp[block],
            rhs_disp[block],
            eps,
            with_condition,
        )
        amp_rate[block] = solution.amplitude_rate
        disp_rate[block] = solution.displacement_rate
        condition = max(condition, solution.condition)
        residual_sq += solution.residual_sq
        rhs_sq += solution.rhs_sq
        tangent_norm_sq += solution.tangent_norm_sq
        tangent_energy += solution.tangent_energy

    residual = float(np.sqrt(residual_sq / rhs_sq)) if rhs_sq > 0.0 else float(np.sqrt(residual_sq))
    if residual > RESIDUAL_WARNING:
        logger.debug(f"EOM relative residual {residual:.2e} (eps={eps:.2e})")

    # back to amplitudes of normalized coherent states
    drift = np.real(np.sum(np.conj(displacements) * disp_rate, axis=1))
    coherent_rate = np.exp(0.5 * sq) * (amp_rate + holo * drift)
    return _EomSolution(
        amplitude_rate=coherent_rate,
        displacement_rate=disp_rate,
        gram_condition=condition,
        regularization=float(eps),
        residual=residual,
        tangent_norm_sq=tangent_norm_sq,
        tangent_energy=tangent_energy,
    )


def assemble_eom(
    state: MultiD1State,
    params: ModelParams,
    bath: DiscretizedBath,
    regularization_eps: float = 1e-8,
) -> EomSolveReport:
    """Solve the regularized Dirac-Frenkel system for all parameter derivatives

    regularization_eps is relative to the mean diagonal magnitude of L.
    """
    spins, amplitudes, displacements = stacked_components(state)
    solution = _eom_arrays(
        spins, amplitudes, displacements, params, bath, regularization_eps, with_condition=True
    )
    m = state.multiplicity
    derivative = ParameterDerivative(
        amplitudes_plus=solution.amplitude_rate[:m],
        amplitudes_minus=solution.amplitude_rate[m:],
        displacements_plus=solution.displacement_rate[:m],
        displacements_minus=solution.displacement_rate[m:],
    )
    return EomSolveReport(
        derivative=derivative,
        gram_condition=solution.gram_condition,
        regularization_used=solution.regularization,
        residual=solution.residual,
        tangent_norm_sq=solution.tangent_norm_sq,
        tangent_energy=solution.tangent_energy,
    )


def norm_rate(state: MultiD1State, report: EomSolveReport) -> float:
    """d<D|D>/dt implied by the derivatives in the report"""
    spins, amplitudes, displacements = stacked_components(state)
    d = report.derivative
    amp_dot = np.concatenate((d.amplitudes_plus, d.amplitudes_minus))
    disp_dot = np.vstack((d.displacements_plus, d.displacements_minus))
    sq = np.sum(np.abs(displacements) ** 2, axis=1)
    holo = amplitudes * np.exp(-0.5 * sq)
    drift = np.real(np.sum(np.conj(displacements) * disp_dot, axis=1))
    holo_dot = np.exp(-0.5 * sq) * amp_dot - holo * drift
    overlaps = np.exp(np.conj(displacements) @ displacements.T) * (spins[:, None] == spins[None, :])
    products = np.conj(displacements) @ disp_dot.T
    mixed = holo_dot[None, :] + holo[None, :] * products
    return float(2.0 * np.real(np.sum(np.conj(holo)[:, None] * overlaps * mixed)))


def _sigma2_value(state, tangent_norm_sq, tangent_energy, params, bath) -> float:
    total = norm(state)
    h2 = h_squared(state, params, bath) * total
    value = (tangent_norm_sq + h2 - 2.0 * tangent_energy) / total / params.omega0**2
    if value < SIGMA2_ERROR:
        raise ConsistencyError(f"deviation sigma^2 is strongly negative: {value:.3e}")
    if value < -1e-10:
        logger.debug(f"Clamping negative deviation sigma^2 = {value:.3e}")
    return max(value, 0.0)


def deviation(
    state: MultiD1State,
    derivative: EomSolveReport,
    params: ModelParams,
    bath: DiscretizedBath,
) -> float:
    """sigma^2 = |(i d/dt - H)|D>|^2 / (omega0^2 <D|D>)

    Evaluated as <Ddot|Ddot> + <H^2> - 2 Re(-i <Ddot|H|D>), which equals
    <H^2> - <Ddot|Ddot> for an exact Dirac-Frenkel solve.
    """
    return _sigma2_value(
        state, derivative.tangent_norm_sq, derivative.tangent_energy, params, bath
    )


def _rk4_arrays(spins, amplitudes, displacements, first, dt, params, bath, eps):
    def rates(amp, disp):
        solution = _eom_arrays(spins, amp, disp, params, bath, eps)
        return solution.amplitude_rate, solution.displacement_rate

    k1 = (first.amplitude_rate, first.displacement_rate)
    k2 = rates(amplitudes + 0.5 * dt * k1[0], displacements + 0.5 * dt * k1[1])
    k3 = rates(amplitudes + 0.5 * dt * k2[0], displacements + 0.5 * dt * k2[1])
    k4 = rates(amplitudes + dt * k3[0], displacements + dt * k3[1])
    new_amplitudes = amplitudes + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
    new_displacements = displacements + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
    return new_amplitudes, new_displacements


def step_rk4(
    state: MultiD1State,
    dt: float,
    params: ModelParams,
    bath: DiscretizedBath,
    eps: float = 1e-8,
) -> MultiD1State:
    """Classic four-stage Runge-Kutta step of all variational parameters"""
    if dt <= 0.0:
        raise DomainError(f"time step must be positive, got {dt}")
    spins, amplitudes, displacements = stacked_components(state)
    first = _eom_arrays(spins, amplitudes, displacements, params, bath, eps)
    new_amplitudes, new_displacements = _rk4_arrays(
        spins, amplitudes, displacements, first, dt, params, bath, eps
    )
    return state_from_components(
        state.multiplicity, new_amplitudes, new_displacements, state.time + dt
    )


def _checkpoint_steps(n_steps: int, n_checkpoints: int) -> List[int]:
    steps = {n_steps, int(round(0.9 * n_steps))}
    for i in range(1, n_checkpoints + 1):
        steps.add(int(round(n_steps * i / n_checkpoints)))
    return sorted(s for s in steps if s > 0)


def _stationarity(snapshots: List[PhotonSnapshot], t_final: float, t_start: float) -> Optional[float]:
    """Relative L1 change of the bath spectrum over the last 10% of the run"""
    if len(snapshots) < 2:
        return None
    final = snapshots[-1].values[1:]
    window_start = t_final - 0.1 * (t_final - t_start)
    earlier = [s for s in snapshots[:-1] if s.time >= window_start - 1e-9]
    if not earlier:
        return None
    reference = earlier[0].values[1:]
    scale = np.sum(np.abs(final))
    if scale == 0.0:
        return 0.0
    return float(np.sum(np.abs(final - reference)) / scale)


def propagate(
    initial: MultiD1State,
    params: ModelParams,
    bath: DiscretizedBath,
    t_f: float,
    dt: float,
    output_stride: int = 10,
    eps: float = 1e-8,
    n_checkpoints: int = 10,
) -> TrajectoryRecord:
    """Integrate from initial.time to t_f, recording observables every output_stride steps

    sigma^2 is evaluated at every step from the first RK4 stage; bath photon
    numbers are stored at the checkpoints and at t_f (the emission spectrum).
    """
    if t_f <= initial.time or dt <= 0.0:
        raise DomainError(f"need t_f > t0 and dt > 0 (t0={initial.time}, t_f={t_f}, dt={dt})")
    if output_stride < 1:
        raise DomainError(f"output_stride must be >= 1, got {output_stride}")

    t0 = initial.time
    n_steps = max(1, int(round((t_f - t0) / dt)))
    if abs(n_steps * dt - (t_f - t0)) > STEP_TOLERANCE * max(1.0, t_f - t0):
        raise DomainError(f"t_f - t0 = {t_f - t0} is not a whole number of steps of dt = {dt}")
    checkpoints = set(_checkpoint_steps(n_steps, n_checkpoints))
    spins, amplitudes, displacements = stacked_components(initial)
    m = initial.multiplicity

    times: List[float] = []
    observables: List[ObservableSet] = []
    cavity: List[float] = []
    sigma2: List[float] = []
    snapshots: List[PhotonSnapshot] = []
    sigma2_max = 0.0
    state = initial

    logger.info(
        f"Propagating multi-D1 state: M={m}, Nb={initial.n_bath}, "
        f"t=[{t0}, {t_f}], dt={dt}, steps={n_steps}"
    )

    def partial_record(failure: str) -> TrajectoryRecord:
        return TrajectoryRecord(
            times=times,
            observables=observables,
            cavity_photons=cavity,
            photon_numbers=snapshots,
            sigma2=sigma2,
            sigma2_max=sigma2_max,
            final_state=state,
            completed=False,
            failure=failure,
        )

    for step in range(n_steps + 1):
        t = t0 + step * dt
        state = state_from_components(m, amplitudes, displacements, t)
        try:
            first = _eom_arrays(spins, amplitudes, displacements, params, bath, eps)
            value = _sigma2_value(state, first.tangent_norm_sq, first.tangent_energy, params, bath)
            sigma2_max = max(sigma2_max, value)

            if step % output_stride == 0 or step == n_steps:
                occupations = photon_numbers(state)
                times.append(t)
                observables.append(qubit_observables(state, params, bath))
                cavity.append(float(occupations[0]))
                sigma2.append(value)
                if step in checkpoints:
                    snapshots.append(PhotonSnapshot(time=t, values=occupations))
            elif step in checkpoints:
                snapshots.append(PhotonSnapshot(time=t, values=photon_numbers(state)))

            if step == n_steps:
                break
            amplitudes, displacements = _rk4_arrays(
                spins, amplitudes, displacements, first, dt, params, bath, eps
            )
        except (EomSolveError, ConsistencyError) as exc:
            message = f"propagation failed at t={t:.4f}: {exc}"
            logger.error(message)
            raise PropagationError(message, partial_record(message)) from exc

    stationarity = _stationarity(snapshots, t_f, t0)
    if stationarity is not None and stationarity > STATIONARITY_TOLERANCE:
        logger.warning(
            f"Emission spectrum still changing over the last 10% of the run "
            f"(relative change {stationarity:.3f})"
        )
    if sigma2_max >= ACCURACY_GATE:
        logger.warning(f"Accuracy gate violated: max sigma^2 = {sigma2_max:.4g}")
    logger.info(f"Propagation finished: max sigma^2 = {sigma2_max:.4g}")

    return TrajectoryRecord(
        times=times,
        observables=observables,
        cavity_photons=cavity,
        photon_numbers=snapshots,
        sigma2=sigma2,
        sigma2_max=sigma2_max,
        final_state=state,
        stationarity=stationarity,
    )


def conservation_drifts(record: TrajectoryRecord) -> Dict[str, float]:
    """Largest departures of norm, energy and parity from their initial values"""
    if not record.observables:
        return {"norm": 0.0, "energy": 0.0, "parity": 0.0}
    first = record.observables[0]
    return {
        "norm": max(abs(o.norm - first.norm) for o in record.observables),
        "energy": max(abs(o.energy - first.energy) for o in record.observables),
        "parity": max(abs(o.parity - first.parity) for o in record.observables),
    }


def is_accepted(record: TrajectoryRecord) -> bool:
    """A completed run below the accuracy gate whose conserved quantities stay within tolerance"""
    if not record.completed or record.sigma2_max >= ACCURACY_GATE:
        return False
    drifts = conservation_drifts(record)
    violated = [name for name, bound in CONSERVATION_TOLERANCES.items() if drifts[name] >= bound]
    if violated:
        logger.warning(f"Conservation drift out of tolerance: {', '.join(violated)}")
        return False
    return True


def dt_halving_check(
    initial: MultiD1State,
    params: ModelParams,
    bath: DiscretizedBath,
    t_f: float,
    dt: float,
    eps: float = 1e-8,
    output_stride: int = 10,
) -> float:
    """Largest difference in <sigma_z> and cavity photons between dt and dt/2 runs"""
    coarse = propagate(initial, params, bath, t_f, dt, output_stride, eps, n_checkpoints=0)
    fine = propagate(initial, params, bath, t_f, 0.5 * dt, 2 * output_stride, eps, n_checkpoints=0)
    n = min(len(coarse.times), len(fine.times))
    sz_coarse = np.array([o.sigma_z for o in coarse.observables[:n]])
    sz_fine = np.array([o.sigma_z for o in fine.observables[:n]])
    difference = max(
        float(np.max(np.abs(sz_coarse - sz_fine))),
        float(np.max(np.abs(coarse.cavity_photons[:n] - fine.cavity_photons[:n]))),
    )
    logger.info(f"dt halving check: max difference {difference:.3e}")
    return difference
