"""
Multi-D1 Ansatz

Expectation values of the multi-D1 trial state

    |D> = sum_n A_n |+>|f_n> + B_n |->|g_n>

where |+-> are sigma_x eigenstates and |f_n>, |g_n> normalized multimode
coherent states (mode 0 is the cavity). Internally the state is handled as
K = 2M "components" (spin s_a = +-1, amplitude c_a, displacement row Z_a) so
that every matrix element reduces to coherent-state overlaps.
"""

import logging
from typing import Any, Dict, Optional, Tuple

import numpy as np

from .errors import ConsistencyError, DomainError
from .model import mode_arrays
from .types import DiscretizedBath, ModelParams, MultiD1State, ObservableSet

logger = logging.getLogger(__name__)

NEGATIVE_CLAMP = 1e-10
IMAGINARY_TOLERANCE = 1e-12
BLOCH_TOLERANCE = 1e-9


def coherent_overlap(d1, d2) -> complex:
    """<d1|d2> for normalized multimode coherent states"""
    d1 = np.asarray(d1, dtype=complex)
    d2 = np.asarray(d2, dtype=complex)
    if d1.shape != d2.shape:
        raise DomainError(f"displacement lengths differ: {d1.shape} vs {d2.shape}")
    exponent = np.sum(np.conj(d1) * d2 - 0.5 * np.abs(d1) ** 2 - 0.5 * np.abs(d2) ** 2)
    return complex(np.exp(exponent))


def overlap_matrix(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Matrix of normalized coherent-state overlaps <left_a|right_b>"""
    log_overlap = (
        np.conj(left) @ right.T
        - 0.5 * np.sum(np.abs(left) ** 2, axis=1)[:, None]
        - 0.5 * np.sum(np.abs(right) ** 2, axis=1)[None, :]
    )
    return np.exp(log_overlap)


def stacked_components(state: MultiD1State) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Spins, amplitudes and displacements of the 2M components (plus block first)"""
    m = state.multiplicity
    spins = np.concatenate((np.ones(m), -np.ones(m)))
    amplitudes = np.concatenate((state.amplitudes_plus, state.amplitudes_minus))
    displacements = np.vstack((state.displacements_plus, state.displacements_minus))
    return spins, amplitudes, displacements


def state_from_components(
    multiplicity: int, amplitudes: np.ndarray, displacements: np.ndarray, time: float
) -> MultiD1State:
    m = multiplicity
    return MultiD1State(
        multiplicity=m,
        amplitudes_plus=amplitudes[:m],
        amplitudes_minus=amplitudes[m:],
        displacements_plus=displacements[:m],
        displacements_minus=displacements[m:],
        time=time,
    )


def _real(value: complex, scale: float, what: str) -> float:
    if abs(value.imag) > IMAGINARY_TOLERANCE * max(scale, 1.0):
        raise ConsistencyError(f"{what} has imaginary part {value.imag:.3e}")
    return float(value.real)


def _clamp_nonnegative(value: float, what: str) -> float:
    if value < -NEGATIVE_CLAMP:
        raise ConsistencyError(f"{what} is negative beyond rounding: {value:.3e}")
    return max(value, 0.0)


def _weighted_gram(spins, amplitudes, displacements) -> np.ndarray:
    """c_a^* c_b <a|b> including the qubit overlap delta(s_a, s_b)"""
    same_spin = spins[:, None] == spins[None, :]
    overlaps = overlap_matrix(displacements, displacements) * same_spin
    return np.conj(amplitudes)[:, None] * overlaps * amplitudes[None, :]


def norm(state: MultiD1State) -> float:
    """<D|D>"""
    spins, amplitudes, displacements = stacked_components(state)
    weighted = _weighted_gram(spins, amplitudes, displacements)
    return _real(complex(weighted.sum()), float(np.abs(weighted).sum()), "norm")


def initial_state(
    multiplicity: int,
    bath: DiscretizedBath,
    noise_scale: float = 1.0,
    seed: int = 0,
) -> MultiD1State:
    """|e, 0_c, 0> with M - 1 redundant components seeded by small random noise

    The noise keeps parity +1 (B_n = A_n, g_n = -f_n), so the whole
    trajectory stays in the even sector.
    """
    if multiplicity < 1:
        raise DomainError(f"multiplicity must be >= 1, got {multiplicity}")

    n_modes = 1 + bath.n_modes
    rng = np.random.default_rng(seed)

    def disc(shape, radius):
        # uniform in the disc of the given radius
        r = radius * np.sqrt(rng.uniform(0.0, 1.0, size=shape))
        return r * np.exp(2j * np.pi * rng.uniform(0.0, 1.0, size=shape))

    amplitudes = np.zeros((2, multiplicity), dtype=complex)
    displacements = np.zeros((2, multiplicity, n_modes), dtype=complex)
    amplitudes[:, 0] = 1.0 / np.sqrt(2.0)
    if multiplicity > 1:
        amplitudes[0, 1:] = disc(multiplicity - 1, 1e-7 * noise_scale)
        displacements[0, 1:, :] = disc((multiplicity - 1, n_modes), 1e-4 * noise_scale)
    amplitudes[1] = amplitudes[0]
    displacements[1] = -displacements[0]

    state = MultiD1State(
        multiplicity=multiplicity,
        amplitudes_plus=amplitudes[0],
        amplitudes_minus=amplitudes[1],
        displacements_plus=displacements[0],
        displacements_minus=displacements[1],
    )
    scale = 1.0 / np.sqrt(norm(state))
    logger.debug(f"Initial multi-D1 state: M={multiplicity}, Nb={bath.n_modes}, seed={seed}")
    return MultiD1State(
        multiplicity=multiplicity,
        amplitudes_plus=amplitudes[0] * scale,
        amplitudes_minus=amplitudes[1] * scale,
        displacements_plus=displacements[0],
        displacements_minus=displacements[1],
    )


def photon_numbers(state: MultiD1State) -> np.ndarray:
    """<b_j^dag b_j> / <D|D> for every mode, cavity first"""
    spins, amplitudes, displacements = stacked_components(state)
    same_spin = spins[:, None] == spins[None, :]
    overlaps = overlap_matrix(displacements, displacements) * same_spin
    weighted = amplitudes[:, None] * displacements
    raw = np.sum(np.conj(weighted) * (overlaps @ weighted), axis=0)
    total = norm(state)
    scale = np.sum(np.abs(weighted) ** 2, axis=0) + 1.0
    values = np.empty(raw.shape[0])
    for j, value in enumerate(raw):
        values[j] = _clamp_nonnegative(
            _real(complex(value), float(scale[j]), f"photon number of mode {j}") / total,
            f"photon number of mode {j}",
        )
    return values


def photon_number(state: MultiD1State, mode_index: int) -> float:
    """Photon number of one mode (0 = cavity, 1..Nb = reservoir)"""
    if not 0 <= mode_index < state.n_modes:
        raise DomainError(f"mode index {mode_index} outside [0, {state.n_modes})")
    return float(photon_numbers(state)[mode_index])


def _spin_expectations(state: MultiD1State) -> Tuple[float, float, float, float, float]:
    """Unnormalized <sigma_x>, <sigma_y>, <sigma_z>, <parity> and the norm"""
    spins, amplitudes, displacements = stacked_components(state)
    overlaps = overlap_matrix(displacements, displacements)
    pair = np.conj(amplitudes)[:, None] * amplitudes[None, :]
    same_spin = spins[:, None] == spins[None, :]
    # sigma_z flips |+> <-> |->; sigma_y carries +-i between them
    flip = ~same_spin
    y_factor = 0.5j * (spins[:, None] - spins[None, :])

    weighted = pair * overlaps
    total = complex(np.sum(weighted[same_spin]))
    sx = complex(np.sum((weighted * spins[:, None])[same_spin]))
    sz = complex(np.sum(weighted[flip]))
    sy = complex(np.sum(weighted * y_factor))
    # exp(i pi n) |z> = |-z>
    parity = complex(np.sum((pair * overlap_matrix(displacements, -displacements))[flip]))
    scale = float(np.abs(pair).sum())
    return (
        _real(sx, scale, "<sigma_x>"),
        _real(sy, scale, "<sigma_y>"),
        _real(sz, scale, "<sigma_z>"),
        _real(parity, scale, "parity"),
        _real(total, scale, "norm"),
    )


def parity_expectation(state: MultiD1State) -> float:
    """<sigma_z exp(i pi sum_j b_j^dag b_j)>"""
    *_, parity, total = _spin_expectations(state)
    return parity / total


def qubit_observables(
    state: MultiD1State,
    params: Optional[ModelParams] = None,
    bath: Optional[DiscretizedBath] = None,
) -> ObservableSet:
    """Qubit Pauli expectations, norm, parity and (when the model is given) energy"""
    sx, sy, sz, parity, total = _spin_expectations(state)
    sigma_z = sz / total
    observables = ObservableSet(
        sigma_x=sx / total,
        sigma_y=sy / total,
        sigma_z=sigma_z,
        excited_population=0.5 * (1.0 + sigma_z),
        norm=total,
        energy=energy(state, params, bath) if params is not None and bath is not None else float("nan"),
        parity=parity / total,
    )
    bloch = observables.sigma_x**2 + observables.sigma_y**2 + observables.sigma_z**2
    if bloch > 1.0 + BLOCH_TOLERANCE:
        raise ConsistencyError(f"Bloch vector length squared {bloch:.12f} exceeds 1")
    return observables


# Hamiltonian matrix elements =================================================


class HamiltonianTerms:
    """Mode sums shared by <H> and <H^2> for every component pair (a, b)

    With u = Z_a^*, v = Z_b (normalized overlap S_ab factored out):
      b1  = sum_j w_j u_j v_j
      b2  = sum_j w_j^2 u_j v_j
      v1  = 1/2 sum_j c_j (u_j + v_j)
      cw  = 1/2 sum_j c_j w_j (u_j + v_j)
    """

    def __init__(self, displacements: np.ndarray, params: ModelParams, bath: DiscretizedBath):
        frequencies, couplings = mode_arrays(params, bath)
        if displacements.shape[1] != frequencies.shape[0]:
            raise DomainError(
                f"state has {displacements.shape[1]} modes, model has {frequencies.shape[0]}"
            )
        conj = np.conj(displacements)
        self.frequencies = frequencies
        self.couplings = couplings
        self.b1 = conj @ (frequencies[:, None] * displacements.T)
        self.b2 = conj @ ((frequencies**2)[:, None] * displacements.T)
        coupled = displacements @ couplings
        self.v1 = 0.5 * (np.conj(coupled)[:, None] + coupled[None, :])
        weighted = displacements @ (couplings * frequencies)
        self.cw = 0.5 * (np.conj(weighted)[:, None] + weighted[None, :])
        self.coupling_sq = float(np.sum(couplings**2))


def hamiltonian_brackets(spins: np.ndarray, terms: HamiltonianTerms, omega0: float) -> np.ndarray:
    """<a|H|b> / <Z_a|Z_b> for all component pairs"""
    same_spin = spins[:, None] == spins[None, :]
    diagonal = terms.b1 + spins[:, None] * terms.v1
    return np.where(same_spin, diagonal, 0.5 * omega0)


def h_squared_brackets(spins: np.ndarray, terms: HamiltonianTerms, omega0: float) -> np.ndarray:
    """<a|H^2|b> / <Z_a|Z_b> for all component pairs

    H^2 = w0^2/4 + w0 sigma_z B + sigma_x (VB + BV) + B^2 + V^2 with B the free
    boson energy and V the coupling field; the sigma_z V cross terms cancel.
    """
    same_spin = spins[:, None] == spins[None, :]
    boson = terms.b1**2 + terms.b2 + terms.v1**2 + 0.25 * terms.coupling_sq
    cross = 2.0 * terms.b1 * terms.v1 + terms.cw
    diagonal = 0.25 * omega0**2 + spins[:, None] * cross + boson
    return np.where(same_spin, diagonal, omega0 * terms.b1)


def _hamiltonian_expectation(state, params, bath, squared: bool) -> float:
    spins, amplitudes, displacements = stacked_components(state)
    terms = HamiltonianTerms(displacements, params, bath)
    brackets = (h_squared_brackets if squared else hamiltonian_brackets)(
        spins, terms, params.omega0
    )
    overlaps = overlap_matrix(displacements, displacements)
    pair = np.conj(amplitudes)[:, None] * overlaps * amplitudes[None, :]
    value = complex(np.sum(pair * brackets))
    scale = float(np.sum(np.abs(pair * brackets)))
    what = "<H^2>" if squared else "<H>"
    return _real(value, scale, what) / norm(state)


def energy(state: MultiD1State, params: ModelParams, bath: DiscretizedBath) -> float:
    """<H> / <D|D>"""
    return _hamiltonian_expectation(state, params, bath, squared=False)


def h_squared(state: MultiD1State, params: ModelParams, bath: DiscretizedBath) -> float:
    """<H^2> / <D|D>"""
    return _hamiltonian_expectation(state, params, bath, squared=True)


# Snapshots ===================================================================


def state_to_record(state: MultiD1State) -> Dict[str, Any]:
    """Self-describing record with complex numbers as [re, im] pairs"""

    def pairs(array: np.ndarray):
        return np.stack((array.real, array.imag), axis=-1).tolist()

    return {
        "format": "multi-d1-state",
        "version": 1,
        "multiplicity": state.multiplicity,
        "n_bath": state.n_bath,
        "time": state.time,
        "amplitudes_plus": pairs(state.amplitudes_plus),
        "amplitudes_minus": pairs(state.amplitudes_minus),
        "displacements_plus": pairs(state.displacements_plus),
        "displacements_minus": pairs(state.displacements_minus),
    }


def state_from_record(record: Dict[str, Any]) -> MultiD1State:
    if record.get("format") != "multi-d1-state":
        raise DomainError("record is not a multi-D1 state snapshot")

    def unpair(values):
        array = np.asarray(values, dtype=float)
        return array[..., 0] + 1j * array[..., 1]

    state = MultiD1State(
        multiplicity=record["multiplicity"],
        amplitudes_plus=unpair(record["amplitudes_plus"]),
        amplitudes_minus=unpair(record["amplitudes_minus"]),
        displacements_plus=unpair(record["displacements_plus"]),
        displacements_minus=unpair(record["displacements_minus"]),
        time=record["time"],
    )
    if state.n_bath != record["n_bath"]:
        raise DomainError(f"snapshot declares Nb={record['n_bath']} but holds {state.n_bath}")
    return state
