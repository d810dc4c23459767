"""
Reservoir Model

Ohmic spectral density of the qubit-reservoir coupling and its nonuniform
discretization into a finite set of bath modes.
"""

import logging

import numpy as np

from .errors import DomainError
from .types import DiscretizedBath, ModelParams

logger = logging.getLogger(__name__)


def spectral_density(omega, params: ModelParams):
    """J(omega) = 2 alpha omega exp(-omega / omega_cut); accepts scalars or arrays"""
    omega_arr = np.asarray(omega, dtype=float)
    if np.any(omega_arr < 0.0):
        raise DomainError(f"spectral density requires omega >= 0, got {omega}")
    value = 2.0 * params.alpha * omega_arr * np.exp(-omega_arr / params.omega_cut)
    return float(value) if value.ndim == 0 else value


def reservoir_weight(omega_max: float, params: ModelParams) -> float:
    """Integral of J over [0, omega_max]"""
    x = omega_max / params.omega_cut
    return 2.0 * params.alpha * params.omega_cut**2 * (1.0 - np.exp(-x) * (1.0 + x))


def discretize_bath(params: ModelParams, n_modes: int, omega_max: float) -> DiscretizedBath:
    """Equal-weight logarithmic discretization of the Ohmic density on (0, omega_max]

    Mode k = 1..Nb sits at omega_k = -omega_cut ln[1 - (k/Nb)(1 - exp(-omega_max/omega_cut))]
    and couples with lambda_k^2 = 2 alpha omega_k omega_cut (1 - exp(-omega_max/omega_cut)) / Nb.
    """
    if n_modes < 1:
        raise DomainError(f"n_modes must be >= 1, got {n_modes}")
    if omega_max <= 0.0:
        raise DomainError(f"omega_max must be positive, got {omega_max}")

    cut = params.omega_cut
    weight = -np.expm1(-omega_max / cut)
    k = np.arange(1, n_modes + 1, dtype=float)
    frequencies = -cut * np.log1p(-(k / n_modes) * weight)
    # the last mode sits on omega_max up to rounding of the logarithm
    frequencies[-1] = omega_max
    couplings = np.sqrt(2.0 * params.alpha * frequencies * cut * weight / n_modes)

    logger.debug(
        f"Discretized Ohmic bath: Nb={n_modes}, omega_max={omega_max}, "
        f"sum lambda_k^2={np.sum(couplings**2):.6g}"
    )
    return DiscretizedBath(
        n_modes=n_modes,
        omega_max=omega_max,
        frequencies=frequencies,
        couplings=couplings,
    )


def mode_arrays(params: ModelParams, bath: DiscretizedBath):
    """Frequencies and couplings of all modes, cavity first"""
    frequencies = np.concatenate(([params.omega_c], bath.frequencies))
    couplings = np.concatenate(([params.lambda_c], bath.couplings))
    return frequencies, couplings
