"""
Analytic Spectra

Transformed rotating-wave (TRWA) and rotating-wave (RWA) emission spectra for
the qubit-cavity-reservoir model with an Ohmic exponential-cutoff reservoir:

- the self-consistent renormalization parameter eta
- principal-value level shifts and decay rates, with closed forms in terms of
  exponential integrals as an independent check
- spectra on a continuum grid or on the discretized bath
- Markovian polariton poles
"""

import logging
import math
from typing import Any, Callable, Dict, Optional, Union

import numpy as np
from scipy import integrate, optimize, special

from .errors import ConvergenceError, DomainError
from .model import spectral_density
from .types import DiscretizedBath, Method, ModelParams, PolaritonPoles, SpectrumResult, TrwaQuantities

logger = logging.getLogger(__name__)

ETA_TOLERANCE = 1e-10
ETA_DAMPING = 0.5
ETA_MAX_ITERATIONS = 500
ETA_FLOOR = 1e-12
# PV integrals are split at max(8 omega_cut, 2 omega); the tail is integrated separately
PV_CUTOFF_MULTIPLE = 8.0
QUAD_OPTIONS = {"epsabs": 0.0, "epsrel": 1e-10, "limit": 400}

Grid = Union[np.ndarray, DiscretizedBath]


# Renormalization parameter ===================================================


def reservoir_integral(eta: float, params: ModelParams) -> float:
    """Integral of J(x) / (x + eta omega0)^2 over [0, inf) by adaptive quadrature"""
    if params.alpha == 0.0:
        return 0.0
    shift = eta * params.omega0
    density = _ohmic(params)
    value, _ = integrate.quad(
        lambda x: density(x) / (x + shift) ** 2, 0.0, np.inf, **QUAD_OPTIONS
    )
    return value


def reservoir_integral_closed_form(eta: float, params: ModelParams) -> float:
    """2 alpha [(1 + y) e^y E1(y) - 1] with y = eta omega0 / omega_cut"""
    y = eta * params.omega0 / params.omega_cut
    return 2.0 * params.alpha * ((1.0 + y) * np.exp(y) * special.exp1(y) - 1.0)


def eta_rhs(eta: float, params: ModelParams) -> float:
    """Right-hand side of the self-consistency condition eta = rhs(eta)"""
    cavity = (params.lambda_c / (params.omega_c + eta * params.omega0)) ** 2
    return float(np.exp(-0.5 * cavity - 0.5 * reservoir_integral(eta, params)))


def solve_eta(params: ModelParams) -> float:
    """Self-consistent eta in (0, 1]: damped fixed point, bracketed root as fallback"""
    eta = 1.0
    residual = float("inf")
    for iteration in range(ETA_MAX_ITERATIONS):
        target = eta_rhs(eta, params)
        residual = abs(eta - target)
        if residual < ETA_TOLERANCE:
            logger.debug(f"eta converged to {eta:.12f} after {iteration} iterations")
            return eta
        eta = (1.0 - ETA_DAMPING) * eta + ETA_DAMPING * target

    logger.warning(f"Damped eta iteration stalled (residual {residual:.3e}); bracketing")

    def gap(x):
        return x - eta_rhs(x, params)

    low, high = ETA_FLOOR, 1.0
    if gap(low) * gap(high) > 0.0:
        raise ConvergenceError("eta residual has no sign change on (0, 1]", residual)
    root = optimize.brentq(gap, low, high, xtol=1e-14, rtol=1e-14, maxiter=200)
    residual = abs(gap(root))
    if residual >= ETA_TOLERANCE:
        raise ConvergenceError("eta bracketing did not reach tolerance", residual)
    return root


def eta_sign_changes(params: ModelParams, n_points: int = 2000) -> int:
    """Number of sign changes of eta - rhs(eta) on a dense scan of (0, 1]"""
    etas = np.geomspace(1e-6, 1.0, n_points)
    gaps = np.array([eta - eta_rhs(eta, params) for eta in etas])
    signs = np.sign(gaps)
    signs = signs[signs != 0.0]
    changes = int(np.count_nonzero(np.diff(signs)))
    if changes != 1 and not (params.lambda_c == 0.0 and params.alpha == 0.0):
        logger.warning(f"eta residual changes sign {changes} times for {params}")
    return changes


def renormalization_factor(omega, eta: float, params: ModelParams):
    """(eta omega0 / (eta omega0 + omega))^2 = (1 - xi)^2"""
    return (1.0 - displacement_parameter(omega, eta, params)) ** 2


def displacement_parameter(omega, eta: float, params: ModelParams):
    """xi_k = omega_k / (eta omega0 + omega_k), the polaron displacement of mode k"""
    omega = np.asarray(omega, dtype=float)
    return omega / (eta * params.omega0 + omega)


def renormalized_coupling(coupling, omega, eta: float, params: ModelParams):
    """lambda~ = eta omega0 lambda / (eta omega0 + omega) = (1 - xi) lambda"""
    return np.asarray(coupling, dtype=float) * (1.0 - displacement_parameter(omega, eta, params))


# Principal values ============================================================


def _check_positive(omega: float, what: str) -> None:
    if not omega > 0.0:
        raise DomainError(f"{what} requires omega > 0, got {omega}")


def principal_value(h: Callable[[float], float], omega: float, split: float) -> float:
    """P int_0^inf h(x) / (omega - x) dx by singularity subtraction

    The regular part [h(x) - h(omega)] / (omega - x) is integrated on [0, X]
    with X = max(split, 2 omega), the subtracted pole contributes
    h(omega) ln(omega / (X - omega)) and [X, inf) is integrated directly.
    """
    _check_positive(omega, "principal value")
    upper = max(split, 2.0 * omega)
    h_omega = h(omega)

    def regular(x):
        if x == omega:
            return 0.0
        return (h(x) - h_omega) / (omega - x)

    body, _ = integrate.quad(regular, 0.0, upper, points=[omega], **QUAD_OPTIONS)
    tail, _ = integrate.quad(lambda x: h(x) / (omega - x), upper, np.inf, **QUAD_OPTIONS)
    return body + h_omega * np.log(omega / (upper - omega)) + tail


def principal_value_symmetric(h: Callable[[float], float], omega: float) -> float:
    """Same integral with points omega -+ t paired, so no subtraction is needed"""
    _check_positive(omega, "principal value")
    paired, _ = integrate.quad(
        lambda t: (h(omega - t) - h(omega + t)) / t if t > 0.0 else 0.0,
        0.0,
        omega,
        **QUAD_OPTIONS,
    )
    tail, _ = integrate.quad(lambda x: h(x) / (omega - x), 2.0 * omega, np.inf, **QUAD_OPTIONS)
    return paired + tail


def _pv_split(params: ModelParams) -> float:
    return PV_CUTOFF_MULTIPLE * params.omega_cut


def _ohmic(params: ModelParams) -> Callable[[float], float]:
    """Scalar J(x) for quadrature integrands"""
    scale = 2.0 * params.alpha
    cut = params.omega_cut
    return lambda x: scale * x * math.exp(-x / cut)


def trwa_kernel(eta: float, params: ModelParams) -> Callable[[float], float]:
    """h(x) = (eta omega0 / (eta omega0 + x))^2 J(x)"""
    e = eta * params.omega0
    density = _ohmic(params)
    return lambda x: (e / (e + x)) ** 2 * density(x)


def rwa_kernel(params: ModelParams) -> Callable[[float], float]:
    """h(x) = J(x) / 4"""
    density = _ohmic(params)
    return lambda x: 0.25 * density(x)


def trwa_shift(omega: float, params: ModelParams, eta: float) -> float:
    """Delta~(omega) = P int (eta omega0 / (eta omega0 + x))^2 J(x) dx / (omega - x)"""
    _check_positive(omega, "trwa_shift")
    if params.alpha == 0.0:
        return 0.0
    return principal_value(trwa_kernel(eta, params), omega, _pv_split(params))


def trwa_rate(omega: float, params: ModelParams, eta: float) -> float:
    """Gamma~(omega) = pi (eta omega0 / (eta omega0 + omega))^2 J(omega)"""
    if omega < 0.0:
        raise DomainError(f"trwa_rate requires omega >= 0, got {omega}")
    return float(np.pi * renormalization_factor(omega, eta, params) * spectral_density(omega, params))


def rwa_shift(omega: float, params: ModelParams) -> float:
    """Delta(omega) = P int J(x) dx / 4 (omega - x)"""
    _check_positive(omega, "rwa_shift")
    if params.alpha == 0.0:
        return 0.0
    return principal_value(rwa_kernel(params), omega, _pv_split(params))


def rwa_rate(omega: float, params: ModelParams) -> float:
    """Gamma(omega) = pi J(omega) / 4"""
    if omega < 0.0:
        raise DomainError(f"rwa_rate requires omega >= 0, got {omega}")
    return float(0.25 * np.pi * spectral_density(omega, params))


def rwa_shift_closed_form(omega: float, params: ModelParams) -> float:
    """(alpha / 2) [omega e^(-omega/omega_cut) Ei(omega/omega_cut) - omega_cut]"""
    _check_positive(omega, "rwa_shift_closed_form")
    cut = params.omega_cut
    return 0.5 * params.alpha * (omega * np.exp(-omega / cut) * special.expi(omega / cut) - cut)


def trwa_shift_closed_form(omega: float, params: ModelParams, eta: float) -> float:
    """Delta~ from the partial-fraction decomposition of x / ((e + x)^2 (omega - x))"""
    _check_positive(omega, "trwa_shift_closed_form")
    e = eta * params.omega0
    p = 1.0 / params.omega_cut
    a = omega / (omega + e) ** 2
    c = -e / (omega + e)
    pole = np.exp(-p * omega) * special.expi(p * omega)
    screened = np.exp(p * e) * special.exp1(p * e)
    return 2.0 * params.alpha * e**2 * (a * pole + a * screened + c * (1.0 / e - p * screened))


def trwa_quantities(params: ModelParams, eta: Optional[float] = None) -> TrwaQuantities:
    """eta, lambda~_c and the shift/rate functions of the TRWA treatment"""
    if eta is None:
        eta = solve_eta(params)
    lambda_tilde_c = float(renormalized_coupling(params.lambda_c, params.omega_c, eta, params))
    return TrwaQuantities(
        eta=eta,
        lambda_tilde_c=lambda_tilde_c,
        shift=lambda omega: trwa_shift(omega, params, eta),
        rate=lambda omega: trwa_rate(omega, params, eta),
    )


# Spectra =====================================================================


def uniform_grid(n_points: int, omega_max: float) -> np.ndarray:
    """n_points equally spaced frequencies on (0, omega_max]"""
    if n_points < 2 or omega_max <= 0.0:
        raise DomainError(f"invalid grid: n_points={n_points}, omega_max={omega_max}")
    return np.linspace(omega_max / n_points, omega_max, n_points)


def _resolve_grid(grid: Grid, params: ModelParams):
    """Frequencies, squared couplings and measure description for a grid"""
    if isinstance(grid, DiscretizedBath):
        return grid.frequencies, grid.couplings**2, {"grid": "bath", "measure": "lambda_k^2"}
    frequencies = np.asarray(grid, dtype=float)
    if frequencies.ndim != 1 or frequencies.size == 0:
        raise DomainError("spectrum grid must be a non-empty 1-d sequence")
    if np.any(frequencies <= 0.0):
        raise DomainError("spectrum grid must lie in (0, omega_max]")
    if np.any(np.diff(frequencies) <= 0.0):
        raise DomainError("spectrum grid must be strictly increasing")
    weights = spectral_density(frequencies, params)
    return frequencies, np.atleast_1d(weights), {"grid": "continuum", "measure": "J(omega) d omega"}


def _resolvent_amplitude(
    omega: float,
    omega_c: float,
    qubit: float,
    shift: float,
    rate: float,
    cavity_sq: float,
    factor: float,
    offset: float,
    counter: float,
) -> complex:
    """Emission amplitude per unit bath coupling

    factor (omega - omega_c + offset) / ((omega - omega_c)(omega - qubit - shift + i rate) - cavity_sq) + counter
    """
    detuning = omega - qubit - shift + 1j * rate
    if cavity_sq == 0.0:
        return factor / detuning + counter
    return factor * (omega - omega_c + offset) / ((omega - omega_c) * detuning - cavity_sq) + counter


def _base_metadata(method: Method, params: ModelParams, grid_info: Dict[str, Any]) -> Dict[str, Any]:
    return {"method": method.value, "params": params.model_dump(), **grid_info}


def trwa_spectrum(
    grid: Grid,
    params: ModelParams,
    eta: Optional[float] = None,
    include_shift: bool = True,
) -> SpectrumResult:
    """TRWA steady-state emission spectrum on a continuum grid or on the discretized bath

    With include_shift=False the level shift is dropped (Delta~ = 0, eta = 1 in the
    qubit frequency) while the decay rate keeps the renormalization.
    """
    frequencies, weights, grid_info = _resolve_grid(grid, params)
    quantities = trwa_quantities(params, eta)
    eta = quantities.eta
    qubit = (eta if include_shift else 1.0) * params.omega0
    e = eta * params.omega0
    cavity_sq = quantities.lambda_tilde_c**2
    offset = cavity_sq / (2.0 * e)

    values = np.empty_like(frequencies)
    for i, omega in enumerate(frequencies):
        amplitude = _resolvent_amplitude(
            omega,
            params.omega_c,
            qubit,
            quantities.shift(omega) if include_shift else 0.0,
            quantities.rate(omega),
            cavity_sq,
            e / (e + omega),
            offset,
            1.0 / (2.0 * (omega + e)),
        )
        values[i] = weights[i] * abs(amplitude) ** 2

    metadata = _base_metadata(Method.TRWA, params, grid_info)
    metadata.update(eta=eta, lambda_tilde_c=quantities.lambda_tilde_c, include_shift=include_shift)
    logger.debug(f"TRWA spectrum on {frequencies.size} points (eta={eta:.6f})")
    return SpectrumResult(method=Method.TRWA, frequencies=frequencies, values=values, metadata=metadata)


def rwa_spectrum(
    grid: Grid,
    params: ModelParams,
    reduced: bool = False,
    include_shift: bool = True,
) -> SpectrumResult:
    """RWA steady-state emission spectrum

    reduced=True evaluates the TRWA expression with lambda~_j -> lambda_j / 2,
    eta -> 1 and the two small terms dropped; the native form is the
    Lorentzian-like expression, which is zero at omega = omega_c when the
    cavity is coupled.
    """
    frequencies, weights, grid_info = _resolve_grid(grid, params)
    cavity_sq = 0.25 * params.lambda_c**2
    values = np.empty_like(frequencies)
    for i, omega in enumerate(frequencies):
        shift = rwa_shift(omega, params) if include_shift else 0.0
        rate = rwa_rate(omega, params)
        if reduced:
            amplitude = _resolvent_amplitude(
                omega, params.omega_c, params.omega0, shift, rate, cavity_sq, 0.5, 0.0, 0.0
            )
            values[i] = weights[i] * abs(amplitude) ** 2
        elif cavity_sq > 0.0 and omega == params.omega_c:
            values[i] = 0.0
        else:
            cavity_term = cavity_sq / (omega - params.omega_c) if cavity_sq > 0.0 else 0.0
            detuning = omega - params.omega0 - shift - cavity_term
            values[i] = 0.25 * weights[i] / (detuning**2 + rate**2)

    metadata = _base_metadata(Method.RWA, params, grid_info)
    metadata.update(reduced=reduced, include_shift=include_shift)
    logger.debug(f"RWA spectrum on {frequencies.size} points (reduced={reduced})")
    return SpectrumResult(method=Method.RWA, frequencies=frequencies, values=values, metadata=metadata)


# Polariton poles =============================================================


def markovian_poles(
    omega_c: float, qubit: float, shift: float, rate: float, coupling: float
) -> PolaritonPoles:
    """Roots of (omega - omega_c)(omega - qubit - shift + i rate) - coupling^2 = 0"""
    q = qubit + shift - 1j * rate
    center = 0.5 * (omega_c + q)
    split = np.sqrt((0.5 * (omega_c - q)) ** 2 + coupling**2 + 0j)
    roots = sorted((center - split, center + split), key=lambda z: z.real)
    return PolaritonPoles(lower=complex(roots[0]), upper=complex(roots[1]))


def polariton_poles(params: ModelParams, eta: Optional[float] = None) -> PolaritonPoles:
    """Markovian polariton poles with Delta~ and Gamma~ frozen at omega_bar = eta omega0 + Delta~(eta omega0)"""
    if params.lambda_c <= 0.0:
        raise DomainError("polariton poles require a coupled cavity (lambda_c > 0)")
    quantities = trwa_quantities(params, eta)
    e = quantities.eta * params.omega0
    reference = e + quantities.shift(e)
    if reference <= 0.0:
        raise DomainError(f"renormalized qubit frequency is not positive: {reference}")
    poles = markovian_poles(
        params.omega_c,
        e,
        quantities.shift(reference),
        quantities.rate(reference),
        quantities.lambda_tilde_c,
    )
    logger.debug(f"Polariton poles: {poles.lower:.6f}, {poles.upper:.6f}")
    return poles
