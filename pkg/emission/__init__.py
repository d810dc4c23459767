"""
Emission Package

Spontaneous emission of a qubit coupled to a cavity mode and an Ohmic
reservoir: multi-D1 variational dynamics, TRWA and RWA analytic spectra,
a truncated-Fock reference solver and the run/sweep orchestration.
"""

from .types import (
    Method,
    GridKind,
    ModelParams,
    DiscretizedBath,
    MultiD1State,
    ParameterDerivative,
    ObservableSet,
    EomSolveReport,
    TrajectoryRecord,
    TrwaQuantities,
    SpectrumResult,
    PolaritonPoles,
    Peak,
    PeakReport,
    RunConfig,
    SweepSpec,
    RunOutcome,
    SweepPointResult,
)

from .errors import (
    EmissionError,
    ConfigurationError,
    DomainError,
    ConsistencyError,
    ConvergenceError,
    EomSolveError,
    PropagationError,
)

from .model import spectral_density, discretize_bath
from .ansatz import (
    initial_state,
    coherent_overlap,
    norm,
    photon_number,
    photon_numbers,
    qubit_observables,
    energy,
    h_squared,
)
from .dynamics import assemble_eom, step_rk4, deviation, propagate, dt_halving_check
from .analytic import (
    solve_eta,
    trwa_shift,
    trwa_rate,
    rwa_shift,
    rwa_rate,
    trwa_spectrum,
    rwa_spectrum,
    polariton_poles,
)
from .peaks import compare, find_peaks
from .runner import EmissionRunner, sweep, table1, figures

__all__ = [
    # Types
    'Method',
    'GridKind',
    'ModelParams',
    'DiscretizedBath',
    'MultiD1State',
    'ParameterDerivative',
    'ObservableSet',
    'EomSolveReport',
    'TrajectoryRecord',
    'TrwaQuantities',
    'SpectrumResult',
    'PolaritonPoles',
    'Peak',
    'PeakReport',
    'RunConfig',
    'SweepSpec',
    'RunOutcome',
    'SweepPointResult',

    # Errors
    'EmissionError',
    'ConfigurationError',
    'DomainError',
    'ConsistencyError',
    'ConvergenceError',
    'EomSolveError',
    'PropagationError',

    # Reservoir and ansatz
    'spectral_density',
    'discretize_bath',
    'initial_state',
    'coherent_overlap',
    'norm',
    'photon_number',
    'photon_numbers',
    'qubit_observables',
    'energy',
    'h_squared',

    # Dynamics
    'assemble_eom',
    'step_rk4',
    'deviation',
    'propagate',
    'dt_halving_check',

    # Analytic spectra
    'solve_eta',
    'trwa_shift',
    'trwa_rate',
    'rwa_shift',
    'rwa_rate',
    'trwa_spectrum',
    'rwa_spectrum',
    'polariton_poles',

    # Analysis and orchestration
    'compare',
    'find_peaks',
    'EmissionRunner',
    'sweep',
    'table1',
    'figures',
]
