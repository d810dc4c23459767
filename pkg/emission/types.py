"""
Emission Types and Models

Contains the Pydantic models and enums used throughout the emission package:
physical parameters, the discretized reservoir, the multi-D1 variational state,
observables, trajectory records, spectra and run configuration.

All energies are in units of the bare qubit frequency and times in its inverse.
"""

from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigurationError


def _frozen_array(value: Any, dtype) -> np.ndarray:
    """Copy into a read-only array of the given dtype"""
    array = np.array(value, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


class Method(str, Enum):
    """Spectrum method enumeration"""

    MULTID1 = "multid1"
    TRWA = "trwa"
    RWA = "rwa"


class GridKind(str, Enum):
    """Frequency grid used for analytic spectra"""

    UNIFORM = "uniform"
    BATH = "bath"


class ModelParams(BaseModel):
    """Physical constants of the qubit-cavity-reservoir Hamiltonian"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    omega0: float = Field(default=1.0, gt=0.0)
    omega_c: float = Field(default=1.0, gt=0.0)
    lambda_c: float = Field(default=0.0, ge=0.0)
    alpha: float = Field(default=0.1, ge=0.0)
    omega_cut: float = Field(default=5.0, gt=0.0)


class DiscretizedBath(BaseModel):
    """Reservoir modes from the logarithmic discretization of the Ohmic density"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    n_modes: int = Field(gt=0)
    omega_max: float = Field(gt=0.0)
    frequencies: np.ndarray
    couplings: np.ndarray

    @field_validator("frequencies", "couplings", mode="before")
    @classmethod
    def _to_real_array(cls, value):
        return _frozen_array(value, float)

    @model_validator(mode="after")
    def _check_modes(self):
        if self.frequencies.shape != (self.n_modes,) or self.couplings.shape != (self.n_modes,):
            raise ValueError("frequencies and couplings must both have n_modes entries")
        if self.frequencies[0] <= 0.0 or np.any(np.diff(self.frequencies) <= 0.0):
            raise ValueError("bath frequencies must be positive and strictly increasing")
        if self.frequencies[-1] > self.omega_max * (1.0 + 1e-12):
            raise ValueError("bath frequencies exceed omega_max")
        if np.any(self.couplings < 0.0):
            raise ValueError("bath couplings must be nonnegative")
        return self


class MultiD1State(BaseModel):
    """Multi-D1 trial state: M qubit-sigma_x eigenstates dressed by multimode coherent states

    Mode index 0 is the cavity, indices 1..Nb the reservoir modes.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    multiplicity: int = Field(gt=0)
    amplitudes_plus: np.ndarray
    amplitudes_minus: np.ndarray
    displacements_plus: np.ndarray
    displacements_minus: np.ndarray
    time: float = 0.0

    @field_validator(
        "amplitudes_plus",
        "amplitudes_minus",
        "displacements_plus",
        "displacements_minus",
        mode="before",
    )
    @classmethod
    def _to_complex_array(cls, value):
        return _frozen_array(value, complex)

    @model_validator(mode="after")
    def _check_shapes(self):
        m = self.multiplicity
        if self.amplitudes_plus.shape != (m,) or self.amplitudes_minus.shape != (m,):
            raise ValueError("amplitude sequences must have length M")
        if self.displacements_plus.ndim != 2 or self.displacements_plus.shape[0] != m:
            raise ValueError("displacements must be an M x (1 + Nb) matrix")
        if self.displacements_minus.shape != self.displacements_plus.shape:
            raise ValueError("plus and minus displacements must share a shape")
        return self

    @property
    def n_modes(self) -> int:
        """Number of bosonic modes including the cavity"""
        return self.displacements_plus.shape[1]

    @property
    def n_bath(self) -> int:
        return self.n_modes - 1


class ParameterDerivative(BaseModel):
    """Time derivatives of the variational parameters, shaped like a MultiD1State"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    amplitudes_plus: np.ndarray
    amplitudes_minus: np.ndarray
    displacements_plus: np.ndarray
    displacements_minus: np.ndarray

    @field_validator("*", mode="before")
    @classmethod
    def _to_complex_array(cls, value):
        return _frozen_array(value, complex)


class ObservableSet(BaseModel):
    """Qubit observables and global diagnostics at one time"""

    model_config = ConfigDict(frozen=True)

    sigma_x: float
    sigma_y: float
    sigma_z: float
    excited_population: float
    norm: float
    energy: float
    parity: float


class EomSolveReport(BaseModel):
    """Solution of the regularized Dirac-Frenkel linear system"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    derivative: ParameterDerivative
    gram_condition: float
    regularization_used: float = Field(ge=0.0)
    residual: float
    # <Ddot|Ddot> and Re(-i <Ddot|H|D>), both unnormalized
    tangent_norm_sq: float
    tangent_energy: float


class PhotonSnapshot(BaseModel):
    """Photon numbers of every mode (cavity first) at one time"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    time: float
    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def _to_real_array(cls, value):
        return _frozen_array(value, float)


class TrajectoryRecord(BaseModel):
    """Time series produced by a multi-D1 propagation"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    times: np.ndarray
    observables: List[ObservableSet]
    cavity_photons: np.ndarray
    photon_numbers: List[PhotonSnapshot]
    sigma2: np.ndarray
    sigma2_max: float
    final_state: MultiD1State
    completed: bool = True
    failure: Optional[str] = None
    stationarity: Optional[float] = None

    @field_validator("times", "cavity_photons", "sigma2", mode="before")
    @classmethod
    def _to_real_array(cls, value):
        return _frozen_array(value, float)

    @property
    def spectrum_snapshot(self) -> Optional[PhotonSnapshot]:
        """Last photon-number snapshot (the emission spectrum at the final time)"""
        return self.photon_numbers[-1] if self.photon_numbers else None


class TrwaQuantities(BaseModel):
    """Renormalized quantities of the transformed rotating-wave treatment"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    eta: float = Field(gt=0.0, le=1.0)
    lambda_tilde_c: float = Field(ge=0.0)
    shift: Callable[[float], float]
    rate: Callable[[float], float]


class SpectrumResult(BaseModel):
    """Emission spectrum N(omega) on a frequency grid"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    method: Method
    frequencies: np.ndarray
    values: np.ndarray
    metadata: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("frequencies", "values", mode="before")
    @classmethod
    def _to_real_array(cls, value):
        return _frozen_array(value, float)

    @model_validator(mode="after")
    def _check_grid(self):
        if self.frequencies.shape != self.values.shape:
            raise ValueError("frequencies and values must have the same length")
        if np.any(np.diff(self.frequencies) <= 0.0):
            raise ValueError("spectrum grid must be strictly increasing")
        if np.any(self.values < 0.0):
            raise ValueError("spectrum values must be nonnegative")
        return self


class PolaritonPoles(BaseModel):
    """Complex poles of the two polariton states (energy - i * half width)"""

    model_config = ConfigDict(frozen=True)

    lower: complex
    upper: complex

    @model_validator(mode="after")
    def _check_decaying(self):
        if self.lower.imag > 1e-12 or self.upper.imag > 1e-12:
            raise ValueError("polariton poles must lie in the lower half plane")
        return self

    @property
    def energies(self) -> Tuple[float, float]:
        return self.lower.real, self.upper.real

    @property
    def decay_rates(self) -> Tuple[float, float]:
        return -self.lower.imag, -self.upper.imag


class Peak(BaseModel):
    """A spectral peak found by the peak analysis"""

    model_config = ConfigDict(frozen=True)

    position: float
    height: float
    fwhm: Optional[float] = None


class PeakReport(BaseModel):
    """Peaks of one spectrum"""

    model_config = ConfigDict(frozen=True)

    method: Method
    label: str
    peaks: List[Peak]


# Run configuration ===========================================================


class BathConfig(BaseModel):
    """Reservoir discretization settings"""

    model_config = ConfigDict(extra="forbid")

    n_modes: int = Field(default=500, gt=0)
    omega_max: float = Field(default=20.0, gt=0.0)


class AnsatzConfig(BaseModel):
    """Multi-D1 ansatz settings"""

    model_config = ConfigDict(extra="forbid")

    multiplicity: int = Field(default=6, gt=0)
    noise_scale: float = Field(default=1.0, ge=0.0)
    seed: int = 0


class IntegratorConfig(BaseModel):
    """RK4 propagation settings"""

    model_config = ConfigDict(extra="forbid")

    dt: float = Field(default=0.01, gt=0.0)
    t_f: float = Field(default=300.0, gt=0.0)
    regularization: float = Field(default=1e-8, ge=0.0)
    output_every: float = Field(default=0.1, gt=0.0)
    n_checkpoints: int = Field(default=10, ge=0, le=10)


class SpectrumGridConfig(BaseModel):
    """Grid for analytic spectra and the peak analysis"""

    model_config = ConfigDict(extra="forbid")

    kind: GridKind = GridKind.UNIFORM
    n_points: int = Field(default=2000, gt=1)
    omega_max: float = Field(default=3.0, gt=0.0)
    peak_threshold: float = Field(default=0.05, gt=0.0, lt=1.0)


class OutputConfig(BaseModel):
    """Where artifacts go"""

    model_config = ConfigDict(extra="forbid")

    directory: str = "results"
    run_id: Optional[str] = None


class RunConfig(BaseModel):
    """Complete configuration of one run; defaults follow the reference setup"""

    model_config = ConfigDict(extra="forbid")

    model: ModelParams = Field(default_factory=ModelParams)
    bath: BathConfig = Field(default_factory=BathConfig)
    ansatz: AnsatzConfig = Field(default_factory=AnsatzConfig)
    integrator: IntegratorConfig = Field(default_factory=IntegratorConfig)
    spectrum: SpectrumGridConfig = Field(default_factory=SpectrumGridConfig)
    methods: List[Method] = Field(
        default_factory=lambda: [Method.MULTID1, Method.TRWA, Method.RWA]
    )
    output: OutputConfig = Field(default_factory=OutputConfig)

    @field_validator("methods")
    @classmethod
    def _unique_methods(cls, value: List[Method]) -> List[Method]:
        if not value:
            raise ValueError("at least one method is required")
        return list(dict.fromkeys(value))

    def with_updates(self, updates: Dict[str, Any]) -> "RunConfig":
        """Copy with dotted-key overrides such as {"integrator.dt": 0.005}"""
        data = self.model_dump(mode="json")
        for key, value in updates.items():
            *sections, leaf = key.split(".")
            target = data
            for section in sections:
                if not isinstance(target.get(section), dict):
                    raise ConfigurationError(f"unknown configuration section in {key!r}", [key])
                target = target[section]
            target[leaf] = value
        return validate_run_config(data)


def validation_fields(exc: ValidationError) -> List[str]:
    """Dotted field paths of a pydantic validation error"""
    return [".".join(str(part) for part in error["loc"]) for error in exc.errors()]


def validate_run_config(data: Dict[str, Any]) -> RunConfig:
    """RunConfig from plain data, raising ConfigurationError with dotted field paths"""
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        fields = validation_fields(exc)
        details = "; ".join(
            f"{field}: {error['msg']}" for field, error in zip(fields, exc.errors())
        )
        raise ConfigurationError(f"invalid configuration ({details})", fields) from exc


class MultiplicityOverride(BaseModel):
    """Multiplicity used at one sweep point"""

    model_config = ConfigDict(extra="forbid")

    lambda_c: float = Field(ge=0.0)
    alpha: float = Field(ge=0.0)
    multiplicity: int = Field(gt=0)


class SweepSpec(BaseModel):
    """Grid of (lambda_c, alpha) points with per-point multiplicities"""

    model_config = ConfigDict(extra="forbid")

    lambda_c_values: List[float] = Field(min_length=1)
    alpha_values: List[float] = Field(min_length=1)
    multiplicity_overrides: List[MultiplicityOverride] = Field(default_factory=list)

    @model_validator(mode="after")
    def _overrides_on_grid(self):
        for override in self.multiplicity_overrides:
            if not (
                _contains(self.lambda_c_values, override.lambda_c)
                and _contains(self.alpha_values, override.alpha)
            ):
                raise ValueError(
                    f"override ({override.lambda_c}, {override.alpha}) is not a sweep point"
                )
        return self

    def points(self) -> List[Tuple[float, float]]:
        """All (lambda_c, alpha) points, row-major in lambda_c"""
        return [(lc, a) for lc in self.lambda_c_values for a in self.alpha_values]

    def multiplicity_for(self, lambda_c: float, alpha: float) -> Optional[int]:
        for override in self.multiplicity_overrides:
            if np.isclose(override.lambda_c, lambda_c) and np.isclose(override.alpha, alpha):
                return override.multiplicity
        return None


def _contains(values: List[float], target: float) -> bool:
    return any(np.isclose(v, target) for v in values)


# Run outcomes ================================================================


class MethodOutcome(BaseModel):
    """Result of one method within a run"""

    method: Method
    status: str = "ok"
    artifacts: List[str] = Field(default_factory=list)
    sigma2_max: Optional[float] = None
    error: Optional[str] = None
    diagnostics: Dict[str, Any] = Field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "ok"


class RunOutcome(BaseModel):
    """Everything a run produced"""

    run_id: str
    output_dir: str
    methods: List[MethodOutcome]
    manifest: Optional[str] = None

    @property
    def ok(self) -> bool:
        return all(m.ok for m in self.methods)

    @property
    def exit_code(self) -> int:
        return 0 if self.ok else 2


class SweepPointResult(BaseModel):
    """Outcome of one (lambda_c, alpha) sweep point"""

    lambda_c: float
    alpha: float
    multiplicity: int
    sigma2_max: Optional[float] = None
    status: str = "ok"
    error: Optional[str] = None
