"""
Truncated-Fock Reference Solver

Exact treatment of the qubit-cavity-reservoir Hamiltonian for a handful of
modes on a truncated Fock space. Used as the reference for the multi-D1
expectation values and propagation on small instances.

Qubit basis: index 0 is the excited state |e>, index 1 the ground state |g>.
"""

import logging
from typing import List, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply
from scipy.special import gammaln

from .errors import DomainError
from .model import mode_arrays
from .types import DiscretizedBath, ModelParams, MultiD1State, ObservableSet

logger = logging.getLogger(__name__)

SIGMA_X = sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex))
SIGMA_Y = sp.csr_matrix(np.array([[0.0, -1j], [1j, 0.0]], dtype=complex))
SIGMA_Z = sp.csr_matrix(np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex))
# sigma_x eigenvectors in the (e, g) basis
SPIN_VECTORS = {
    1: np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0),
    -1: np.array([1.0, -1.0], dtype=complex) / np.sqrt(2.0),
}


def coherent_vector(z: complex, truncation: int) -> np.ndarray:
    """Fock amplitudes e^(-|z|^2/2) z^n / sqrt(n!) for n = 0..truncation"""
    n = np.arange(truncation + 1)
    if z == 0:
        vector = np.zeros(truncation + 1, dtype=complex)
        vector[0] = 1.0
        return vector
    log_magnitude = n * np.log(abs(z)) - 0.5 * gammaln(n + 1) - 0.5 * abs(z) ** 2
    return np.exp(log_magnitude + 1j * n * np.angle(z))


class FockModel:
    """Qubit plus cavity plus a few bath modes, each truncated at `truncation` photons"""

    def __init__(self, params: ModelParams, bath: DiscretizedBath, truncation: int = 10):
        if truncation < 1:
            raise DomainError(f"truncation must be >= 1, got {truncation}")
        self.params = params
        self.bath = bath
        self.truncation = truncation
        self.frequencies, self.couplings = mode_arrays(params, bath)
        self.n_modes = self.frequencies.shape[0]
        self.dimension = 2 * (truncation + 1) ** self.n_modes
        if self.dimension > 2_000_000:
            raise DomainError(f"Fock space of dimension {self.dimension} is too large")

        self._identity_boson = sp.identity(truncation + 1, dtype=complex, format="csr")
        annihilation = sp.diags(np.sqrt(np.arange(1, truncation + 1)), 1, dtype=complex, format="csr")
        self.annihilators = [self._embed(None, annihilation, j) for j in range(self.n_modes)]
        self.numbers = [a.getH() @ a for a in self.annihilators]
        self.sigma_x = self._embed(SIGMA_X)
        self.sigma_y = self._embed(SIGMA_Y)
        self.sigma_z = self._embed(SIGMA_Z)
        self.hamiltonian = self._build_hamiltonian()
        logger.debug(f"Fock model: {self.n_modes} modes, dimension {self.dimension}")

    def _embed(self, qubit_op, boson_op=None, mode: int = -1):
        """Operator on the full space from a qubit factor and at most one boson factor"""
        factors = [qubit_op if qubit_op is not None else sp.identity(2, dtype=complex, format="csr")]
        for j in range(self.n_modes):
            factors.append(boson_op if j == mode else self._identity_boson)
        result = factors[0]
        for factor in factors[1:]:
            result = sp.kron(result, factor, format="csr")
        return result

    def _build_hamiltonian(self):
        p = self.params
        h = 0.5 * p.omega0 * self.sigma_z
        for w, n in zip(self.frequencies, self.numbers):
            h = h + w * n
        field = sp.csr_matrix((self.dimension, self.dimension), dtype=complex)
        for c, a in zip(self.couplings, self.annihilators):
            field = field + c * (a + a.getH())
        return (h + 0.5 * self.sigma_x @ field).tocsr()

    @property
    def parity(self):
        """sigma_z exp(i pi N)"""
        signs = np.array([1.0, -1.0])
        occupation = np.zeros(1)
        for _ in range(self.n_modes):
            occupation = np.add.outer(occupation, np.arange(self.truncation + 1)).ravel()
        diagonal = np.kron(signs, (-1.0) ** occupation)
        return sp.diags(diagonal.astype(complex), format="csr")

    def excited_vacuum(self) -> np.ndarray:
        """|e, 0, ..., 0>"""
        vector = np.zeros(self.dimension, dtype=complex)
        vector[0] = 1.0
        return vector

    def state_vector(self, state: MultiD1State) -> np.ndarray:
        """Fock-space expansion of a multi-D1 state (truncated coherent states)"""
        if state.n_modes != self.n_modes:
            raise DomainError(f"state has {state.n_modes} modes, model has {self.n_modes}")
        vector = np.zeros(self.dimension, dtype=complex)
        components = (
            (1, state.amplitudes_plus, state.displacements_plus),
            (-1, state.amplitudes_minus, state.displacements_minus),
        )
        for spin, amplitudes, displacements in components:
            for amplitude, row in zip(amplitudes, displacements):
                term = SPIN_VECTORS[spin] * amplitude
                for z in row:
                    term = np.kron(term, coherent_vector(z, self.truncation))
                vector += term
        return vector

    def expectation(self, vector: np.ndarray, operator) -> complex:
        """<v|O|v> / <v|v>"""
        return complex(np.vdot(vector, operator @ vector) / np.vdot(vector, vector))

    def photon_numbers(self, vector: np.ndarray) -> np.ndarray:
        return np.array([self.expectation(vector, n).real for n in self.numbers])

    def observables(self, vector: np.ndarray) -> ObservableSet:
        sigma_z = self.expectation(vector, self.sigma_z).real
        return ObservableSet(
            sigma_x=self.expectation(vector, self.sigma_x).real,
            sigma_y=self.expectation(vector, self.sigma_y).real,
            sigma_z=sigma_z,
            excited_population=0.5 * (1.0 + sigma_z),
            norm=float(np.vdot(vector, vector).real),
            energy=self.expectation(vector, self.hamiltonian).real,
            parity=self.expectation(vector, self.parity).real,
        )

    def h_squared(self, vector: np.ndarray) -> float:
        hv = self.hamiltonian @ vector
        return float((np.vdot(hv, hv) / np.vdot(vector, vector)).real)

    def propagate(self, vector: np.ndarray, times: Sequence[float]) -> List[np.ndarray]:
        """Exact states at the given equally spaced times (times[0] is the start)"""
        times = np.asarray(times, dtype=float)
        if times.size == 1:
            return [vector.copy()]
        if not np.allclose(np.diff(times), times[1] - times[0]):
            raise DomainError("propagation times must be equally spaced")
        generator = -1j * self.hamiltonian
        states = expm_multiply(
            generator,
            vector,
            start=0.0,
            stop=times[-1] - times[0],
            num=times.size,
            endpoint=True,
        )
        return list(states)
