"""
Tests for the Dirac-Frenkel equations of motion and RK4 propagation
"""

import numpy as np
import pytest

from emission import dynamics
from emission.ansatz import initial_state, norm, qubit_observables, stacked_components
from emission.dynamics import (
    assemble_eom,
    conservation_drifts,
    deviation,
    dt_halving_check,
    is_accepted,
    norm_rate,
    propagate,
    step_rk4,
)
from emission.errors import DomainError, EomSolveError, PropagationError
from emission.fock import FockModel
from emission.model import discretize_bath
from emission.types import ModelParams, MultiD1State


def parameter_vector(state: MultiD1State) -> np.ndarray:
    _, amplitudes, displacements = stacked_components(state)
    return np.concatenate((amplitudes, displacements.ravel()))


def shifted_state(state: MultiD1State, report, h: float) -> MultiD1State:
    """State moved by h along the parameter derivatives of the report"""
    d = report.derivative
    return MultiD1State(
        multiplicity=state.multiplicity,
        amplitudes_plus=state.amplitudes_plus + h * d.amplitudes_plus,
        amplitudes_minus=state.amplitudes_minus + h * d.amplitudes_minus,
        displacements_plus=state.displacements_plus + h * d.displacements_plus,
        displacements_minus=state.displacements_minus + h * d.displacements_minus,
        time=state.time,
    )


@pytest.fixture
def free_params():
    return ModelParams(lambda_c=0.0, alpha=0.0)


@pytest.fixture
def free_bath(free_params):
    return discretize_bath(free_params, 3, 20.0)


@pytest.mark.unit
class TestAssembleEom:
    """Test the regularized linear system"""

    def test_free_qubit(self, free_params, free_bath):
        """Test an uncoupled qubit only picks up the sigma_z phase"""
        state = initial_state(1, free_bath)
        report = assemble_eom(state, free_params, free_bath)
        d = report.derivative
        # sigma_z flips the sigma_x components: dA/dt = -i (omega0 / 2) B
        assert d.amplitudes_plus[0] == pytest.approx(-0.5j * state.amplitudes_minus[0], abs=1e-7)
        assert d.amplitudes_minus[0] == pytest.approx(-0.5j * state.amplitudes_plus[0], abs=1e-7)
        np.testing.assert_allclose(d.displacements_plus, 0.0, atol=1e-15)
        np.testing.assert_allclose(d.displacements_minus, 0.0, atol=1e-15)

    def test_free_qubit_deviation(self, free_params, free_bath):
        """Test sigma^2 vanishes for exact dynamics"""
        state = initial_state(1, free_bath)
        report = assemble_eom(state, free_params, free_bath)
        assert deviation(state, report, free_params, free_bath) < 1e-12

    def test_report_diagnostics(self, model_params, tiny_bath, random_state):
        """Test condition number, regularization and residual are reported"""
        state = random_state(2, 3)
        report = assemble_eom(state, model_params, tiny_bath)
        assert report.gram_condition >= 1.0
        assert report.regularization_used > 0.0
        assert report.residual < 1e-8

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_norm_conserved(self, model_params, tiny_bath, random_state, seed):
        """Test the derivatives leave d<D|D>/dt = 0"""
        state = random_state(3, 3, seed=seed)
        report = assemble_eom(state, model_params, tiny_bath, regularization_eps=0.0)
        assert abs(norm_rate(state, report)) < 1e-9

    def test_tangent_matches_schrodinger(self, idle_bath):
        """Test the M = 1 tangent at |e, 0> reproduces -i H |D> exactly"""
        params = ModelParams(lambda_c=0.2, alpha=0.0)
        state = initial_state(1, idle_bath)
        report = assemble_eom(state, params, idle_bath)
        model = FockModel(params, idle_bath, truncation=6)

        h = 1e-5
        forward = model.state_vector(shifted_state(state, report, h))
        backward = model.state_vector(shifted_state(state, report, -h))
        tangent = (forward - backward) / (2.0 * h)
        exact = -1j * (model.hamiltonian @ model.state_vector(state))
        np.testing.assert_allclose(tangent, exact, atol=1e-6)
        assert deviation(state, report, params, idle_bath) < 1e-10

    def test_non_finite_state(self, model_params, tiny_bath, random_state):
        """Test a corrupted state is reported as a solve failure"""
        state = random_state(2, 3)
        broken = MultiD1State(
            multiplicity=2,
            amplitudes_plus=[np.nan, state.amplitudes_plus[1]],
            amplitudes_minus=state.amplitudes_minus,
            displacements_plus=state.displacements_plus,
            displacements_minus=state.displacements_minus,
        )
        with pytest.raises(EomSolveError):
            assemble_eom(broken, model_params, tiny_bath)

    def test_negative_regularization(self, model_params, tiny_bath, random_state):
        """Test eps must be nonnegative"""
        with pytest.raises(DomainError):
            assemble_eom(random_state(1, 3), model_params, tiny_bath, regularization_eps=-1.0)


@pytest.mark.unit
class TestStepRk4:
    """Test single RK4 steps"""

    def test_free_qubit_step(self, free_params, free_bath):
        """Test observables of the uncoupled qubit are unchanged"""
        state = initial_state(1, free_bath)
        after = step_rk4(state, 0.05, free_params, free_bath)
        assert after.time == pytest.approx(0.05)
        before_obs = qubit_observables(state)
        after_obs = qubit_observables(after)
        assert after_obs.sigma_z == pytest.approx(before_obs.sigma_z, abs=1e-12)
        assert norm(after) == pytest.approx(1.0, abs=1e-12)

    def test_invalid_dt(self, free_params, free_bath):
        """Test dt must be positive"""
        with pytest.raises(DomainError):
            step_rk4(initial_state(1, free_bath), 0.0, free_params, free_bath)

    def test_fourth_order_convergence(self, idle_bath):
        """Test halving dt reduces the error by about 2^4 on the single-component Rabi problem"""
        params = ModelParams(lambda_c=0.2, alpha=0.0)
        start = initial_state(1, idle_bath)

        def final(dt):
            state = start
            for _ in range(int(round(2.0 / dt))):
                state = step_rk4(state, dt, params, idle_bath)
            return parameter_vector(state)

        coarse, medium, fine = final(0.1), final(0.05), final(0.025)
        ratio = np.linalg.norm(coarse - medium) / np.linalg.norm(medium - fine)
        assert 8.0 < ratio < 32.0

    def test_norm_drift(self, idle_bath):
        """Test the norm stays constant over many steps"""
        params = ModelParams(lambda_c=0.2, alpha=0.0)
        state = initial_state(1, idle_bath)
        for _ in range(100):
            state = step_rk4(state, 0.01, params, idle_bath)
        assert norm(state) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.unit
class TestPropagate:
    """Test trajectory recording"""

    def test_uncoupled_qubit_stays_excited(self, free_params, free_bath):
        """Test lambda_c = alpha = 0 keeps the excited population at 1 and emits nothing"""
        record = propagate(initial_state(1, free_bath), free_params, free_bath, 2.0, 0.05, output_stride=4)
        assert record.completed
        for observables in record.observables:
            assert observables.excited_population == pytest.approx(1.0, abs=1e-6)
        np.testing.assert_allclose(record.cavity_photons, 0.0, atol=1e-12)
        np.testing.assert_allclose(record.spectrum_snapshot.values, 0.0, atol=1e-12)
        assert record.sigma2_max < 1e-10

    def test_record_layout(self, model_params, tiny_bath):
        """Test output times, checkpoints and the final snapshot"""
        record = propagate(
            initial_state(2, tiny_bath), model_params, tiny_bath, 1.0, 0.05, output_stride=5, n_checkpoints=2
        )
        np.testing.assert_allclose(record.times, [0.0, 0.25, 0.5, 0.75, 1.0])
        assert len(record.observables) == len(record.times)
        assert len(record.sigma2) == len(record.times)
        assert [s.time for s in record.photon_numbers] == pytest.approx([0.5, 0.9, 1.0])
        assert record.spectrum_snapshot.time == pytest.approx(1.0)
        assert record.spectrum_snapshot.values.shape == (3,)
        assert record.final_state.time == pytest.approx(1.0)
        assert np.all(record.sigma2 >= 0.0)
        assert record.sigma2_max >= float(np.max(record.sigma2))

    def test_conservation(self, model_params, tiny_bath):
        """Test norm, energy and parity drifts stay small"""
        record = propagate(initial_state(2, tiny_bath), model_params, tiny_bath, 2.0, 0.01, output_stride=20)
        drifts = conservation_drifts(record)
        assert drifts["norm"] < 1e-6
        assert drifts["energy"] < 1e-6
        assert drifts["parity"] < 1e-8
        assert set(drifts) == {"norm", "energy", "parity"}

    def test_parity_stays_even(self, model_params, tiny_bath):
        """Test the noisy redundant components never leave the even parity sector"""
        record = propagate(
            initial_state(4, tiny_bath, noise_scale=100.0, seed=3), model_params, tiny_bath, 3.0, 0.01, output_stride=25
        )
        for observables in record.observables:
            assert observables.parity == pytest.approx(1.0, abs=1e-6)
        final = record.final_state
        np.testing.assert_allclose(final.amplitudes_minus, final.amplitudes_plus, atol=1e-6)
        np.testing.assert_allclose(final.displacements_minus, -final.displacements_plus, atol=1e-6)

    def test_invalid_arguments(self, model_params, tiny_bath):
        """Test t_f, dt and the output stride are validated"""
        state = initial_state(1, tiny_bath)
        with pytest.raises(DomainError):
            propagate(state, model_params, tiny_bath, 0.0, 0.01)
        with pytest.raises(DomainError):
            propagate(state, model_params, tiny_bath, 1.0, -0.01)
        with pytest.raises(DomainError):
            propagate(state, model_params, tiny_bath, 1.0, 0.01, output_stride=0)

    def test_fractional_step_count_rejected(self, model_params, tiny_bath):
        """Test t_f must be reached in a whole number of steps"""
        state = initial_state(1, tiny_bath)
        with pytest.raises(DomainError, match="whole number of steps"):
            propagate(state, model_params, tiny_bath, 1.0, 0.3)
        record = propagate(state, model_params, tiny_bath, 1.0, 0.1)
        assert record.final_state.time == pytest.approx(1.0)

    def test_restart_continues_time(self, model_params, tiny_bath):
        """Test propagation resumes from the snapshot time"""
        first = propagate(initial_state(1, tiny_bath), model_params, tiny_bath, 0.5, 0.05, output_stride=5)
        second = propagate(first.final_state, model_params, tiny_bath, 1.0, 0.05, output_stride=5)
        assert second.times[0] == pytest.approx(0.5)
        assert second.times[-1] == pytest.approx(1.0)

    def test_failure_keeps_partial_record(self, model_params, tiny_bath, mocker):
        """Test a solver failure raises with the trajectory recorded so far"""
        real = dynamics._eom_arrays
        calls = {"n": 0}

        def failing(*args, **kwargs):
            calls["n"] += 1
            if calls["n"] > 20:
                raise EomSolveError("singular")
            return real(*args, **kwargs)

        mocker.patch.object(dynamics, "_eom_arrays", side_effect=failing)
        with pytest.raises(PropagationError) as exc_info:
            propagate(initial_state(1, tiny_bath), model_params, tiny_bath, 1.0, 0.05, output_stride=1)

        partial = exc_info.value.partial
        assert partial is not None
        assert not partial.completed
        assert "singular" in partial.failure
        assert 0 < len(partial.times) < 21
        assert not is_accepted(partial)

    def test_accuracy_gate(self, model_params, tiny_bath):
        """Test a short accurate run is accepted"""
        record = propagate(initial_state(1, tiny_bath), model_params, tiny_bath, 0.5, 0.05)
        assert record.sigma2_max < dynamics.ACCURACY_GATE
        assert is_accepted(record)

    @pytest.mark.parametrize("quantity", ["norm", "energy", "parity"])
    def test_conservation_drift_rejected(self, model_params, tiny_bath, mocker, quantity):
        """Test a drift beyond its tolerance rejects an otherwise accurate run"""
        record = propagate(initial_state(1, tiny_bath), model_params, tiny_bath, 0.5, 0.05)
        drifts = {"norm": 0.0, "energy": 0.0, "parity": 0.0}
        drifts[quantity] = 2.0 * dynamics.CONSERVATION_TOLERANCES[quantity]
        mocker.patch.object(dynamics, "conservation_drifts", return_value=drifts)
        assert not is_accepted(record)

    def test_broken_parity_rejected(self, model_params, tiny_bath):
        """Test a trajectory whose recorded parity wanders is not accepted"""
        record = propagate(initial_state(1, tiny_bath), model_params, tiny_bath, 0.5, 0.05)
        observables = list(record.observables)
        observables[-1] = observables[-1].model_copy(update={"parity": 0.99})
        assert not is_accepted(record.model_copy(update={"observables": observables}))

    def test_dt_halving(self, idle_bath):
        """Test dt and dt/2 trajectories agree"""
        params = ModelParams(lambda_c=0.2, alpha=0.0)
        difference = dt_halving_check(initial_state(1, idle_bath), params, idle_bath, 2.0, 0.02, output_stride=10)
        assert difference < 1e-6


@pytest.mark.slow
class TestAgainstFockPropagation:
    """Test multi-D1 propagation against the exact truncated-Fock evolution"""

    def test_three_mode_dynamics(self, tiny_bath):
        """Test sigma_z, cavity photons and norm over t in [0, 20] with M = 6"""
        params = ModelParams(lambda_c=0.2, alpha=0.05)
        record = propagate(initial_state(6, tiny_bath, seed=1), params, tiny_bath, 20.0, 0.005, output_stride=200)

        model = FockModel(params, tiny_bath, truncation=6)
        exact = model.propagate(model.excited_vacuum(), record.times)
        for observables, cavity, vector in zip(record.observables, record.cavity_photons, exact):
            reference = model.observables(vector)
            assert observables.sigma_z == pytest.approx(reference.sigma_z, abs=1e-3)
            assert cavity == pytest.approx(model.photon_numbers(vector)[0], abs=1e-3)
            assert observables.norm == pytest.approx(1.0, abs=1e-3)

    def test_larger_multiplicity_is_more_accurate(self):
        """Test max sigma^2 does not grow from M = 3 to M = 6"""
        params = ModelParams(lambda_c=0.0, alpha=0.1)
        bath = discretize_bath(params, 50, 20.0)
        small = propagate(initial_state(3, bath), params, bath, 30.0, 0.01, output_stride=100)
        large = propagate(initial_state(6, bath), params, bath, 30.0, 0.01, output_stride=100)
        assert large.sigma2_max <= small.sigma2_max


@pytest.mark.slow
class TestSeedIndependence:
    """Test the converged dynamics do not depend on the noise in the redundant components"""

    def test_two_seeds_agree(self):
        """Test M = 6 observables from two seeds agree at t = 50"""
        params = ModelParams(lambda_c=0.1, alpha=0.05)
        bath = discretize_bath(params, 16, 20.0)
        records = [
            propagate(initial_state(6, bath, seed=seed), params, bath, 50.0, 0.01, output_stride=1000)
            for seed in (0, 1)
        ]
        first, second = (r.observables[-1] for r in records)
        assert records[0].times[-1] == pytest.approx(50.0)
        for name in ("sigma_x", "sigma_y", "sigma_z", "energy"):
            assert getattr(first, name) == pytest.approx(getattr(second, name), abs=1e-4)
        assert records[0].cavity_photons[-1] == pytest.approx(records[1].cavity_photons[-1], abs=1e-4)
        np.testing.assert_allclose(
            records[0].spectrum_snapshot.values, records[1].spectrum_snapshot.values, atol=1e-4
        )
