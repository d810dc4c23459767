"""
Tests for run orchestration, sweeps and presets
"""

import json
from pathlib import Path

import pandas as pd
import pytest

from emission import runner as runner_module
from emission.artifacts import load_state, read_spectrum, read_trajectory
from emission.errors import ConfigurationError, PropagationError
from emission.peaks import find_peaks, main_peaks
from emission.runner import (
    TABLE1_REFERENCE,
    EmissionRunner,
    figure_configs,
    scaled_config,
    sweep,
    table1_spec,
)
from emission.types import Method, RunConfig, SweepSpec, validate_run_config


@pytest.fixture
def small_config(small_config_data):
    return validate_run_config(small_config_data)


@pytest.mark.integration
class TestEmissionRunner:
    """Test single runs"""

    def test_analytic_run(self, small_config, temp_output_dir):
        """Test TRWA and RWA spectra plus the manifest"""
        outcome = EmissionRunner(small_config, Path(temp_output_dir)).run()

        assert outcome.ok
        assert outcome.exit_code == 0
        run_dir = Path(outcome.output_dir)
        assert run_dir.parent == Path(temp_output_dir)
        for name in ("spectrum_trwa.csv", "spectrum_rwa.csv", "manifest.json"):
            assert (run_dir / name).exists()
        assert not (run_dir / "trajectory.csv").exists()

        spectrum = read_spectrum(run_dir / "spectrum_trwa.csv")
        assert spectrum.method == Method.TRWA
        assert len(spectrum.values) == 200
        assert spectrum.metadata["run_id"] == outcome.run_id

        with open(run_dir / "manifest.json") as f:
            manifest = json.load(f)
        assert set(manifest["artifacts"]) == {"spectrum_trwa.csv", "spectrum_rwa.csv"}
        assert manifest["results"]["trwa"]["status"] == "ok"

    def test_run_id_from_config_hash(self, small_config, temp_output_dir):
        """Test identical configurations share a run directory"""
        first = EmissionRunner(small_config, Path(temp_output_dir))
        second = EmissionRunner(small_config, Path(temp_output_dir))
        assert first.run_id == second.run_id
        named = EmissionRunner(small_config.with_updates({"output.run_id": "demo"}), Path(temp_output_dir))
        assert named.output_dir == Path(temp_output_dir) / "demo"

    def test_bath_grid_spectrum(self, small_config, temp_output_dir):
        """Test analytic spectra on the discretized bath"""
        config = small_config.with_updates({"spectrum.kind": "bath", "methods": ["rwa"]})
        runner = EmissionRunner(config, Path(temp_output_dir))
        spectrum = runner.analytic_spectrum(Method.RWA)
        assert len(spectrum.values) == config.bath.n_modes

    def test_multid1_run(self, small_config, temp_output_dir):
        """Test the multi-D1 artifacts"""
        config = small_config.with_updates({"methods": ["multid1"]})
        outcome = EmissionRunner(config, Path(temp_output_dir)).run()

        assert outcome.ok
        method = outcome.methods[0]
        assert method.sigma2_max is not None
        assert set(method.diagnostics["drifts"]) == {"norm", "energy", "parity"}
        assert method.diagnostics["accepted"] is True
        run_dir = Path(outcome.output_dir)
        spectrum = read_spectrum(run_dir / "spectrum_multid1.csv")
        assert len(spectrum.values) == 3
        trajectory = read_trajectory(run_dir / "trajectory.csv")
        assert trajectory["t"].iloc[-1] == pytest.approx(0.5)
        assert (run_dir / "checkpoints.csv").exists()
        assert load_state(run_dir / "final_state.json").time == pytest.approx(0.5)

    def test_restart(self, small_config, temp_output_dir):
        """Test continuing from a saved state to a later t_f"""
        config = small_config.with_updates({"methods": ["multid1"], "output.run_id": "first"})
        first = EmissionRunner(config, Path(temp_output_dir)).run()
        snapshot = load_state(Path(first.output_dir) / "final_state.json")

        later = config.with_updates({"integrator.t_f": 1.0, "output.run_id": "second"})
        second = EmissionRunner(later, Path(temp_output_dir)).run(restart=snapshot)
        trajectory = read_trajectory(Path(second.output_dir) / "trajectory.csv")
        assert trajectory["t"].iloc[0] == pytest.approx(0.5)
        assert trajectory["t"].iloc[-1] == pytest.approx(1.0)

    def test_restart_bath_mismatch(self, small_config, temp_output_dir):
        """Test a snapshot with another bath size is rejected"""
        config = small_config.with_updates({"methods": ["multid1"], "output.run_id": "first"})
        first = EmissionRunner(config, Path(temp_output_dir)).run()
        snapshot = load_state(Path(first.output_dir) / "final_state.json")

        larger = config.with_updates({"bath.n_modes": 5, "output.run_id": "second"})
        with pytest.raises(ConfigurationError):
            EmissionRunner(larger, Path(temp_output_dir)).run(restart=snapshot)
        assert not (Path(temp_output_dir) / "second" / "manifest.json").exists()

    def test_method_failure_is_isolated(self, small_config, temp_output_dir, mocker):
        """Test a failing multi-D1 run still produces the analytic spectra"""
        config = small_config.with_updates({"methods": ["multid1", "rwa"]})
        mocker.patch.object(runner_module, "propagate", side_effect=PropagationError("diverged"))

        outcome = EmissionRunner(config, Path(temp_output_dir)).run()

        assert not outcome.ok
        assert outcome.exit_code == 2
        statuses = {m.method: m.status for m in outcome.methods}
        assert statuses == {Method.MULTID1: "failed", Method.RWA: "ok"}
        assert (Path(outcome.output_dir) / "spectrum_rwa.csv").exists()
        assert "diverged" in outcome.methods[0].error


@pytest.mark.integration
class TestSweep:
    """Test deviation sweeps"""

    def test_sweep_writes_table(self, small_config, temp_output_dir):
        """Test every point runs and the deviation table is written"""
        spec = SweepSpec(
            lambda_c_values=[0.0, 0.1],
            alpha_values=[0.05],
            multiplicity_overrides=[{"lambda_c": 0.1, "alpha": 0.05, "multiplicity": 2}],
        )
        results = sweep(spec, small_config, Path(temp_output_dir), jobs=1)

        assert [(r.lambda_c, r.alpha, r.multiplicity) for r in results] == [(0.0, 0.05, 1), (0.1, 0.05, 2)]
        assert all(r.status == "ok" for r in results)
        table = pd.read_csv(Path(temp_output_dir) / "deviation_table.csv", index_col=0)
        assert list(table.columns) == ["alpha=0.05"]
        assert (Path(temp_output_dir) / "lc0.1_a0.05" / "spectrum_multid1.csv").exists()

    def test_single_point_matches_run(self, small_config, temp_output_dir):
        """Test a one-point sweep reports the same sigma^2 as a direct run"""
        spec = SweepSpec(lambda_c_values=[0.1], alpha_values=[0.05])
        (point,) = sweep(spec, small_config, Path(temp_output_dir) / "sweep", jobs=1)

        direct = EmissionRunner(
            small_config.with_updates({"methods": ["multid1"]}), Path(temp_output_dir) / "direct"
        ).run()
        assert point.sigma2_max == pytest.approx(direct.methods[0].sigma2_max, rel=1e-12, abs=1e-15)

    def test_failed_point_recorded(self, small_config, temp_output_dir, mocker):
        """Test a failing point is marked and the sweep continues"""
        mocker.patch.object(runner_module, "propagate", side_effect=PropagationError("diverged"))
        spec = SweepSpec(lambda_c_values=[0.0], alpha_values=[0.05, 0.1])
        results = sweep(spec, small_config, Path(temp_output_dir), jobs=1)

        assert [r.status for r in results] == ["failed", "failed"]
        table = pd.read_csv(Path(temp_output_dir) / "deviation_table.csv", index_col=0)
        assert table.loc[0.0, "alpha=0.05"] == "failed [1]"


@pytest.mark.unit
class TestPresets:
    """Test canned table and figure configurations"""

    def test_table1_spec(self):
        """Test the deviation-table grid and multiplicities"""
        spec = table1_spec()
        assert spec.lambda_c_values == [0.0, 0.1, 0.3, 0.5]
        assert spec.alpha_values == [0.05, 0.1, 0.2]
        assert len(spec.points()) == 12
        for (lambda_c, alpha), (_, multiplicity) in TABLE1_REFERENCE.items():
            assert spec.multiplicity_for(lambda_c, alpha) == multiplicity

    def test_scales(self, small_config):
        """Test desk and full scales"""
        assert scaled_config(small_config, "desk").bath.n_modes == 100
        full = scaled_config(small_config, "paper")
        assert full.bath.n_modes == 500
        assert full.integrator.t_f == 300.0
        with pytest.raises(ConfigurationError):
            scaled_config(small_config, "huge")

    def test_figure_configs(self, small_config):
        """Test twelve resonant panels with tabulated multiplicities"""
        panels = figure_configs(small_config, "desk")
        assert len(panels) == 12
        fig4c = panels["fig4c"]
        assert fig4c.model.lambda_c == 0.5
        assert fig4c.model.alpha == 0.2
        assert fig4c.model.omega_c == fig4c.model.omega0
        assert fig4c.ansatz.multiplicity == 12
        assert panels["fig1a"].model.lambda_c == 0.0

    def test_unknown_panel(self, small_config, temp_output_dir):
        """Test unknown panel names are rejected before running"""
        with pytest.raises(ConfigurationError):
            runner_module.figures(small_config, "desk", Path(temp_output_dir), ["fig9z"])

    def test_figures_writes_peak_report(self, small_config, temp_output_dir):
        """Test a figure panel runs every method and reports peaks"""
        config = small_config.with_updates({"methods": ["trwa", "rwa"], "spectrum.n_points": 300})
        outcomes = runner_module.figures(config, "desk", Path(temp_output_dir), ["fig2a"])

        assert outcomes["fig2a"].ok
        peaks = pd.read_csv(Path(temp_output_dir) / "fig2a" / "peaks.csv")
        assert set(peaks["method"]) == {"trwa", "rwa"}


@pytest.mark.slow
class TestDeskAccuracy:
    """Desk-scale multi-D1 accuracy against the analytic spectra"""

    @pytest.mark.parametrize("lambda_c, alpha, multiplicity", [(0.0, 0.05, 3), (0.1, 0.1, 6)])
    def test_deviation_gate(self, temp_output_dir, lambda_c, alpha, multiplicity):
        """Test max sigma^2 stays below the acceptance gate with 100 modes up to t = 100"""
        base = scaled_config(RunConfig(), "desk")
        assert (base.bath.n_modes, base.integrator.t_f, base.integrator.dt) == (100, 100.0, 0.01)
        spec = SweepSpec(
            lambda_c_values=[lambda_c],
            alpha_values=[alpha],
            multiplicity_overrides=[{"lambda_c": lambda_c, "alpha": alpha, "multiplicity": multiplicity}],
        )
        (point,) = sweep(spec, base, Path(temp_output_dir), jobs=1)
        assert point.status == "ok"
        assert point.sigma2_max < 1e-2


@pytest.mark.paper
class TestFullScale:
    """Full-scale reproduction of the tabulated deviations"""

    @staticmethod
    def run_point(lambda_c, alpha, output_dir):
        _, multiplicity = TABLE1_REFERENCE[(lambda_c, alpha)]
        base = scaled_config(RunConfig(), "paper").with_updates({"model.omega_c": 1.0})
        spec = SweepSpec(
            lambda_c_values=[lambda_c],
            alpha_values=[alpha],
            multiplicity_overrides=[{"lambda_c": lambda_c, "alpha": alpha, "multiplicity": multiplicity}],
        )
        (point,) = sweep(spec, base, Path(output_dir), jobs=1)
        assert point.status == "ok"
        return point.sigma2_max

    def test_weak_coupling_deviation(self, temp_output_dir):
        """Test max sigma^2 at lambda_c = 0, alpha = 0.05 lies within a factor of two of 0.0010"""
        assert 0.0005 <= self.run_point(0.0, 0.05, temp_output_dir) <= 0.002

    def test_cavity_deviation(self, temp_output_dir):
        """Test max sigma^2 at lambda_c = 0.1, alpha = 0.1 lies within a factor of two of 0.0015"""
        assert 0.00075 <= self.run_point(0.1, 0.1, temp_output_dir) <= 0.003

    def test_multid1_peaks_near_trwa(self, temp_output_dir):
        """Test both multi-D1 polariton peaks agree with TRWA within 0.05"""
        config = RunConfig().with_updates(
            {
                "model.lambda_c": 0.1,
                "model.alpha": 0.05,
                "bath.n_modes": 200,
                "ansatz.multiplicity": 6,
                "methods": ["multid1", "trwa"],
                "output.run_id": "peaks",
            }
        )
        outcome = EmissionRunner(config, Path(temp_output_dir)).run()
        assert outcome.ok
        run_dir = Path(outcome.output_dir)
        multid1, trwa = (read_spectrum(run_dir / f"spectrum_{m}.csv") for m in ("multid1", "trwa"))
        multid1_peaks = main_peaks(find_peaks(multid1))
        trwa_peaks = main_peaks(find_peaks(trwa))
        assert len(multid1_peaks) == len(trwa_peaks) == 2
        for ours, reference in zip(multid1_peaks, trwa_peaks):
            assert ours.position == pytest.approx(reference.position, abs=0.05)
