"""
Pytest configuration and fixtures for rabi-emission tests
"""

import json
import os
import tempfile

import numpy as np
import pytest

# Add project root to path for imports
import sys

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from emission.ansatz import norm
from emission.types import DiscretizedBath, ModelParams, MultiD1State


@pytest.fixture
def model_params():
    """Resonant cavity with weak cavity and reservoir couplings"""
    return ModelParams(omega0=1.0, omega_c=1.0, lambda_c=0.2, alpha=0.05, omega_cut=5.0)


@pytest.fixture
def tiny_bath():
    """Two reservoir modes, small enough for the Fock reference solver"""
    return DiscretizedBath(
        n_modes=2,
        omega_max=2.0,
        frequencies=[0.8, 1.5],
        couplings=[0.1, 0.1],
    )


@pytest.fixture
def idle_bath():
    """One decoupled reservoir mode: qubit plus cavity only"""
    return DiscretizedBath(n_modes=1, omega_max=2.0, frequencies=[1.5], couplings=[0.0])


def make_random_state(multiplicity, n_modes, seed=0, radius=0.5, time=0.0):
    """Normalized multi-D1 state with well-separated random displacements"""
    rng = np.random.default_rng(seed)

    def complex_normal(shape, scale):
        return scale * (rng.normal(size=shape) + 1j * rng.normal(size=shape)) / np.sqrt(2.0)

    amplitudes = complex_normal((2, multiplicity), 1.0)
    displacements = complex_normal((2, multiplicity, n_modes), radius)
    displacements = np.clip(displacements.real, -0.6, 0.6) + 1j * np.clip(displacements.imag, -0.6, 0.6)

    def build(scale):
        return MultiD1State(
            multiplicity=multiplicity,
            amplitudes_plus=amplitudes[0] * scale,
            amplitudes_minus=amplitudes[1] * scale,
            displacements_plus=displacements[0],
            displacements_minus=displacements[1],
            time=time,
        )

    return build(1.0 / np.sqrt(norm(build(1.0))))


@pytest.fixture
def random_state():
    """Factory for random normalized multi-D1 states"""
    return make_random_state


@pytest.fixture
def small_config_data():
    """Run configuration small enough for unit tests"""
    return {
        "model": {"omega0": 1.0, "omega_c": 1.0, "lambda_c": 0.1, "alpha": 0.05, "omega_cut": 5.0},
        "bath": {"n_modes": 3, "omega_max": 20.0},
        "ansatz": {"multiplicity": 1, "noise_scale": 1.0, "seed": 7},
        "integrator": {"dt": 0.05, "t_f": 0.5, "regularization": 1e-8, "output_every": 0.1},
        "spectrum": {"kind": "uniform", "n_points": 200, "omega_max": 3.0, "peak_threshold": 0.05},
        "methods": ["trwa", "rwa"],
        "output": {"directory": "results"},
    }


@pytest.fixture
def temp_config_file(small_config_data):
    """Create a temporary config file for testing"""
    with tempfile.NamedTemporaryFile(mode="w", suffix=".json", delete=False) as f:
        json.dump(small_config_data, f)
        temp_file = f.name

    yield temp_file

    # Cleanup
    if os.path.exists(temp_file):
        os.unlink(temp_file)


@pytest.fixture
def temp_output_dir():
    """Temporary directory for run artifacts"""
    with tempfile.TemporaryDirectory() as temp_dir:
        yield temp_dir


def pytest_configure(config):
    """Configure pytest with custom markers"""
    config.addinivalue_line("markers", "slow: desk-scale propagation tests")
    config.addinivalue_line("markers", "paper: full-scale reproduction checks")


def pytest_collection_modifyitems(config, items):
    """Skip full-scale checks unless EMISSION_FULL_SCALE is set"""
    if os.environ.get("EMISSION_FULL_SCALE"):
        return
    skip_full = pytest.mark.skip(reason="set EMISSION_FULL_SCALE=1 to run full-scale checks")
    for item in items:
        if "paper" in item.keywords:
            item.add_marker(skip_full)
