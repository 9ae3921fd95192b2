"""
RANKFLOW Test Configuration
"""

import json
from pathlib import Path

import pytest

from rankflow.config import SolverSettings
from rankflow.limit.solver import solve_field
from rankflow.model.spec import load_model


def model_dict(types, horizon=1.0):
    return {
        "types": [{"rate": w, "profile": rho, "weight": r} for w, rho, r in types],
        "horizon": horizon,
    }


CONSTANT = model_dict([("1.0", "1-y", 1.0)])
TWO_CONSTANT = model_dict([("1.0", "1-y", 0.5), ("2.0", "1-y", 0.5)])
SPACE_TIME = model_dict([("exp(-t)*(1+y)", "1-y", 1.0)])
TWO_PROFILE = model_dict([
    ("exp(-t)*(1+y)", "(1-y)*(1-y)", 0.5),
    ("1.0", "2*(1-y)-(1-y)*(1-y)", 0.5),
])


@pytest.fixture
def test_data_dir():
    """Path to test data directory."""
    return Path(__file__).parent / "fixtures"


@pytest.fixture
def temp_output_dir(tmp_path):
    """Temporary output directory for tests."""
    output = tmp_path / "output"
    output.mkdir()
    return output


@pytest.fixture
def constant_model():
    """A=1, w = 1, rho = 1 - y, T = 1."""
    return load_model(CONSTANT)


@pytest.fixture
def two_constant_model():
    """A=2, w = (1, 2), r = (1/2, 1/2), rho_a = 1 - y."""
    return load_model(TWO_CONSTANT)


@pytest.fixture
def space_time_model():
    return load_model(SPACE_TIME)


@pytest.fixture
def two_profile_model():
    """A=2 with distinct profiles and a space-time rate on type 0."""
    return load_model(TWO_PROFILE)


@pytest.fixture
def solver_settings():
    """Coarse grids for fast solves."""
    return SolverSettings(grid_m=100, grid_k=100)


@pytest.fixture(scope="session")
def constant_field():
    return solve_field(load_model(CONSTANT), 400, 400, SolverSettings())


@pytest.fixture(scope="session")
def two_constant_field():
    return solve_field(load_model(TWO_CONSTANT), 200, 200, SolverSettings())


@pytest.fixture(scope="session")
def two_profile_field():
    return solve_field(load_model(TWO_PROFILE), 200, 200, SolverSettings())


@pytest.fixture
def experiment_file(tmp_path):
    """Write an experiment config and return its path."""
    def write(model=CONSTANT, **sections):
        path = tmp_path / "experiment.json"
        path.write_text(json.dumps({"model": model, **sections}))
        return path
    return write
