"""Shared settings for the integration tests: small grids on the coarse kernel range."""
import pytest

# Same kernel range as the session coarse_table fixture
LIGHT_SOLVER = ["--set", "s_max=4.0", "--set", "ds=0.02"]


@pytest.fixture
def out_args(tmp_path):
    """CLI arguments that send every output file to a temporary directory."""
    return ["--output_dir", str(tmp_path)]


@pytest.fixture
def light_solver():
    return list(LIGHT_SOLVER)
