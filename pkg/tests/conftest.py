import warnings
# Suppress warnings before any other imports
warnings.filterwarnings("ignore", category=DeprecationWarning, module="multiprocessing")

import multiprocessing
import os
import sys

# Set multiprocessing start method to avoid fork issues
if multiprocessing.get_start_method(allow_none=True) is None:
    multiprocessing.set_start_method('spawn', force=True)

import pytest

# Add the project root to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from app.bath import BathSpec, build_kernel_table
from app.sps import CavitySpec, CorrelationSettings

ACCEPTANCE_ENV = "DICHROMATIC_SPS_ACCEPTANCE"

# Coarse kernel range for unit tests; every solver config built in the tests uses it too
TEST_DS = 0.02
TEST_S_MAX = 4.0


def pytest_addoption(parser):
    parser.addoption("--run-acceptance", action="store_true", default=False,
                     help="run the long acceptance tests (minutes to hours)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-acceptance") or os.environ.get(ACCEPTANCE_ENV, "0") == "1":
        return
    skip = pytest.mark.skip(reason=f"needs --run-acceptance or {ACCEPTANCE_ENV}=1")
    for item in items:
        if "acceptance" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(autouse=True)
def quiet_progress(monkeypatch):
    """Progress bars off in every test."""
    monkeypatch.setenv("DICHROMATIC_SPS_QUIET", "1")


@pytest.fixture(scope="session")
def default_bath():
    return BathSpec()


@pytest.fixture(scope="session")
def kernel_table(default_bath):
    """Default 4 K bath on the full [0, 8] ps range."""
    return build_kernel_table(default_bath)


@pytest.fixture(scope="session")
def coarse_table(default_bath):
    return build_kernel_table(default_bath, ds=TEST_DS, s_max=TEST_S_MAX)


@pytest.fixture
def fast_cavity():
    """Strongly coupled, fast-emptying cavity: the emitter decays in a few ps."""
    return CavitySpec(g=0.5, kappa=5.0, gamma_b=0.02, gamma_d=0.0, gamma_coll=1.0, n_max=2)


@pytest.fixture
def fast_settings():
    return CorrelationSettings(emission_t_max=80.0, tail_fit_window=10.0, s_max=TEST_S_MAX, ds=TEST_DS)
