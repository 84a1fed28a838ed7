#!/usr/bin/env python3
"""
Plugin Loading Integration Tests

Every dynamics backend is loaded by name, configured through ModelSpec
backend_options and driven through a full trajectory.
"""

import numpy as np
import pytest

from app.drive import PulseSpec
from app.dynamics import ModelSpec, SolverConfig, evolve, load_backend, read_px_final
from app.plugin_loader import DYNAMICS_GROUP, available_plugins, load_plugin

pytestmark = pytest.mark.integration

S_MAX = 4.0
DS = 0.02


def run_backend(backend, table, **options):
    model = ModelSpec(pulse=PulseSpec.from_pi(1.80, 6.96, 1.0, 6.0), backend=backend, backend_options=options)
    config = SolverConfig.for_model(model, s_max=S_MAX, ds=DS)
    return evolve(model, config, table)


@pytest.mark.parametrize("backend", ["unitary", "weak_coupling", "polaron"])
def test_backend_runs_full_window(backend, coarse_table):
    """Each backend integrates the default drive and keeps P_X inside [0, 1]."""
    traj = run_backend(backend, coarse_table)
    assert traj.times[-1] == pytest.approx(3.0)
    assert traj.min_eigenvalue > -1e-4
    assert 0.0 <= read_px_final(traj) <= 1.0


def test_all_backends_available():
    names = available_plugins(DYNAMICS_GROUP)
    for name in ("unitary", "weak_coupling", "polaron"):
        plugin_class, params = load_plugin(DYNAMICS_GROUP, name)
        assert name in names
        assert params == list(plugin_class.plugin_params)


def test_backend_options_reach_the_plugin():
    model = ModelSpec(pulse=PulseSpec.off(), backend="polaron", backend_options={"renormalize_drive": False})
    plugin = load_backend(model)
    assert plugin.params["renormalize_drive"] is False
    assert plugin.params["dressed_coupling_operators"] is True


def test_polaron_options_change_the_dynamics(coarse_table):
    renormalised = run_backend("polaron", coarse_table)
    bare = run_backend("polaron", coarse_table, renormalize_drive=False)
    assert not np.allclose(renormalised.p_x, bare.p_x, atol=1e-6)


def test_polaron_shift_switch(coarse_table):
    shifted = run_backend("weak_coupling", coarse_table)
    unshifted = run_backend("weak_coupling", coarse_table, include_polaron_shift=False)
    assert abs(read_px_final(shifted) - read_px_final(unshifted)) > 1e-4
