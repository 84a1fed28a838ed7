"""Sweeps, their configuration round trip and the pulse-width scan, end to end."""
import numpy as np
import pandas as pd
import pytest

from app.config import DEFAULT_VALUES
from app.config_handler import (
    build_sweep_spec,
    get_plugin_default_params,
    load_config,
    save_config,
    sweep_spec_to_config,
)
from app.config_merger import merge_config
from app.drive import PulseSpec
from app.dynamics import ModelSpec
from app.export import write_sweep
from app.sps import CavitySpec, CorrelationSettings
from app.xsweep import AxisRange, SweepSpec, run_sweep, run_width_scan

pytestmark = pytest.mark.integration

FAST_CAVITY = CavitySpec(g=0.5, kappa=5.0, gamma_b=0.02, gamma_d=0.0, gamma_coll=1.0, n_max=2)
FAST_SETTINGS = CorrelationSettings(emission_t_max=80.0, tail_fit_window=10.0, s_max=4.0, ds=0.02)


def weak_spec(points=3):
    fixed = ModelSpec(pulse=PulseSpec(theta_b=0.0, theta_r=0.0, t_p=1.0, delta=6.0))
    axis = AxisRange(1.0, 3.0, points)
    return SweepSpec(theta_b_range=axis, theta_r_range=axis, fixed=fixed, correlation=FAST_SETTINGS)


class TestSweepDeterminism:
    def test_worker_count_does_not_change_output(self, tmp_path, coarse_table):
        """Grids from one and two workers are bitwise identical, CSVs included."""
        spec = weak_spec()
        serial = run_sweep(spec, workers=1, table=coarse_table)
        parallel = run_sweep(spec, workers=2, table=coarse_table)
        assert np.array_equal(serial.grid, parallel.grid)
        assert serial.max_location == parallel.max_location
        assert serial.provenance == parallel.provenance

        serial_paths = write_sweep(serial, str(tmp_path / "one"))
        parallel_paths = write_sweep(parallel, str(tmp_path / "two"))
        for role in ("grid", "theta_b", "theta_r", "status", "provenance"):
            with open(serial_paths[role]) as a, open(parallel_paths[role]) as b:
                assert a.read() == b.read()

    def test_builds_its_own_table(self):
        spec = weak_spec(points=2)
        result = run_sweep(spec)
        assert result.provenance["kernel_truncation_ratio"] < 1e-4
        assert np.all((result.grid > -1e-6) & (result.grid < 1 + 1e-6))


class TestConfigRoundTrip:
    @pytest.mark.parametrize("suffix", [".cfg", ".json"])
    def test_sweep_spec_survives_a_config_file(self, tmp_path, suffix):
        """A SweepSpec written as configuration and read back is the same SweepSpec."""
        config = dict(DEFAULT_VALUES, backend="polaron", renormalize_drive=False, observable="I",
                      theta_b_points=7, theta_r_max_pi=5.5, t_p=2.5, delta=2.4, dt=0.002,
                      temperature=10.0, gamma_coll=0.8, outer_step=0.25)
        spec = build_sweep_spec(config)

        _, path = save_config(dict(DEFAULT_VALUES, **sweep_spec_to_config(spec)), str(tmp_path / f"spec{suffix}"))
        loaded = load_config(path)
        merged = merge_config(DEFAULT_VALUES, get_plugin_default_params(loaded["backend"]), loaded, {}, {})
        assert build_sweep_spec(merged) == spec


@pytest.mark.slow
class TestPulseWidthScan:
    def test_scan_rows(self):
        frame = run_width_scan([1.0], cavity=FAST_CAVITY, settings=FAST_SETTINGS, backend="unitary",
                               area_range=AxisRange(1.0, 3.0, 3), refine=False)
        assert list(frame["mode"]) == ["dichromatic", "dichromatic_no_phonons", "resonant"]
        assert list(frame.columns) == ["t_p", "delta", "mode", "theta_b_pi", "theta_r_pi", "P_X", "N", "N_b",
                                       "I", "budget_residual", "N_ub", "I_ub"]
        dichromatic, free, resonant = (frame.iloc[k] for k in range(3))
        assert dichromatic["delta"] == pytest.approx(6.0)
        assert resonant["delta"] == 0.0
        assert resonant["N_ub"] == pytest.approx(0.5 * dichromatic["N_ub"])
        # the unitary backend has no phonons to remove
        assert free["N"] == pytest.approx(dichromatic["N"], rel=1e-9)
        assert free["I"] == pytest.approx(dichromatic["I"], rel=1e-9)
        assert 0.0 < resonant["N"] <= 0.5

    def test_rows_from_the_pool_match_serial_rows(self):
        kwargs = dict(cavity=FAST_CAVITY, settings=FAST_SETTINGS, backend="unitary",
                      area_range=AxisRange(1.0, 3.0, 3), refine=False)
        serial = run_width_scan([1.0, 2.0], workers=1, **kwargs)
        pooled = run_width_scan([1.0, 2.0], workers=2, **kwargs)
        assert list(pooled["t_p"]) == [1.0, 1.0, 1.0, 2.0, 2.0, 2.0]
        pd.testing.assert_frame_equal(serial, pooled)
