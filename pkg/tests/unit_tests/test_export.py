"""Tests for the CSV writers."""
import json
import os

import numpy as np
import pandas as pd
import pytest

from app.export import (
    load_commented_csv,
    output_path,
    write_csv,
    write_kernel,
    write_record,
    write_sweep,
)
from app.xsweep import SweepResult


@pytest.fixture
def sweep_result():
    theta = np.array([0.0, 0.5, 1.0]) * np.pi
    grid = np.array([[0.1, 0.2, 0.3], [0.4, np.nan, 0.6], [0.7, 0.8, 0.95]])
    status = np.isnan(grid)
    return SweepResult(theta_b=theta, theta_r=theta[:3], grid=grid, status=status, observable="P_X",
                       max_location=(theta[2], theta[2], 0.95),
                       provenance={"version": "0.1.0", "kernel_truncation_ratio": np.float64(1e-6)})


class TestWriteCsv:
    def test_header_comments_come_first(self, tmp_path):
        path = write_csv(pd.DataFrame({"t": [0.0, 0.5], "P_X": [0.0, 1.0 / 3.0]}), str(tmp_path / "a.csv"),
                         ["t in ps", "second line"])
        lines = open(path).read().splitlines()
        assert lines[:3] == ["# t in ps", "# second line", "t,P_X"]
        assert lines[4] == "0.5,0.333333333333"

    def test_read_back(self, tmp_path):
        frame = pd.DataFrame({"s": [0.0, 0.01], "re_C": [1.5, -2.25]})
        path = write_csv(frame, str(tmp_path / "nested" / "k.csv"), ["comment"])
        pd.testing.assert_frame_equal(load_commented_csv(path), frame)

    def test_output_path(self):
        assert output_path("out", "run1", "trace") == os.path.join("out", "run1_trace.csv")
        assert output_path("out", None, "kernel") == os.path.join("out", "kernel.csv")
        assert output_path("out", "x", "provenance", ".json").endswith("x_provenance.json")


class TestRecords:
    def test_record_columns(self, tmp_path):
        path = write_record({"N": np.float64(0.95), "I_coarse": None, "backend": "polaron"},
                            str(tmp_path / "fom.csv"), ["one source"])
        frame = load_commented_csv(path)
        assert list(frame["key"]) == ["N", "I_coarse", "backend"]
        assert float(frame["value"][0]) == pytest.approx(0.95)

    def test_kernel_file(self, tmp_path, coarse_table):
        path = write_kernel(coarse_table, str(tmp_path / "kernel.csv"))
        text = open(path).read()
        assert "truncation_ratio=" in text
        frame = load_commented_csv(path)
        assert len(frame) == len(coarse_table.s_grid)
        assert frame["re_C"].iloc[0] == pytest.approx(coarse_table.C_values[0].real, rel=1e-10)


class TestWriteSweep:
    def test_files(self, tmp_path, sweep_result):
        paths = write_sweep(sweep_result, str(tmp_path))
        assert set(paths) == {"grid", "theta_b", "theta_r", "status", "provenance", "plot"}
        assert os.path.basename(paths["grid"]) == "sweep_P_X_grid.csv"
        for path in paths.values():
            assert os.path.isfile(path)

    def test_grid_matrix(self, tmp_path, sweep_result):
        paths = write_sweep(sweep_result, str(tmp_path), prefix="run")
        grid = load_commented_csv(paths["grid"], header=None).to_numpy()
        np.testing.assert_array_equal(np.isnan(grid), sweep_result.status)
        np.testing.assert_allclose(grid[~sweep_result.status], sweep_result.grid[~sweep_result.status])
        status = load_commented_csv(paths["status"], header=None).to_numpy()
        assert status.sum() == 1 and status[1, 1] == 1

    def test_axes_and_provenance(self, tmp_path, sweep_result):
        paths = write_sweep(sweep_result, str(tmp_path), prefix="run")
        theta_b = load_commented_csv(paths["theta_b"])["theta_b_pi"].to_numpy()
        np.testing.assert_allclose(theta_b, [0.0, 0.5, 1.0])
        assert list(load_commented_csv(paths["theta_r"]).columns) == ["theta_r_pi"]
        with open(paths["provenance"]) as f:
            provenance = json.load(f)
        assert provenance == {"version": "0.1.0", "kernel_truncation_ratio": 1e-6}

    def test_plot_script(self, tmp_path, sweep_result):
        paths = write_sweep(sweep_result, str(tmp_path), prefix="run")
        script = open(paths["plot"]).read()
        assert '"run_grid.csv"' in script
        assert "ax.plot([1], [1]" in script
        compile(script, paths["plot"], "exec")
