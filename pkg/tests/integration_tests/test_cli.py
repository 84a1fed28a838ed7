"""End-to-end runs of the command line through cli_main."""
import json
import logging

import pandas as pd
import pytest

from app import main as app_main
from app.config import WORKERS_ENV
from app.config_handler import load_config
from app.errors import ConfigError, PhysicsInvariantError, PropagatorCacheMiss, QuadratureError, SweepAbortedError
from app.export import load_commented_csv
from app.main import cli_main, load_configuration

pytestmark = pytest.mark.integration

SMALL_GRID = ["--set", "theta_b_points=3", "--set", "theta_r_points=3",
              "--set", "theta_b_max_pi=2", "--set", "theta_r_max_pi=2"]


class TestExitCodes:
    def test_missing_config_file(self, tmp_path, caplog):
        """A missing --config file is a configuration error naming the path."""
        path = str(tmp_path / "missing.cfg")
        with caplog.at_level(logging.ERROR):
            assert cli_main(["kernel", "--config", path]) == 2
        assert path in caplog.text

    def test_unknown_set_key(self, out_args, caplog):
        with caplog.at_level(logging.ERROR):
            assert cli_main(["kernel", "--set", "kapa=0.5"] + out_args) == 2
        assert "valid keys" in caplog.text

    def test_unknown_command(self):
        assert cli_main(["optimize"]) == 2

    def test_invalid_physical_value(self, out_args):
        assert cli_main(["trace", "--backend", "unitary", "--set", "t_p=-1"] + out_args) == 2

    def test_unknown_backend(self, out_args):
        assert cli_main(["trace", "--backend", "tempo"] + out_args) == 2

    @pytest.mark.parametrize("error", [
        PhysicsInvariantError("trace drifted", time=1.0),
        QuadratureError("quadrature for C(1) did not converge"),
        PropagatorCacheMiss("t = 12 ps outside the cached window"),
        SweepAbortedError("3 of 9 sweep cells failed"),
    ])
    def test_run_failures_exit_with_one(self, error, out_args, monkeypatch, caplog):
        def broken(config):
            raise error

        monkeypatch.setitem(app_main.COMMAND_HANDLERS, "kernel", broken)
        with caplog.at_level(logging.ERROR):
            assert cli_main(["kernel"] + out_args) == 1
        assert str(error) in caplog.text


class TestConfiguration:
    def test_precedence_of_sources(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("[pulse]\nt_p = 2.0\ndelta = 3.0\n\n[run]\nworkers = 2\n")
        command, config = load_configuration(
            ["trace", "--config", str(path), "--workers", "3", "--delta", "4.0", "--set", "t_p=5"]
        )
        assert command == "trace"
        assert config["workers"] == 3
        assert config["delta"] == 4.0
        assert config["t_p"] == 5.0

    def test_plugin_params_follow_backend(self):
        _, config = load_configuration(["trace", "--backend", "polaron", "--renormalize_drive", "false"])
        assert config["backend"] == "polaron"
        assert config["renormalize_drive"] is False

    def test_workers_from_environment(self, monkeypatch):
        monkeypatch.setenv(WORKERS_ENV, "4")
        _, config = load_configuration(["sweep", "--workers", "2"])
        assert config["workers"] == 4

    def test_zero_workers(self):
        with pytest.raises(ConfigError):
            load_configuration(["sweep", "--workers", "0"])

    def test_save_config(self, tmp_path, out_args):
        saved = str(tmp_path / "effective.cfg")
        assert cli_main(["kernel", "--set", "s_max=4.0", "--set", "ds=0.02", "--save_config", saved] + out_args) == 0
        loaded = load_config(saved)
        assert loaded["s_max"] == 4.0 and loaded["ds"] == 0.02
        assert loaded["save_config"] == saved


class TestCommands:
    def test_kernel(self, tmp_path, out_args, light_solver, capsys):
        assert cli_main(["kernel"] + light_solver + out_args) == 0
        assert "D = 0.14" in capsys.readouterr().out
        frame = load_commented_csv(str(tmp_path / "kernel.csv"))
        assert list(frame.columns) == ["s", "re_C", "im_C", "re_phi", "im_phi"]
        assert frame["s"].iloc[-1] == pytest.approx(4.0)

    def test_unitary_trace(self, tmp_path, out_args, capsys):
        args = ["trace", "--backend", "unitary", "--output_prefix", "u"] + out_args
        assert cli_main(args) == 0
        assert "P_X(3 t_p) =" in capsys.readouterr().out
        frame = load_commented_csv(str(tmp_path / "u_trace.csv"))
        assert frame["t"].iloc[0] == pytest.approx(-3.0)
        assert frame["t"].iloc[-1] == pytest.approx(3.0)
        assert frame["P_X"].between(-1e-6, 1 + 1e-6).all()

    def test_trace_with_backend_comparison(self, tmp_path, out_args, light_solver):
        assert cli_main(["trace", "--compare-backends"] + light_solver + out_args) == 0
        frame = load_commented_csv(str(tmp_path / "backends.csv"))
        assert list(frame.columns) == ["t", "P_X_weak_coupling", "P_X_polaron"]
        trace = load_commented_csv(str(tmp_path / "trace.csv"))
        pd.testing.assert_series_equal(trace["P_X"], frame["P_X_weak_coupling"], check_names=False)

    def test_cavity_trace_has_cavity_columns(self, tmp_path, out_args):
        args = ["trace", "--backend", "unitary", "--set", "use_cavity=true", "--set", "n_max=2"] + out_args
        assert cli_main(args) == 0
        frame = load_commented_csv(str(tmp_path / "trace.csv"))
        assert {"a_dag_a", "re_a", "im_a"} <= set(frame.columns)

    def test_unitary_sweep(self, tmp_path, out_args, capsys):
        args = ["sweep", "--backend", "unitary", "--no-refine"] + SMALL_GRID + out_args
        assert cli_main(args) == 0
        assert "max P_X" in capsys.readouterr().out
        grid = load_commented_csv(str(tmp_path / "sweep_P_X_grid.csv"), header=None).to_numpy()
        assert grid.shape == (3, 3)
        assert (tmp_path / "sweep_P_X_provenance.json").is_file()
        assert (tmp_path / "sweep_P_X_plot.py").is_file()

    def test_debug_info(self, tmp_path, out_args):
        path = tmp_path / "debug.json"
        assert cli_main(["trace", "--backend", "polaron", "--set", f"save_debug={path}"]
                        + ["--set", "s_max=4.0", "--set", "ds=0.02"] + out_args) == 0
        with open(path) as f:
            info = json.load(f)
        assert info["command"] == "trace"
        assert info["backend"] == "polaron"
        assert info["renormalize_drive"] is True

    @pytest.mark.slow
    def test_fom_with_correlation_export(self, tmp_path, out_args, capsys):
        args = ["fom", "--backend", "unitary", "--set", "initial_state=excited", "--set", "g=0.5",
                "--set", "kappa=5.0", "--set", "gamma_b=0.02", "--set", "emission_t_max=80",
                "--set", "tail_fit_window=10", "--set", "export_correlation=yes"] + out_args
        assert cli_main(args) == 0
        assert "I = " in capsys.readouterr().out
        record = load_commented_csv(str(tmp_path / "fom.csv")).set_index("key")["value"]
        assert float(record["I"]) > 0.95
        frame = load_commented_csv(str(tmp_path / "correlation.csv"))
        assert list(frame.columns) == ["t", "s", "re_g1", "im_g1", "g2", "G2_pop"]
