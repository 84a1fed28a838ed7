#!/usr/bin/env python3
"""
main.py

Entry point of the dichromatic single-photon-source simulator. This script:
- Loads and merges the configuration (defaults, backend plugin, file, CLI, --set).
- Dispatches to one subcommand (trace, sweep, fom, scan, bounds, kernel).
- Maps failures to exit codes: 1 for physics-invariant violations and aborted
  sweeps, 2 for configuration errors.
"""

import logging
import os
import sys
from typing import Any, Dict

# Add the project root to the Python path to allow for absolute imports
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import numpy as np
import pandas as pd

from app.bath import build_kernel_table
from app.cli import parse_args
from app.config import DEFAULT_VALUES, QUIET_ENV, env_workers
from app.config_handler import (
    build_bath,
    build_cavity,
    build_correlation_settings,
    build_model,
    build_solver,
    build_sweep_spec,
    get_plugin_default_params,
    load_config,
    save_config,
    save_debug_info,
)
from app.config_merger import merge_config, parse_set_overrides, process_unknown_args
from app import __version__
from app.dynamics import evolve, load_backend, read_px_final
from app.errors import ConfigError, PhysicsInvariantError, PropagatorCacheMiss, SweepAbortedError
from app.export import (
    output_path,
    write_backend_comparison,
    write_correlation,
    write_fom,
    write_kernel,
    write_record,
    write_scan,
    write_sweep,
    write_trajectory,
)
from app.sps import source_figures_of_merit, upper_bounds
from app.xsweep import AxisRange, needs_kernel, refine_max, run_sweep, run_width_scan

logger = logging.getLogger(__name__)

COMPARED_BACKENDS = ("weak_coupling", "polaron")


def setup_logging(config: Dict[str, Any]):
    """
    Setup logging configuration based on config options.

    Priority: DICHROMATIC_SPS_QUIET=1 env var > quiet_mode config > log_level config.
    Quiet mode is exported to the environment so worker processes inherit it.
    """
    if os.environ.get(QUIET_ENV, '0') == '1' or config.get('quiet_mode', False):
        os.environ[QUIET_ENV] = '1'
        level = logging.ERROR
    else:
        level_name = str(config.get('log_level', 'WARNING')).upper()
        level = getattr(logging, level_name, logging.WARNING)

    handlers = [logging.StreamHandler()]
    if config.get('save_log'):
        handlers.append(logging.FileHandler(config['save_log']))
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True,
    )
    return logging.getLogger(__name__)


def load_configuration(argv=None):
    """Parse the command line and merge every configuration source."""
    args, unknown_args = parse_args(argv)
    cli_args: Dict[str, Any] = vars(args)
    file_config: Dict[str, Any] = load_config(args.config) if args.config else {}
    unknown_args_dict = process_unknown_args(unknown_args)
    set_overrides = parse_set_overrides(args.set)

    # First pass selects the backend, second pass adds its plugin parameters
    config = merge_config(DEFAULT_VALUES, {}, file_config, cli_args, unknown_args_dict, set_overrides)
    try:
        plugin_params = get_plugin_default_params(config['backend'])
    except ImportError as e:
        raise ConfigError(f"{e} Available backends: unitary, weak_coupling, polaron") from e
    config = merge_config(DEFAULT_VALUES, plugin_params, file_config, cli_args, unknown_args_dict, set_overrides)

    workers = env_workers()
    if workers is not None:
        config['workers'] = workers
    if config['workers'] < 1:
        raise ConfigError(f"workers must be >= 1, got {config['workers']}")
    return args.command, config


def _path(config, name, suffix=".csv"):
    return output_path(config['output_dir'], config['output_prefix'], name, suffix)


def run_trace(config):
    model = build_model(config)
    solver = build_solver(config, model)
    traj = evolve(model, solver)
    write_trajectory(traj, _path(config, "trace"))
    if traj.t_end >= 3.0 * model.pulse.t_p - 0.5 * solver.dt:
        print(f"P_X(3 t_p) = {read_px_final(traj):.6f}")
    if config['compare_backends']:
        columns = {"t": traj.times}
        for backend in COMPARED_BACKENDS:
            other_traj = evolve(build_model({**config, "backend": backend}), solver)
            columns[f"P_X_{backend}"] = other_traj.p_x
        write_backend_comparison(pd.DataFrame(columns), _path(config, "backends"))


def run_sweep_command(config):
    spec = build_sweep_spec(config)
    table = None
    if needs_kernel(spec.fixed):
        table = build_kernel_table(spec.fixed.bath, spec.correlation.ds, spec.correlation.s_max)
    result = run_sweep(spec, config['workers'], table)
    if config['refine']:
        refine_max(result, spec, table, config['xatol_pi'])
    paths = write_sweep(result, config['output_dir'], config['output_prefix'])
    theta_b, theta_r, value = result.refined or result.max_location
    print(f"max {spec.observable} = {value:.6f} at theta_b = {theta_b / np.pi:.4f} pi, "
          f"theta_r = {theta_r / np.pi:.4f} pi ({int(result.status.sum())} failed cells)")
    logger.info("Sweep written to %s", paths['grid'])


def run_fom(config):
    model = build_model(config, with_cavity=True)
    report = source_figures_of_merit(model, build_correlation_settings(config))
    write_fom(report, _path(config, "fom"))
    if config['export_correlation']:
        write_correlation(report.correlation, _path(config, "correlation"))
    print(f"N = {report.N:.4f}, N_b = {report.N_b:.4f}, I = {report.I:.4f}, P_X = {report.P_X_final:.4f}")


def run_scan(config):
    try:
        t_p_list = [float(t) for t in str(config['t_p_list']).split(',') if t.strip()]
    except ValueError as e:
        raise ConfigError(f"invalid t_p_list {config['t_p_list']!r}: {e}") from e
    area_range = AxisRange(min_pi=config['theta_b_min_pi'], max_pi=config['theta_b_max_pi'],
                           points=config['scan_grid_points'])
    frame = run_width_scan(
        t_p_list,
        eta=config['scan_eta'],
        bath=build_bath(config),
        cavity=build_cavity(config, force=True),
        settings=build_correlation_settings(config),
        backend=config['backend'],
        area_range=area_range,
        refine=config['refine'],
        xatol_pi=config['xatol_pi'],
        workers=config['workers'],
        resonant_gamma_coll=config['resonant_gamma_coll'],
    )
    write_scan(frame, _path(config, "scan"))
    print(frame[["t_p", "mode", "N", "I", "N_ub", "I_ub"]].to_string(index=False))


def run_bounds(config):
    bounds = upper_bounds(build_cavity(config, force=True), build_bath(config),
                          build_correlation_settings(config), backend=config['backend'])
    write_record(bounds._asdict(), _path(config, "bounds"), ("emitter prepared in |X>, drive off",))
    print(f"beta = {bounds.beta:.3f}, I_ub = {bounds.I_ub:.3f}")


def run_kernel(config):
    table = build_kernel_table(build_bath(config), config['ds'], config['s_max'])
    write_kernel(table, _path(config, "kernel"))
    print(f"D = {table.D:.5f} rad/ps, B = {table.B:.5f}, truncation ratio = {table.truncation_ratio:.2e}")


def collect_debug_info(command, config):
    """Version, command and the backend plugin's debug variables."""
    debug_info = {"version": __version__, "command": command}
    load_backend(build_model(config)).add_debug_info(debug_info)
    return debug_info


COMMAND_HANDLERS = {
    "trace": run_trace,
    "sweep": run_sweep_command,
    "fom": run_fom,
    "scan": run_scan,
    "bounds": run_bounds,
    "kernel": run_kernel,
}


def cli_main(argv=None) -> int:
    """Run one subcommand; returns the process exit code."""
    try:
        command, config = load_configuration(argv)
        setup_logging(config)
        logger.info("--- Running %s with backend %s ---", command, config['backend'])
        os.makedirs(config['output_dir'], exist_ok=True)
        COMMAND_HANDLERS[command](config)
        if config['save_config']:
            save_config(config, config['save_config'])
            logger.info("Configuration saved to %s", config['save_config'])
        if config['save_debug']:
            save_debug_info(collect_debug_info(command, config), config['save_debug'])
    except SystemExit as e:
        # argparse usage errors
        return e.code if isinstance(e.code, int) else 2
    except (PhysicsInvariantError, SweepAbortedError) as e:
        logger.error("Physics invariant violated: %s", e)
        return 1
    except PropagatorCacheMiss as e:
        logger.error("Propagator requested outside the solver grid: %s", e)
        return 1
    except ValueError as e:
        logger.error("Configuration error: %s", e)
        return 2
    return 0


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
