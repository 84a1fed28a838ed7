# config.py
# Configuration file for the dichromatic single-photon-source simulator.
# This file contains ALL configuration parameters; the comment banners name the
# config-file sections in which each key may appear.

import os

QUIET_ENV = "DICHROMATIC_SPS_QUIET"
WORKERS_ENV = "DICHROMATIC_SPS_WORKERS"

DEFAULT_VALUES = {
    # --- [pulse] Dichromatic drive (areas in units of pi, t_p in ps, delta in rad/ps) ---
    "theta_b_pi": 1.80,
    "theta_r_pi": 6.96,
    "t_p": 1.0,
    "delta": 6.0,

    # --- [bath] Phonon environment ---
    "alpha": 0.03,
    "omega_c": 2.2,
    "temperature": 4.0,

    # --- [cavity] Emitter-cavity model (rates in rad/ps) ---
    "use_cavity": False,
    "g": 0.041,
    "kappa": 0.46,
    "gamma_b": 0.45e-3,
    "gamma_d": 0.13e-3,
    "gamma_coll": 1.0,
    "n_max": 2,

    # --- [model] Dynamics backend and its plugin parameters ---
    "backend": "weak_coupling",
    "initial_state": "ground",
    "include_polaron_shift": True,
    "renormalize_drive": True,
    "dressed_coupling_operators": True,

    # --- [solver] RK4 discretisation and kernel table ---
    "dt": None,
    "t_end": None,
    "s_max": 8.0,
    "ds": 0.01,
    "record_stride": 1,
    "block_steps": 1024,

    # --- [correlation] Emission window and two-time grid ---
    "outer_step": 0.5,
    "emission_t_max": 800.0,
    "emission_threshold": 1e-4,
    "tail_fit_window": 20.0,

    # --- [sweep] Pulse-area grid ---
    "theta_b_min_pi": 0.0,
    "theta_b_max_pi": 8.0,
    "theta_b_points": 41,
    "theta_r_min_pi": 0.0,
    "theta_r_max_pi": 8.0,
    "theta_r_points": 41,
    "observable": "P_X",
    "refine": True,
    "xatol_pi": 0.01,
    "max_failure_fraction": 0.05,

    # --- [scan] Pulse-width scan at fixed t_p * delta ---
    "t_p_list": "1,2,3,4,5,6",
    "scan_eta": 6.0,
    "scan_grid_points": 21,
    "resonant_gamma_coll": 0.5,

    # --- [output] Files written by the subcommands ---
    "output_dir": "results",
    "output_prefix": None,
    "save_config": None,
    "compare_backends": False,
    "export_correlation": False,
    "save_debug": None,

    # --- [run] Execution and logging ---
    "workers": 1,
    "log_level": "WARNING",
    "quiet_mode": False,
    "save_log": None,
}

CONFIG_SECTIONS = {
    "pulse": ["theta_b_pi", "theta_r_pi", "t_p", "delta"],
    "bath": ["alpha", "omega_c", "temperature"],
    "cavity": ["use_cavity", "g", "kappa", "gamma_b", "gamma_d", "gamma_coll", "n_max"],
    "model": ["backend", "initial_state", "include_polaron_shift", "renormalize_drive",
              "dressed_coupling_operators"],
    "solver": ["dt", "t_end", "s_max", "ds", "record_stride", "block_steps"],
    "correlation": ["outer_step", "emission_t_max", "emission_threshold", "tail_fit_window"],
    "sweep": ["theta_b_min_pi", "theta_b_max_pi", "theta_b_points", "theta_r_min_pi", "theta_r_max_pi",
              "theta_r_points", "observable", "refine", "xatol_pi", "max_failure_fraction"],
    "scan": ["t_p_list", "scan_eta", "scan_grid_points", "resonant_gamma_coll"],
    "output": ["output_dir", "output_prefix", "save_config", "compare_backends", "export_correlation",
               "save_debug"],
    "run": ["workers", "log_level", "quiet_mode", "save_log"],
}

# Keys whose None default stands for "derived at run time"; they accept floats.
OPTIONAL_FLOAT_KEYS = {"dt", "t_end"}


def section_of(key):
    for section, keys in CONFIG_SECTIONS.items():
        if key in keys:
            return section
    return None


def is_quiet():
    return os.environ.get(QUIET_ENV, "0") == "1"


def env_workers():
    value = os.environ.get(WORKERS_ENV)
    return int(value) if value else None
