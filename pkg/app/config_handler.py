# config_handler.py
# Reading, validating and writing configuration files, and turning a merged
# configuration dictionary into the simulator's spec objects.

import configparser
import json
import logging
import os

from app.bath import BathSpec
from app.config import CONFIG_SECTIONS, DEFAULT_VALUES, OPTIONAL_FLOAT_KEYS, section_of
from app.drive import PulseSpec
from app.dynamics import ModelSpec, SolverConfig
from app.errors import ConfigError
from app.plugin_loader import DYNAMICS_GROUP, load_plugin
from app.sps import CavitySpec, CorrelationSettings

logger = logging.getLogger(__name__)

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


def _valid_keys_message():
    return "valid keys: " + ", ".join(sorted(DEFAULT_VALUES))


def check_key(key, section=None):
    """Reject unknown keys and keys placed in the wrong section."""
    if key not in DEFAULT_VALUES:
        raise ConfigError(f"unknown configuration key {key!r}; {_valid_keys_message()}")
    if section is not None:
        expected = section_of(key)
        if section != expected:
            raise ConfigError(
                f"key {key!r} belongs to section [{expected}], found in [{section}]; "
                f"{_valid_keys_message()}"
            )


def convert_value(key, value):
    """Coerce a raw value to the type of the key's default."""
    check_key(key)
    default = DEFAULT_VALUES[key]
    text = value.strip() if isinstance(value, str) else None
    try:
        if isinstance(default, bool):
            if isinstance(value, bool):
                return value
            if text is not None and text.lower() in _TRUE | _FALSE:
                return text.lower() in _TRUE
            raise ValueError(f"expected a boolean, got {value!r}")
        if default is None:
            if value is None or (text is not None and text.lower() in ("none", "")):
                return None
            if key in OPTIONAL_FLOAT_KEYS:
                return float(value)
            return text if text is not None else str(value)
        if isinstance(default, int):
            number = float(value)
            if number != int(number):
                raise ValueError(f"expected an integer, got {value!r}")
            return int(number)
        if isinstance(default, float):
            return float(value)
        return text if text is not None else str(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid value for {key!r}: {exc}") from exc


def load_config(file_path):
    """Load a sectioned .cfg/.ini or flat .json configuration file."""
    if not os.path.isfile(file_path):
        raise ConfigError(f"configuration file not found: {file_path}")
    if file_path.lower().endswith(".json"):
        with open(file_path, "r") as f:
            try:
                raw = json.load(f)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{file_path}: invalid JSON ({exc})") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{file_path}: expected a JSON object")
        return {key: convert_value(key, value) for key, value in raw.items()}

    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read(file_path)
    except configparser.Error as exc:
        raise ConfigError(f"{file_path}: {exc}") from exc
    config = {}
    for section in parser.sections():
        if section not in CONFIG_SECTIONS:
            raise ConfigError(
                f"{file_path}: unknown section [{section}]; valid sections: {', '.join(CONFIG_SECTIONS)}"
            )
        for key, value in parser.items(section):
            check_key(key, section)
            config[key] = convert_value(key, value)
    logger.info("Loaded %d keys from %s", len(config), file_path)
    return config


def get_plugin_default_params(plugin_name):
    plugin_class, _ = load_plugin(DYNAMICS_GROUP, plugin_name)
    return plugin_class.plugin_params


def compose_config(config):
    """Keys whose value differs from both DEFAULT_VALUES and the backend's plugin defaults."""
    plugin_name = config.get("backend", DEFAULT_VALUES["backend"])
    plugin_default_params = get_plugin_default_params(plugin_name)
    config_to_save = {}
    for k, v in config.items():
        if k not in DEFAULT_VALUES:
            continue
        if v != DEFAULT_VALUES[k]:
            if k not in plugin_default_params or v != plugin_default_params[k]:
                config_to_save[k] = v
    logger.debug("Config to save: %s", config_to_save)
    return config_to_save


def _format_value(value):
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


def save_config(config, path="config_out.cfg"):
    """Write the non-default keys, sectioned (.cfg) or flat (.json)."""
    config_to_save = compose_config(config)
    if path.lower().endswith(".json"):
        with open(path, "w") as f:
            json.dump(config_to_save, f, indent=4)
        return config, path
    parser = configparser.ConfigParser()
    parser.optionxform = str
    for section, keys in CONFIG_SECTIONS.items():
        present = {k: _format_value(config_to_save[k]) for k in keys if k in config_to_save}
        if present:
            parser[section] = present
    with open(path, "w") as f:
        parser.write(f)
    return config, path


def save_debug_info(debug_info, path="debug_out.json"):
    with open(path, "w") as f:
        json.dump(debug_info, f, indent=4, default=str)


# ----------------------------------------------------------------------
# Spec builders
# ----------------------------------------------------------------------

def _get(config, key):
    return config.get(key, DEFAULT_VALUES[key])


def _build(factory, **kwargs):
    try:
        return factory(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_pulse(config):
    return _build(PulseSpec.from_pi, theta_b_pi=_get(config, "theta_b_pi"), theta_r_pi=_get(config, "theta_r_pi"),
                  t_p=_get(config, "t_p"), delta=_get(config, "delta"))


def build_bath(config):
    return _build(BathSpec, alpha=_get(config, "alpha"), omega_c=_get(config, "omega_c"),
                  temperature=_get(config, "temperature"))


def build_cavity(config, force=False):
    if not (force or _get(config, "use_cavity")):
        return None
    return _build(CavitySpec, g=_get(config, "g"), kappa=_get(config, "kappa"), gamma_b=_get(config, "gamma_b"),
                  gamma_d=_get(config, "gamma_d"), gamma_coll=_get(config, "gamma_coll"),
                  n_max=_get(config, "n_max"))


def backend_options(config):
    backend = _get(config, "backend")
    try:
        params = get_plugin_default_params(backend)
    except ImportError as exc:
        raise ConfigError(str(exc)) from exc
    return {key: _get(config, key) for key in params}


def build_model(config, with_cavity=None):
    """ModelSpec from config; ``with_cavity`` overrides the use_cavity switch."""
    use_cavity = _get(config, "use_cavity") if with_cavity is None else with_cavity
    pulse = build_pulse(config)
    initial_state = _get(config, "initial_state")
    if initial_state == "excited":
        pulse = PulseSpec.off(pulse.t_p)
    return _build(
        ModelSpec,
        pulse=pulse,
        bath=build_bath(config),
        cavity=build_cavity(config, force=True) if use_cavity else None,
        backend=_get(config, "backend"),
        initial_state=initial_state,
        backend_options=backend_options(config),
    )


def build_solver(config, model):
    return _build(
        SolverConfig.for_model,
        model=model,
        t_end=_get(config, "t_end"),
        dt=_get(config, "dt"),
        s_max=_get(config, "s_max"),
        ds=_get(config, "ds"),
        record_stride=_get(config, "record_stride"),
        block_steps=_get(config, "block_steps"),
    )


def build_correlation_settings(config):
    return _build(
        CorrelationSettings,
        outer_step=_get(config, "outer_step"),
        emission_t_max=_get(config, "emission_t_max"),
        emission_threshold=_get(config, "emission_threshold"),
        tail_fit_window=_get(config, "tail_fit_window"),
        s_max=_get(config, "s_max"),
        ds=_get(config, "ds"),
        block_steps=_get(config, "block_steps"),
        dt=_get(config, "dt"),
    )


def build_sweep_spec(config):
    from app.xsweep import AxisRange, SweepSpec

    model = build_model(config, with_cavity=_get(config, "observable") != "P_X")
    return _build(
        SweepSpec,
        theta_b_range=_build(AxisRange, min_pi=_get(config, "theta_b_min_pi"), max_pi=_get(config, "theta_b_max_pi"),
                             points=_get(config, "theta_b_points")),
        theta_r_range=_build(AxisRange, min_pi=_get(config, "theta_r_min_pi"), max_pi=_get(config, "theta_r_max_pi"),
                             points=_get(config, "theta_r_points")),
        fixed=model,
        observable=_get(config, "observable"),
        dt=_get(config, "dt"),
        correlation=build_correlation_settings(config),
        max_failure_fraction=_get(config, "max_failure_fraction"),
    )


def sweep_spec_to_config(spec):
    """Inverse of build_sweep_spec, as a flat configuration dictionary."""
    model = spec.fixed
    pulse, bath, cavity = model.pulse, model.bath, model.cavity
    config = {
        "theta_b_min_pi": spec.theta_b_range.min_pi,
        "theta_b_max_pi": spec.theta_b_range.max_pi,
        "theta_b_points": spec.theta_b_range.points,
        "theta_r_min_pi": spec.theta_r_range.min_pi,
        "theta_r_max_pi": spec.theta_r_range.max_pi,
        "theta_r_points": spec.theta_r_range.points,
        "observable": spec.observable,
        "max_failure_fraction": spec.max_failure_fraction,
        "dt": spec.dt,
        "t_p": pulse.t_p,
        "delta": pulse.delta,
        "alpha": bath.alpha,
        "omega_c": bath.omega_c,
        "temperature": bath.temperature,
        "backend": model.backend,
        "initial_state": model.initial_state,
        "use_cavity": cavity is not None,
        "outer_step": spec.correlation.outer_step,
        "emission_t_max": spec.correlation.emission_t_max,
        "emission_threshold": spec.correlation.emission_threshold,
        "tail_fit_window": spec.correlation.tail_fit_window,
        "s_max": spec.correlation.s_max,
        "ds": spec.correlation.ds,
        "block_steps": spec.correlation.block_steps,
    }
    config.update(model.backend_options)
    if cavity is not None:
        config.update({k: getattr(cavity, k) for k in ("g", "kappa", "gamma_b", "gamma_d", "gamma_coll", "n_max")})
    return config
