# config_merger.py

import logging

from app.config_handler import check_key, convert_value
from app.errors import ConfigError

logger = logging.getLogger(__name__)

# CLI attributes that are not configuration keys
NON_CONFIG_ARGS = {"command", "config", "set"}


def process_unknown_args(unknown_args):
    """``--key value`` pairs left over by argparse, validated and typed."""
    if len(unknown_args) % 2:
        raise ConfigError(f"unpaired command-line arguments: {' '.join(unknown_args)}")
    overrides = {}
    for i in range(0, len(unknown_args), 2):
        flag = unknown_args[i]
        if not flag.startswith("--"):
            raise ConfigError(f"expected a --key flag, got {flag!r}")
        key = flag[2:].replace("-", "_")
        overrides[key] = convert_value(key, unknown_args[i + 1])
    return overrides


def parse_set_overrides(items):
    """``--set key=value`` items as a typed dictionary."""
    overrides = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        overrides[key.strip()] = convert_value(key.strip(), value)
    return overrides


def merge_config(defaults, plugin_params, file_config, cli_args, unknown_args, set_overrides=None):
    """
    Merge configuration from multiple sources, later ones winning:

    1. 'defaults': DEFAULT_VALUES.
    2. 'plugin_params': default parameters of the selected dynamics backend.
    3. 'file_config': configuration loaded with --config.
    4. 'cli_args': explicit CLI flags (argparse namespace as a dict; None means not given).
    5. 'unknown_args': extra ``--key value`` pairs.
    6. 'set_overrides': ``--set key=value`` items.
    """
    merged_config = dict(defaults)
    for k, v in plugin_params.items():
        logger.debug("Merging plugin param: %s = %s", k, v)
        merged_config[k] = v
    for k, v in file_config.items():
        logger.debug("Merging from file config: %s = %s", k, v)
        merged_config[k] = v
    for k, v in cli_args.items():
        if k in NON_CONFIG_ARGS or v is None:
            continue
        check_key(k)
        logger.debug("Merging from CLI args: %s = %s", k, v)
        merged_config[k] = v
    for k, v in unknown_args.items():
        merged_config[k] = v
    for k, v in (set_overrides or {}).items():
        logger.debug("Merging --set override: %s = %s", k, v)
        merged_config[k] = v
    logger.debug("Final merged configuration: %s", merged_config)
    return merged_config
