#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
plugin_loader.py

Loads dynamics backend plugins through the importlib.metadata entry points API.
When the package is used from a source checkout (no installed entry points) the
built-in backends are resolved from ``BUILTIN_PLUGINS`` instead.
"""

import importlib
import logging
from importlib.metadata import entry_points

logger = logging.getLogger(__name__)

DYNAMICS_GROUP = "dynamics.plugins"

BUILTIN_PLUGINS = {
    DYNAMICS_GROUP: {
        "unitary": "plugins_dynamics.unitary_dynamics:UnitaryDynamics",
        "weak_coupling": "plugins_dynamics.weak_coupling_dynamics:WeakCouplingDynamics",
        "polaron": "plugins_dynamics.polaron_dynamics:PolaronDynamics",
    },
}


def _load_builtin(plugin_group: str, plugin_name: str):
    target = BUILTIN_PLUGINS.get(plugin_group, {}).get(plugin_name)
    if target is None:
        raise ImportError(f"Plugin {plugin_name} not found in group {plugin_group}.")
    module_name, class_name = target.split(":")
    return getattr(importlib.import_module(module_name), class_name)


def load_plugin(plugin_group: str, plugin_name: str):
    """
    Load a plugin class from a specified entry point group using its name.

    Args:
        plugin_group (str): The entry point group from which to load the plugin.
        plugin_name (str): The name of the plugin to load.

    Returns:
        tuple: The plugin class and the list of keys of its plugin_params.

    Raises:
        ImportError: If the plugin is found neither in the entry points nor in
            the built-in table.
    """
    logger.debug("Attempting to load plugin: %s from group: %s", plugin_name, plugin_group)
    group_entries = entry_points().select(group=plugin_group)
    entry_point = next((ep for ep in group_entries if ep.name == plugin_name), None)
    if entry_point is not None:
        plugin_class = entry_point.load()
    else:
        plugin_class = _load_builtin(plugin_group, plugin_name)
    required_params = list(plugin_class.plugin_params.keys())
    logger.debug("Loaded plugin %s with params: %s", plugin_name, plugin_class.plugin_params)
    return plugin_class, required_params


def get_plugin_params(plugin_group: str, plugin_name: str):
    """Return the plugin_params dictionary of a plugin without instantiating it."""
    plugin_class, _ = load_plugin(plugin_group, plugin_name)
    return dict(plugin_class.plugin_params)


def available_plugins(plugin_group: str = DYNAMICS_GROUP):
    names = set(BUILTIN_PLUGINS.get(plugin_group, {}))
    names.update(ep.name for ep in entry_points().select(group=plugin_group))
    return sorted(names)
