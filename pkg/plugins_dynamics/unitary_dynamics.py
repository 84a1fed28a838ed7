#!/usr/bin/env python3
"""
Unitary Dynamics Plugin

Phonon-free backend: the system Hamiltonian of the rotating frame is used as-is,
no frame shift, no drive renormalisation and no memory channels. Cavity loss and
the Markovian Lindblad terms are still applied by the master equation when a
cavity is attached.
"""

import logging

logger = logging.getLogger(__name__)


class UnitaryDynamics:
    """Phonon-free dynamics backend."""

    plugin_params = {}

    plugin_debug_vars = []

    requires_kernel = False

    def __init__(self, config=None):
        self.params = self.plugin_params.copy()
        if config:
            self.set_params(**config)

    def set_params(self, **kwargs):
        for key, value in kwargs.items():
            if key in self.plugin_params:
                self.params[key] = value

    def get_debug_info(self):
        return {"backend": "unitary"}

    def add_debug_info(self, debug_info):
        debug_info.update(self.get_debug_info())

    def energy_shift(self, D):
        return 0.0

    def drive_scale(self, B):
        return 1.0

    def channels(self, table, qd):
        return []
