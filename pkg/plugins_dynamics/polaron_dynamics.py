#!/usr/bin/env python3
"""
Polaron Dynamics Plugin

Polaron-frame master equation. The polaron transformation already shifts the
exciton to ω_X − D, so H_S carries only the drive, renormalised by
B = exp(−φ(0)/2). Dissipation is drive-activated through the two quadrature
operators

    A_x(t) = (B/2)[f(t)σ† + f*(t)σ]
    A_y(t) = i(B/2)[f(t)σ† − f*(t)σ]

with kernels C_xx(s) = B²(cosh φ(s) − 1) and C_yy(s) = B² sinh φ(s).
"""

import logging

import numpy as np

from app.dynamics import MemoryChannel

logger = logging.getLogger(__name__)


class PolaronDynamics:
    """Polaron master-equation backend (two memory channels)."""

    plugin_params = {
        "renormalize_drive": True,
        # B prefactor inside A_x, A_y; the kernels carry B² either way
        "dressed_coupling_operators": True,
    }

    plugin_debug_vars = ["renormalize_drive", "dressed_coupling_operators"]

    requires_kernel = True

    def __init__(self, config=None):
        self.params = self.plugin_params.copy()
        if config:
            self.set_params(**config)

    def set_params(self, **kwargs):
        for key, value in kwargs.items():
            if key in self.plugin_params:
                self.params[key] = value

    def get_debug_info(self):
        debug_info = {var: self.params.get(var) for var in self.plugin_debug_vars}
        debug_info["backend"] = "polaron"
        return debug_info

    def add_debug_info(self, debug_info):
        debug_info.update(self.get_debug_info())

    def energy_shift(self, D):
        return 0.0

    def drive_scale(self, B):
        return B if self.params["renormalize_drive"] else 1.0

    def channels(self, table, qd):
        if table is None or table.spec.is_free:
            return []
        B = table.B
        prefactor = 0.5 * B if self.params["dressed_coupling_operators"] else 0.5
        sigma = qd.sigma.entries
        sigma_dag = qd.sigma_dag.entries

        def a_x(f_values):
            f = np.asarray(f_values)[:, None, None]
            return prefactor * (f * sigma_dag + f.conj() * sigma)

        def a_y(f_values):
            f = np.asarray(f_values)[:, None, None]
            return 1j * prefactor * (f * sigma_dag - f.conj() * sigma)

        def c_xx(s):
            return B ** 2 * (np.cosh(table.phi_at(s)) - 1.0)

        def c_yy(s):
            return B ** 2 * np.sinh(table.phi_at(s))

        return [
            MemoryChannel(name="A_x", kernel=c_xx, operators=a_x),
            MemoryChannel(name="A_y", kernel=c_yy, operators=a_y),
        ]
