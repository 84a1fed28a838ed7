#!/usr/bin/env python3
"""
Weak Coupling Dynamics Plugin

Second-order (Redfield-type) phonon master equation in the frame rotating at the
polaron-shifted exciton frequency ω_X − D:

    H_S(t) = +D|X⟩⟨X| + ½[f(t)σ† + f*(t)σ]
    K(t)[ρ] = ∫₀^∞ ds C(s) [X̂(t−s, t) ρ, X] + h.c.

The bare exciton sits at +D in this frame; the imaginary part of ∫C(s)ds
(−∫J(ω)/ω dω = −D) moves it back, so the pulses are detuned by ±δ from
the renormalised line.

The plugin only declares the frame shift and the single memory channel
(operator X = σ†σ, kernel C(s)); the convolution itself is done by
:class:`app.dynamics.MasterEquation`.
"""

import logging

import numpy as np

from app.dynamics import MemoryChannel

logger = logging.getLogger(__name__)


class WeakCouplingDynamics:
    """Weak-coupling phonon backend with memory kernel C(s)."""

    plugin_params = {
        # False drops the +D term, leaving the line shifted by −D from the frame
        "include_polaron_shift": True,
    }

    plugin_debug_vars = ["include_polaron_shift"]

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
        debug_info["backend"] = "weak_coupling"
        return debug_info

    def add_debug_info(self, debug_info):
        debug_info.update(self.get_debug_info())

    def energy_shift(self, D):
        """Coefficient of |X⟩⟨X| in H_S."""
        return D if self.params["include_polaron_shift"] else 0.0

    def drive_scale(self, B):
        return 1.0

    def channels(self, table, qd):
        if table is None or table.spec.is_free:
            return []
        X = qd.X.entries

        def operators(f_values):
            return np.broadcast_to(X, (len(f_values),) + X.shape)

        return [MemoryChannel(name="X", kernel=table.C_at, operators=operators)]
