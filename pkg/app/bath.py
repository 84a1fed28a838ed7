#!/usr/bin/env python3
"""
bath.py

Longitudinal-acoustic phonon environment of the quantum dot.

The bath enters only through the super-Ohmic spectral density
J(ω) = α ω³ exp(−ω²/ω_c²) and the thermal factor coth(ħω / 2k_BT). From it we
derive the polaron shift D, the drive renormalisation B and the two correlation
kernels used by the master equations:

    C(s) = ∫ J(ω) [coth(ħω/2k_BT) cos ωs − i sin ωs] dω      (weak coupling)
    φ(s) = ∫ J(ω)/ω² [coth(ħω/2k_BT) cos ωs − i sin ωs] dω   (polaron)

Frequencies are angular, in rad·ps⁻¹ (the "THz" of the physics literature is
read as 10¹² rad·s⁻¹); ħ = 1 throughout.

Quadrature runs only when a :class:`KernelTable` is built; every dissipator
afterwards interpolates the table.
"""

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import constants
from scipy.integrate import IntegrationWarning, quad, trapezoid

from app.errors import QuadratureError

logger = logging.getLogger(__name__)

# Quadrature contract: ω ∈ [0, 8 ω_c]; e^{-64} truncation is far below tolerance.
CUTOFF_MULTIPLE = 8.0
QUAD_EPSABS = 1e-10
QUAD_EPSREL = 1e-10
QUAD_LIMIT = 1000
# Below this fraction of ω_c, ω·coth(ω/2ν_T) is replaced by its Laurent expansion.
SMALL_OMEGA_FRACTION = 1e-3
DEFAULT_DS = 0.01
DEFAULT_S_MAX = 8.0
TRUNCATION_CRITERION = 1e-4


@dataclass(frozen=True)
class BathSpec:
    """Phonon bath: coupling α (ps²), cutoff ω_c (rad/ps), temperature (K)."""

    alpha: float = 0.03
    omega_c: float = 2.2
    temperature: float = 4.0

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if not self.omega_c > 0:
            raise ValueError(f"omega_c must be > 0, got {self.omega_c}")
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")

    @property
    def is_free(self) -> bool:
        return self.alpha == 0.0


def thermal_frequency(spec: BathSpec) -> float:
    """ν_T = k_B T / ħ in rad·ps⁻¹ (≈ 0.5236 at 4 K)."""
    return constants.k * spec.temperature / constants.hbar * 1e-12


def spectral_density(spec: BathSpec, omega):
    """J(ω) = α ω³ exp(−ω²/ω_c²)."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega < 0):
        raise ValueError("spectral density is defined for omega >= 0")
    value = spec.alpha * omega ** 3 * np.exp(-((omega / spec.omega_c) ** 2))
    return value if value.ndim else float(value)


def spectral_peak(spec: BathSpec) -> float:
    """Frequency of the maximum of J(ω), ω_c·√(3/2)."""
    return spec.omega_c * np.sqrt(1.5)


def polaron_shift(spec: BathSpec) -> float:
    """D = ∫J(ω)/ω dω = (√π/4) α ω_c³."""
    return float(np.sqrt(np.pi) / 4.0 * spec.alpha * spec.omega_c ** 3)


def polaron_shift_quadrature(spec: BathSpec) -> float:
    return _integrate(lambda w: spec.alpha * w ** 2 * math.exp(-((w / spec.omega_c) ** 2)), spec, "D")


def _omega_coth(omega: float, nu_t: float, omega_small: float) -> float:
    """ω·coth(ω / 2ν_T), finite at ω = 0."""
    if nu_t == 0.0:
        return omega
    if omega < omega_small:
        return 2.0 * nu_t + omega ** 2 / (6.0 * nu_t)
    return omega / math.tanh(omega / (2.0 * nu_t))


def _integrate(integrand, spec: BathSpec, label: str) -> float:
    upper = CUTOFF_MULTIPLE * spec.omega_c
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            value, _ = quad(integrand, 0.0, upper, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=QUAD_LIMIT)
        except IntegrationWarning as exc:
            raise QuadratureError(f"quadrature for {label} did not converge: {exc}") from exc
    return value


def _kernel_at(spec: BathSpec, s: float, power: int) -> complex:
    """∫ ω^power e^{−ω²/ω_c²} α [coth cos ωs − i sin ωs] dω with power 3 (C) or 1 (φ)."""
    if s < 0:
        raise ValueError(f"correlation kernels are evaluated for s >= 0, got {s}")
    if spec.is_free:
        return 0.0j
    nu_t = thermal_frequency(spec)
    omega_small = SMALL_OMEGA_FRACTION * spec.omega_c
    alpha, wc = spec.alpha, spec.omega_c

    def real_part(w):
        return alpha * w ** (power - 1) * math.exp(-((w / wc) ** 2)) * _omega_coth(w, nu_t, omega_small) * math.cos(w * s)

    def imag_part(w):
        return -alpha * w ** power * math.exp(-((w / wc) ** 2)) * math.sin(w * s)

    label = "C" if power == 3 else "phi"
    re = _integrate(real_part, spec, f"Re {label}({s:g})")
    im = _integrate(imag_part, spec, f"Im {label}({s:g})") if s > 0 else 0.0
    return complex(re, im)


def correlation_C(spec: BathSpec, s):
    """Weak-coupling bath correlation C(s); scalar or array of s ≥ 0."""
    s_arr = np.asarray(s, dtype=float)
    values = np.array([_kernel_at(spec, float(x), 3) for x in s_arr.ravel()], dtype=complex)
    return values.reshape(s_arr.shape) if s_arr.ndim else complex(values[0])


def correlation_phi(spec: BathSpec, s):
    """Polaron phonon correlation φ(s); scalar or array of s ≥ 0."""
    s_arr = np.asarray(s, dtype=float)
    values = np.array([_kernel_at(spec, float(x), 1) for x in s_arr.ravel()], dtype=complex)
    return values.reshape(s_arr.shape) if s_arr.ndim else complex(values[0])


def renorm_B(spec: BathSpec) -> float:
    """B = exp(−φ(0)/2); 1 for a phonon-free bath."""
    return float(np.exp(-0.5 * correlation_phi(spec, 0.0).real))


@dataclass(frozen=True, eq=False)
class KernelTable:
    """Uniform tabulation of C(s) and φ(s) on [0, s_max], with D and B."""

    spec: BathSpec
    s_grid: np.ndarray = field(repr=False)
    C_values: np.ndarray = field(repr=False)
    phi_values: np.ndarray = field(repr=False)
    D: float
    B: float

    def __post_init__(self):
        for name in ("s_grid", "C_values", "phi_values"):
            arr = np.array(getattr(self, name))
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def ds(self) -> float:
        return float(self.s_grid[1] - self.s_grid[0])

    @property
    def s_max(self) -> float:
        return float(self.s_grid[-1])

    @property
    def truncation_ratio(self) -> float:
        c0 = abs(self.C_values[0])
        return float(abs(self.C_values[-1]) / c0) if c0 > 0 else 0.0

    @staticmethod
    def _interp(s, grid, values):
        s = np.asarray(s, dtype=float)
        if np.any(s < 0) or np.any(s > grid[-1] + 1e-12):
            raise ValueError(f"kernel requested outside [0, {grid[-1]}]")
        return np.interp(s, grid, values.real) + 1j * np.interp(s, grid, values.imag)

    def C_at(self, s):
        return self._interp(s, self.s_grid, self.C_values)

    def phi_at(self, s):
        return self._interp(s, self.s_grid, self.phi_values)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "s": self.s_grid,
            "re_C": self.C_values.real,
            "im_C": self.C_values.imag,
            "re_phi": self.phi_values.real,
            "im_phi": self.phi_values.imag,
        })


def build_kernel_table(spec: BathSpec, ds: float = DEFAULT_DS, s_max: float = DEFAULT_S_MAX) -> KernelTable:
    """Tabulate C and φ on a uniform grid; the only place quadrature runs."""
    if not ds > 0:
        raise ValueError(f"ds must be positive, got {ds}")
    if not s_max > ds:
        raise ValueError(f"s_max must exceed ds, got s_max={s_max}, ds={ds}")
    n = int(round(s_max / ds))
    s_grid = np.arange(n + 1) * ds
    if spec.is_free:
        zeros = np.zeros(n + 1, dtype=complex)
        return KernelTable(spec=spec, s_grid=s_grid, C_values=zeros, phi_values=zeros.copy(), D=0.0, B=1.0)

    logger.info("Building kernel table: %d nodes, ds = %g ps, s_max = %g ps", n + 1, ds, s_max)
    C_values = correlation_C(spec, s_grid)
    phi_values = correlation_phi(spec, s_grid)
    table = KernelTable(
        spec=spec,
        s_grid=s_grid,
        C_values=C_values,
        phi_values=phi_values,
        D=polaron_shift(spec),
        B=float(np.exp(-0.5 * phi_values[0].real)),
    )
    if table.truncation_ratio > TRUNCATION_CRITERION:
        logger.warning(
            "Kernel truncation criterion not met: |C(s_max)|/|C(0)| = %.2e > %.0e (s_max = %g ps)",
            table.truncation_ratio, TRUNCATION_CRITERION, s_max,
        )
    return table


def one_sided_spectrum(table: KernelTable, omega: float) -> complex:
    """Γ(ω) = ∫₀^{s_max} C(s) e^{iωs} ds.

    Re Γ(+ω) is the phonon-emission rate density and Re Γ(−ω) the absorption
    one; at low temperature Re Γ(+ω) > Re Γ(−ω).
    """
    return complex(trapezoid(table.C_values * np.exp(1j * omega * table.s_grid), table.s_grid))
