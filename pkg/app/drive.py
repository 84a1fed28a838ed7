#!/usr/bin/env python3
"""
drive.py

Gaussian pulse envelopes and the dichromatic drive.

Two pulses of equal width ``t_p`` are detuned symmetrically by ±δ from the
emitter frequency (blue: +δ, red: −δ). In the rotating frame the drive enters
the Hamiltonian as ``(1/2)[f(t) σ† + f*(t) σ]`` with

    f(t) = Ω_b(t) e^{−iδt} + Ω_r(t) e^{+iδt},
    Ω_j(t) = Θ_j / (t_p √π) · exp(−(t/t_p)²).

The pulse area Θ_j is the integral of Ω_j over the whole real line.
Units: time in ps, angular frequencies in rad·ps⁻¹.
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

BLUE = "blue"
RED = "red"


@dataclass(frozen=True)
class PulseSpec:
    """Dichromatic pulse pair: areas (rad), width t_p (ps), detuning δ (rad/ps)."""

    theta_b: float
    theta_r: float
    t_p: float
    delta: float

    def __post_init__(self):
        if not self.t_p > 0:
            raise ValueError(f"t_p must be positive, got {self.t_p}")
        if self.theta_b < 0 or self.theta_r < 0:
            raise ValueError(f"pulse areas must be non-negative, got ({self.theta_b}, {self.theta_r})")
        if self.delta < 0:
            raise ValueError(f"delta must be non-negative, got {self.delta}")

    @classmethod
    def from_pi(cls, theta_b_pi: float, theta_r_pi: float, t_p: float, delta: float) -> "PulseSpec":
        """Build from areas given in units of π."""
        return cls(theta_b=theta_b_pi * np.pi, theta_r=theta_r_pi * np.pi, t_p=t_p, delta=delta)

    @classmethod
    def resonant(cls, t_p: float, theta: float = np.pi) -> "PulseSpec":
        """Single resonant pulse (δ = 0), a π pulse by default."""
        return cls(theta_b=theta, theta_r=0.0, t_p=t_p, delta=0.0)

    @classmethod
    def off(cls, t_p: float = 1.0) -> "PulseSpec":
        return cls(theta_b=0.0, theta_r=0.0, t_p=t_p, delta=0.0)

    def eta(self) -> float:
        return self.t_p * self.delta

    @property
    def is_off(self) -> bool:
        return self.theta_b == 0.0 and self.theta_r == 0.0

    def peak_rate(self) -> float:
        """Upper bound of |f(t)|/2, the largest Hamiltonian matrix element."""
        return (self.theta_b + self.theta_r) / (2.0 * self.t_p * np.sqrt(np.pi))

    def swapped(self) -> "PulseSpec":
        return PulseSpec(theta_b=self.theta_r, theta_r=self.theta_b, t_p=self.t_p, delta=self.delta)


def envelope(spec: PulseSpec, which: str, t):
    """Ω_j(t) in rad·ps⁻¹; accepts scalars or arrays."""
    if which == BLUE:
        theta = spec.theta_b
    elif which == RED:
        theta = spec.theta_r
    else:
        raise ValueError(f"pulse must be '{BLUE}' or '{RED}', got {which!r}")
    t = np.asarray(t, dtype=float)
    value = theta / (spec.t_p * np.sqrt(np.pi)) * np.exp(-((t / spec.t_p) ** 2))
    return value if value.ndim else float(value)


def drive_amplitude(spec: PulseSpec, t):
    """Complex coefficient f(t) of (1/2)σ† in the rotating frame."""
    t = np.asarray(t, dtype=float)
    phase = np.exp(-1j * spec.delta * t)
    value = envelope(spec, BLUE, t) * phase + envelope(spec, RED, t) * np.conj(phase)
    return value if np.ndim(value) else complex(value)


def spectral_component_xi(theta: float, eta: float) -> float:
    """ξ = ∫Ω(t)cos(δt)dt = Θ·exp(−η²/4) for the Gaussian envelope."""
    if eta < 0:
        raise ValueError(f"eta must be non-negative, got {eta}")
    return float(theta * np.exp(-(eta ** 2) / 4.0))


def spectral_component_quadrature(spec: PulseSpec, which: str = BLUE, half_width: float = 5.0) -> float:
    """Numerical ∫Ω_j(t)cos(δt)dt over [−half_width·t_p, +half_width·t_p]."""
    bound = half_width * spec.t_p
    value, _ = quad(
        lambda t: envelope(spec, which, t) * np.cos(spec.delta * t),
        -bound, bound, epsabs=1e-13, epsrel=1e-12, limit=500,
    )
    return value


def pulse_area(spec: PulseSpec, which: str, t_min: float, t_max: float) -> float:
    value, _ = quad(lambda t: envelope(spec, which, t), t_min, t_max, epsabs=1e-13, epsrel=1e-12)
    return value
