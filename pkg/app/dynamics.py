#!/usr/bin/env python3
"""
dynamics.py

Time-dependent system Hamiltonians and the master-equation solver shared by the
three dynamics backends (``unitary``, ``weak_coupling``, ``polaron``).

Every backend is reduced to the same time-local generator

    dρ/dt = −i[H(t), ρ] + Σ_i (Λ_i ρ A_i − A_i Λ_i ρ + A_i† ρ Λ_i† − ρ Λ_i† A_i†)
            + κ L_a[ρ] + Γ_b L_σ[ρ] + γ_d L_X[ρ]

with memory operators Λ_i(t) = ∫₀^{s_max} ds C_i(s) Â_i(t−s, t). A backend plugin
only declares the frame shift of |X⟩⟨X|, the drive renormalisation and its
memory channels (A_i, C_i); see ``plugins_dynamics``.

Grid and caching:

* RK4 steps of size dt on [t_start, t_end]; the generator is needed at the
  half-step grid τ_j = t_start + j·dt/2.
* U(τ_j, t_start) is accumulated on that grid with a fourth-order Magnus
  integrator (exactly unitary). With Y_i(τ) = U†(τ) A_i(τ) U(τ),
  Â_i(t−s, t) = U(t) Y_i(t−s) U†(t), so all Λ_i on a block of the grid follow
  from one FFT convolution of Y_i with the trapezoid-weighted kernel.
* Blocks are processed forward in time and the propagator cache only retains
  the s_max history, so cavity runs of several hundred ps stay in memory.

Units: time in ps, energies and rates in rad·ps⁻¹, ħ = 1.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, NamedTuple, Optional

import numpy as np
import pandas as pd
from scipy.linalg import expm
from scipy.signal import fftconvolve

from app.bath import (
    DEFAULT_DS,
    DEFAULT_S_MAX,
    BathSpec,
    KernelTable,
    build_kernel_table,
    polaron_shift,
    renorm_B,
)
from app.drive import PulseSpec, drive_amplitude
from app.errors import PhysicsInvariantError, PropagatorCacheMiss
from app.plugin_loader import DYNAMICS_GROUP, load_plugin
from app.qcore import (
    EXCITED,
    GROUND,
    POSITIVITY_FLOOR,
    TRACE_TOLERANCE,
    DensityMatrix,
    HilbertSpace,
    Operator,
    build_cavity_operators,
    build_qd_operators,
    hamiltonian_superop,
    lindblad_superop,
    spost,
    spre,
    sprepost,
    trace_functional,
    vec,
)

logger = logging.getLogger(__name__)

BACKENDS = ("unitary", "weak_coupling", "polaron")
INITIAL_STATES = ("ground", "excited")

# Step-size contract
MAX_DT = 0.005
STEPS_PER_PERIOD = 40
MAX_PHASE_PER_STEP = 0.025
# The window opens at −3 t_p and P_X is read at +3 t_p
PULSE_MARGIN = 3.0
DEFAULT_BLOCK_STEPS = 1024
GRID_TOLERANCE = 1e-9

_GAUSS_NODES = (0.5 - math.sqrt(3.0) / 6.0, 0.5 + math.sqrt(3.0) / 6.0)


def _dag(A: np.ndarray) -> np.ndarray:
    return np.swapaxes(A.conj(), -1, -2)


# ----------------------------------------------------------------------
# Model and solver settings
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ModelSpec:
    """Physical model: drive, bath, optional cavity and the dynamics backend.

    ``cavity`` is any object with the fields of :class:`app.sps.CavitySpec`.
    ``backend_options`` are forwarded to the backend plugin's ``set_params``.
    """

    pulse: PulseSpec
    bath: BathSpec = field(default_factory=BathSpec)
    cavity: Optional[object] = None
    backend: str = "weak_coupling"
    initial_state: str = "ground"
    backend_options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        if self.initial_state not in INITIAL_STATES:
            raise ValueError(f"initial_state must be one of {INITIAL_STATES}, got {self.initial_state!r}")
        if self.initial_state == "excited" and not self.pulse.is_off:
            raise ValueError("an excited initial state requires theta_b = theta_r = 0")
        object.__setattr__(self, "backend_options", dict(self.backend_options))
        # unitary dynamics ignores the bath entirely
        if self.backend == "unitary" and not self.bath.is_free:
            object.__setattr__(self, "bath", replace(self.bath, alpha=0.0))

    def space(self) -> HilbertSpace:
        if self.cavity is None:
            return HilbertSpace()
        return HilbertSpace.with_cavity(self.cavity.n_max)

    def initial_density(self) -> DensityMatrix:
        level = EXCITED if self.initial_state == "excited" else GROUND
        return DensityMatrix.basis(self.space(), level, 0)

    def with_pulse(self, pulse: PulseSpec) -> "ModelSpec":
        return replace(self, pulse=pulse)

    def with_backend(self, backend: str) -> "ModelSpec":
        return replace(self, backend=backend)

    def with_cavity(self, cavity) -> "ModelSpec":
        return replace(self, cavity=cavity)

    def without_phonons(self) -> "ModelSpec":
        return replace(self, bath=replace(self.bath, alpha=0.0))


@dataclass(frozen=True)
class SolverConfig:
    """Fixed-step RK4 discretisation of [t_start, t_end]."""

    dt: float
    t_start: float
    t_end: float
    s_max: float = DEFAULT_S_MAX
    ds: float = DEFAULT_DS
    record_stride: int = 1
    block_steps: int = DEFAULT_BLOCK_STEPS
    # Early stop once ⟨σ†σ⟩ + ⟨a†a⟩ < stop_threshold at t ≥ stop_after (recorded steps only)
    stop_threshold: Optional[float] = None
    stop_after: Optional[float] = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_end > self.t_start:
            raise ValueError(f"t_end ({self.t_end}) must exceed t_start ({self.t_start})")
        if self.record_stride < 1 or self.block_steps < 1:
            raise ValueError("record_stride and block_steps must be >= 1")
        if not (self.s_max > 0 and self.ds > 0):
            raise ValueError("s_max and ds must be positive")
        steps = (self.t_end - self.t_start) / self.dt
        if abs(steps - round(steps)) > 1e-6:
            raise ValueError(
                f"window [{self.t_start}, {self.t_end}] is not an integer number of steps dt = {self.dt}"
            )

    @property
    def n_steps(self) -> int:
        return int(round((self.t_end - self.t_start) / self.dt))

    @property
    def half_step(self) -> float:
        return 0.5 * self.dt

    def times(self) -> np.ndarray:
        return self.t_start + np.arange(self.n_steps + 1) * self.dt

    @staticmethod
    def max_dt(pulse: PulseSpec) -> float:
        """Largest admissible step for a pulse: 40 steps per e^{iδt} period, bounded phase per step."""
        bound = MAX_DT
        if pulse.delta > 0:
            bound = min(bound, 2.0 * np.pi / pulse.delta / STEPS_PER_PERIOD)
        rate = pulse.peak_rate()
        if rate > 0:
            bound = min(bound, MAX_PHASE_PER_STEP / rate)
        return bound

    @classmethod
    def for_model(
        cls,
        model: ModelSpec,
        t_end: Optional[float] = None,
        dt: Optional[float] = None,
        align: Optional[float] = None,
        **kwargs,
    ) -> "SolverConfig":
        """Window [−3t_p, t_end] with the largest admissible dt.

        With ``align`` the step divides ``align`` exactly, t_end is rounded up to
        a multiple of it and, unless given, ``record_stride`` records one state
        per ``align`` interval.
        """
        t_p = model.pulse.t_p
        t_start = -PULSE_MARGIN * t_p
        if t_end is None:
            t_end = PULSE_MARGIN * t_p
        dt_bound = cls.max_dt(model.pulse) if dt is None else min(dt, cls.max_dt(model.pulse))
        if align is not None:
            per_align = max(1, math.ceil(align / dt_bound - 1e-9))
            n_align = max(1, math.ceil((t_end - t_start) / align - 1e-9))
            kwargs.setdefault("record_stride", per_align)
            return cls(dt=align / per_align, t_start=t_start, t_end=t_start + n_align * align, **kwargs)
        n = max(1, math.ceil((t_end - t_start) / dt_bound - 1e-9))
        return cls(dt=(t_end - t_start) / n, t_start=t_start, t_end=t_end, **kwargs)


# ----------------------------------------------------------------------
# Hamiltonian
# ----------------------------------------------------------------------

class MemoryChannel(NamedTuple):
    """One phonon channel: kernel C_i(s) and operators A_i(τ) built from the raw drive f(τ)."""

    name: str
    kernel: Callable[[np.ndarray], np.ndarray]
    operators: Callable[[np.ndarray], np.ndarray]


def load_backend(model: ModelSpec):
    plugin_class, _ = load_plugin(DYNAMICS_GROUP, model.backend)
    plugin = plugin_class(model.backend_options)
    plugin.set_params(**model.backend_options)
    return plugin


def bath_constants(bath: BathSpec, table: Optional[KernelTable] = None):
    """(D, B) from the table when available, otherwise from the bath directly."""
    if bath.is_free:
        return 0.0, 1.0
    if table is not None:
        return table.D, table.B
    return polaron_shift(bath), renorm_B(bath)


class SystemHamiltonian:
    """H(t) = shift·X + ½[F(t)σ† + F*(t)σ] + g(a†σ + aσ†), F = scale·f."""

    def __init__(self, model: ModelSpec, energy_shift: float = 0.0, drive_scale: float = 1.0):
        self.model = model
        self.energy_shift = energy_shift
        self.drive_scale = drive_scale
        self.space = model.space()
        self.qd = build_qd_operators(self.space)
        self.cavity_ops = build_cavity_operators(self.space) if self.space.has_cavity else None
        static = energy_shift * self.qd.X.entries
        if self.cavity_ops is not None:
            a, a_dag = self.cavity_ops.a.entries, self.cavity_ops.a_dag.entries
            sigma, sigma_dag = self.qd.sigma.entries, self.qd.sigma_dag.entries
            static = static + model.cavity.g * (a_dag @ sigma + a @ sigma_dag)
        self._static = static

    @classmethod
    def from_model(cls, model: ModelSpec, table: Optional[KernelTable] = None, plugin=None):
        plugin = plugin if plugin is not None else load_backend(model)
        D, B = bath_constants(model.bath, table)
        return cls(model, plugin.energy_shift(D), plugin.drive_scale(B))

    def drive(self, times) -> np.ndarray:
        """Raw complex drive f(τ) (before renormalisation) as a 1-D array."""
        return np.atleast_1d(drive_amplitude(self.model.pulse, np.atleast_1d(times)))

    def __call__(self, times) -> np.ndarray:
        F = self.drive_scale * self.drive(times)[:, None, None]
        coupling = F * self.qd.sigma_dag.entries + F.conj() * self.qd.sigma.entries
        return self._static + 0.5 * coupling

    def at(self, t: float) -> Operator:
        return Operator(self.space, self(np.array([t]))[0])


def hamiltonian_at(model: ModelSpec, t: float, table: Optional[KernelTable] = None, plugin=None) -> Operator:
    """System Hamiltonian of the backend's frame at time t."""
    return SystemHamiltonian.from_model(model, table, plugin).at(t)


# ----------------------------------------------------------------------
# Propagator cache
# ----------------------------------------------------------------------

class PropagatorCache:
    """U(τ_j, t_start) on the grid τ_j = t_start + j·h, filled forward on demand.

    Indices below zero map to the identity (the drive is negligible before the
    window opens). Entries can be released once no memory integral needs them;
    asking for a released or out-of-grid index raises PropagatorCacheMiss.
    """

    def __init__(self, hamiltonian: Callable[[np.ndarray], np.ndarray], t_start: float, h: float,
                 n_points: int, dim: int):
        self._hamiltonian = hamiltonian
        self.t_start = t_start
        self.h = h
        self.n_points = n_points
        self.dim = dim
        self._store = np.eye(dim, dtype=complex)[None]
        self._lo = 0

    @property
    def filled(self) -> int:
        return self._lo + len(self._store)

    def time(self, j: int) -> float:
        return self.t_start + j * self.h

    def index(self, t: float) -> int:
        j = int(round((t - self.t_start) / self.h))
        if abs(self.time(j) - t) > GRID_TOLERANCE * max(1.0, abs(t)):
            raise ValueError(f"t = {t} ps is not on the propagator grid (h = {self.h} ps)")
        if not 0 <= j < self.n_points:
            raise PropagatorCacheMiss(
                f"t = {t} ps outside the cached window [{self.t_start}, {self.time(self.n_points - 1)}]"
            )
        return j

    def _step_propagators(self, j_from: int, j_to: int) -> np.ndarray:
        """Magnus-4 propagators over [τ_{j−1}, τ_j] for j in [j_from, j_to)."""
        left = self.t_start + (np.arange(j_from, j_to) - 1) * self.h
        A1 = -1j * self._hamiltonian(left + _GAUSS_NODES[0] * self.h)
        A2 = -1j * self._hamiltonian(left + _GAUSS_NODES[1] * self.h)
        omega = 0.5 * self.h * (A1 + A2) + (math.sqrt(3.0) / 12.0) * self.h ** 2 * (A2 @ A1 - A1 @ A2)
        return expm(omega)

    def extend(self, j_hi: int):
        """Make U available up to index j_hi inclusive."""
        if j_hi >= self.n_points:
            raise PropagatorCacheMiss(
                f"propagator index {j_hi} beyond the time grid ({self.n_points} points)"
            )
        start = self.filled
        if j_hi < start:
            return
        steps = self._step_propagators(start, j_hi + 1)
        new = np.empty_like(steps)
        current = self._store[-1]
        for i, step in enumerate(steps):
            current = step @ current
            new[i] = current
        self._store = np.concatenate([self._store, new])

    def get(self, j0: int, j1: int) -> np.ndarray:
        """Stack of U for indices [j0, j1)."""
        if j1 <= j0:
            return np.empty((0, self.dim, self.dim), dtype=complex)
        if j1 > self.filled:
            self.extend(j1 - 1)
        first = max(j0, 0)
        if first < self._lo and first < j1:
            raise PropagatorCacheMiss(f"propagator index {first} was released (cache starts at {self._lo})")
        n_before = min(j1, 0) - j0 if j0 < 0 else 0
        stored = self._store[first - self._lo: j1 - self._lo] if j1 > 0 else self._store[:0]
        if n_before:
            identities = np.broadcast_to(np.eye(self.dim, dtype=complex), (n_before, self.dim, self.dim))
            return np.concatenate([identities, stored])
        return stored

    def at(self, j: int) -> np.ndarray:
        return self.get(j, j + 1)[0]

    def release(self, j_lo: int):
        """Forget entries below j_lo (the newest entry is always kept)."""
        j_lo = min(j_lo, self.filled - 1)
        if j_lo > self._lo:
            self._store = self._store[j_lo - self._lo:].copy()
            self._lo = j_lo


def propagator(model: ModelSpec, t_from: float, t_to: float, config: SolverConfig,
               table: Optional[KernelTable] = None, plugin=None) -> Operator:
    """U(t_to, t_from) of the backend's system Hamiltonian; both times on the half-step grid."""
    hamiltonian = SystemHamiltonian.from_model(model, table, plugin)
    cache = PropagatorCache(hamiltonian, config.t_start, config.half_step, 2 * config.n_steps + 1,
                            hamiltonian.space.dim)
    j_from, j_to = cache.index(t_from), cache.index(t_to)
    cache.extend(max(j_from, j_to))
    U = cache.at(j_to) @ cache.at(j_from).conj().T
    return Operator(hamiltonian.space, U)


# ----------------------------------------------------------------------
# RK4 on vectorised states
# ----------------------------------------------------------------------

def rk4_step(v: np.ndarray, L1: np.ndarray, L2: np.ndarray, L3: np.ndarray, dt: float) -> np.ndarray:
    """One RK4 step with generators at t, t + dt/2 and t + dt."""
    k1 = L1 @ v
    k2 = L2 @ (v + 0.5 * dt * k1)
    k3 = L2 @ (v + 0.5 * dt * k2)
    k4 = L3 @ (v + dt * k3)
    return v + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_step_maps(L: np.ndarray, dt: float) -> np.ndarray:
    """RK4 transfer matrices for every step covered by half-step generators L[0 … 2n]."""
    L1, L2, L3 = L[0:-1:2], L[1::2], L[2::2]
    eye = np.eye(L.shape[-1], dtype=complex)
    K1 = L1
    K2 = L2 @ (eye + 0.5 * dt * K1)
    K3 = L2 @ (eye + 0.5 * dt * K2)
    K4 = L3 @ (eye + dt * K3)
    return eye + dt / 6.0 * (K1 + 2.0 * K2 + 2.0 * K3 + K4)


# ----------------------------------------------------------------------
# Trajectory
# ----------------------------------------------------------------------

@dataclass
class Trajectory:
    """P_X and expectation values at every step, full states every record_stride steps."""

    times: np.ndarray
    p_x: np.ndarray
    expectations: Dict[str, np.ndarray]
    state_times: np.ndarray
    states: List[DensityMatrix]
    model: ModelSpec
    config: SolverConfig
    min_eigenvalue: float = 0.0
    stopped_early: bool = False

    @property
    def has_cavity(self) -> bool:
        return self.model.cavity is not None

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def final_state(self) -> DensityMatrix:
        return self.states[-1]

    def expectation(self, name: str) -> np.ndarray:
        try:
            return self.expectations[name]
        except KeyError:
            raise ValueError(
                f"trajectory has no expectation {name!r}; available: {sorted(self.expectations)}"
            ) from None

    def to_frame(self) -> pd.DataFrame:
        columns = {"t": self.times, "P_X": self.p_x}
        for name, values in self.expectations.items():
            if np.iscomplexobj(values):
                columns[f"re_{name}"] = values.real
                columns[f"im_{name}"] = values.imag
            else:
                columns[name] = values
        return pd.DataFrame(columns)


def read_px_final(traj: Trajectory, t_p: Optional[float] = None) -> float:
    """P_X at the grid point nearest 3 t_p."""
    t_p = traj.model.pulse.t_p if t_p is None else t_p
    target = PULSE_MARGIN * t_p
    step = traj.config.dt
    if traj.times[-1] < target - 0.5 * step:
        raise ValueError(f"trajectory ends at {traj.times[-1]:.6g} ps, before 3 t_p = {target:.6g} ps")
    idx = int(np.argmin(np.abs(traj.times - target)))
    return float(traj.p_x[idx])


# ----------------------------------------------------------------------
# Master equation
# ----------------------------------------------------------------------

class MasterEquation:
    """Generator of one model on the half-step grid, streamed block by block."""

    def __init__(self, model: ModelSpec, config: SolverConfig, table: Optional[KernelTable] = None,
                 plugin=None):
        check_window(model, config)
        self.model = model
        self.config = config
        self.plugin = plugin if plugin is not None else load_backend(model)
        if not self.plugin.requires_kernel or model.bath.is_free:
            table = None
        elif table is None:
            table = build_kernel_table(model.bath, config.ds, config.s_max)
        if table is not None and table.spec != model.bath:
            raise ValueError(f"kernel table was built for {table.spec}, model uses {model.bath}")
        self.table = table
        self.hamiltonian = SystemHamiltonian.from_model(model, table, self.plugin)
        self.space = self.hamiltonian.space
        self.channels = self.plugin.channels(table, self.hamiltonian.qd) if table is not None else []
        self.dt = config.dt
        self.h = config.half_step
        self.n_half = 2 * config.n_steps + 1
        if self.channels and config.s_max > table.s_max + GRID_TOLERANCE:
            raise ValueError(f"s_max = {config.s_max} ps exceeds the kernel table range {table.s_max} ps")
        # the last memory node never lies past s_max, whatever the half step
        self.memory = int(math.floor(config.s_max / self.h + GRID_TOLERANCE)) if self.channels else 0
        self._weights = self._kernel_weights()
        self._static = self._lindblad_part()
        self.cache = PropagatorCache(self.hamiltonian, config.t_start, self.h, self.n_half, self.space.dim)
        logger.debug(
            "Master equation: backend=%s dim=%d steps=%d dt=%.3g ps channels=%s memory=%d",
            model.backend, self.space.dim, config.n_steps, self.dt,
            [c.name for c in self.channels], self.memory,
        )

    def _kernel_weights(self) -> np.ndarray:
        if not self.channels:
            return np.zeros((0, 1), dtype=complex)
        s = np.arange(self.memory + 1) * self.h
        trapezoid = np.full(self.memory + 1, self.h)
        trapezoid[0] = trapezoid[-1] = 0.5 * self.h
        return np.array([trapezoid * channel.kernel(s) for channel in self.channels], dtype=complex)

    def _lindblad_part(self) -> np.ndarray:
        d2 = self.space.dim ** 2
        static = np.zeros((d2, d2), dtype=complex)
        cavity = self.model.cavity
        if cavity is None:
            return static
        qd, cav = self.hamiltonian.qd, self.hamiltonian.cavity_ops
        for rate, op in ((cavity.kappa, cav.a), (cavity.gamma_b, qd.sigma), (cavity.gamma_d, qd.X)):
            if rate:
                static += rate * lindblad_superop(op.entries)
        return static

    def time(self, j: int) -> float:
        return self.config.t_start + j * self.h

    def generators(self, j0: int, j1: int) -> np.ndarray:
        """Superoperators at half-step indices j0 … j1 (inclusive), shape (n, d², d²)."""
        times = self.config.t_start + np.arange(j0, j1 + 1) * self.h
        L = hamiltonian_superop(self.hamiltonian(times)) + self._static
        if not self.channels:
            return L
        M = self.memory
        U_ext = self.cache.get(j0 - M, j1 + 1)
        U = U_ext[M:]
        f_ext = self.hamiltonian.drive(self.config.t_start + np.arange(j0 - M, j1 + 1) * self.h)
        for channel, weights in zip(self.channels, self._weights):
            A_ext = channel.operators(f_ext)
            Y = _dag(U_ext) @ A_ext @ U_ext
            S = fftconvolve(Y, weights[:, None, None], mode="valid", axes=0)
            Lam = U @ S @ _dag(U)
            A = A_ext[M:]
            A_dag, Lam_dag = _dag(A), _dag(Lam)
            L = L + sprepost(Lam, A) - spre(A @ Lam) + sprepost(A_dag, Lam_dag) - spost(Lam_dag @ A_dag)
        return L

    def rhs(self, j: int, rho) -> np.ndarray:
        """dρ/dt at half-step index j as a matrix."""
        matrix = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
        d = self.space.dim
        return (self.generators(j, j)[0] @ vec(matrix)).reshape(d, d)

    def step(self, v: np.ndarray, k: int) -> np.ndarray:
        """Advance vec(ρ) from step k to k + 1."""
        L = self.generators(2 * k, 2 * k + 2)
        return rk4_step(v, L[0], L[1], L[2], self.dt)

    def step_map(self, k: int) -> np.ndarray:
        """RK4 transfer matrix of step k."""
        return rk4_step_maps(self.generators(2 * k, 2 * k + 2), self.dt)[0]

    def blocks(self):
        """Yield (k0, L): generators at half indices 2k0 … 2k1 for the steps k0 … k1 − 1."""
        n_steps = self.config.n_steps
        size = self.config.block_steps
        for k0 in range(0, n_steps, size):
            k1 = min(k0 + size, n_steps)
            yield k0, self.generators(2 * k0, 2 * k1)
            self.cache.release(2 * k1 - self.memory)

    def run(self, map_stride: Optional[int] = None):
        """Integrate from the model's initial state.

        Returns ``(trajectory, maps)``; with ``map_stride`` the RK4 transfer
        matrices are also accumulated into coarse maps over every ``map_stride``
        steps (``maps`` is None otherwise).
        """
        config = self.config
        n_steps, stride, dt = config.n_steps, config.record_stride, self.dt
        space = self.space
        qd, cav = self.hamiltonian.qd, self.hamiltonian.cavity_ops

        names = ["sigma_dag_sigma"]
        functionals = [trace_functional(qd.X.entries)]
        if cav is not None:
            names += ["a_dag_a", "a"]
            functionals += [trace_functional((cav.a_dag @ cav.a).entries), trace_functional(cav.a.entries)]
        W = np.array(functionals)
        w_trace = trace_functional(np.eye(space.dim))

        initial = self.model.initial_density()
        v = vec(initial.matrix).astype(complex)
        values = np.empty((len(names), n_steps + 1), dtype=complex)
        values[:, 0] = W @ v
        state_times = [config.t_start]
        states = [initial]
        min_eig = initial.check(time=config.t_start)

        eye = np.eye(space.dim ** 2, dtype=complex)
        maps, current = ([], eye) if map_stride else (None, None)
        last = n_steps
        stopped = False

        for k0, L in self.blocks():
            P = rk4_step_maps(L, dt) if map_stride else None
            for i in range((L.shape[0] - 1) // 2):
                k = k0 + i + 1
                if P is not None:
                    v = P[i] @ v
                    current = P[i] @ current
                    if k % map_stride == 0:
                        maps.append(current)
                        current = eye
                else:
                    v = rk4_step(v, L[2 * i], L[2 * i + 1], L[2 * i + 2], dt)
                values[:, k] = W @ v
                t = config.t_start + k * dt
                trace = w_trace @ v
                if abs(trace - 1.0) > TRACE_TOLERANCE:
                    raise PhysicsInvariantError(
                        f"trace drifted to {trace.real:.9f}", time=t, detail={"trace": trace}
                    )
                if k % stride == 0 or k == n_steps:
                    state = DensityMatrix.from_vector(space, v)
                    min_eig = min(min_eig, state.check(time=t))
                    state_times.append(t)
                    states.append(state)
                    if self._should_stop(values[:, k], t, k):
                        last, stopped = k, True
                        break
            if stopped:
                break

        if stopped:
            logger.info("Emission window closed at t = %.3f ps (residual below %.0e)",
                        config.t_start + last * dt, config.stop_threshold)
        values = values[:, : last + 1]
        times = config.t_start + np.arange(last + 1) * dt
        expectations = {}
        for name, row in zip(names, values):
            expectations[name] = row if name == "a" else row.real.copy()
        p_x = expectations["sigma_dag_sigma"]
        if p_x.min() < POSITIVITY_FLOOR or p_x.max() > 1.0 - POSITIVITY_FLOOR:
            bad = int(np.argmax((p_x < POSITIVITY_FLOOR) | (p_x > 1.0 - POSITIVITY_FLOOR)))
            raise PhysicsInvariantError(f"P_X = {p_x[bad]:.6f} outside [0, 1]", time=float(times[bad]))
        trajectory = Trajectory(
            times=times,
            p_x=p_x,
            expectations=expectations,
            state_times=np.array(state_times),
            states=states,
            model=self.model,
            config=config,
            min_eigenvalue=min_eig,
            stopped_early=stopped,
        )
        return trajectory, (np.array(maps) if map_stride else None)

    def _should_stop(self, observed: np.ndarray, t: float, k: int) -> bool:
        threshold = self.config.stop_threshold
        if threshold is None or k == self.config.n_steps:
            return False
        if self.config.stop_after is not None and t < self.config.stop_after:
            return False
        residual = observed[0].real + (observed[1].real if len(observed) > 1 else 0.0)
        return residual < threshold


def check_window(model: ModelSpec, config: SolverConfig):
    t_p = model.pulse.t_p
    if config.t_start > -PULSE_MARGIN * t_p + GRID_TOLERANCE:
        raise ValueError(f"t_start = {config.t_start} ps must be <= -3 t_p = {-PULSE_MARGIN * t_p} ps")
    bound = SolverConfig.max_dt(model.pulse)
    if config.dt > bound * (1.0 + 1e-9):
        raise ValueError(f"dt = {config.dt:.4g} ps exceeds the admissible step {bound:.4g} ps for this pulse")


def evolve(model: ModelSpec, config: SolverConfig, table: Optional[KernelTable] = None,
           plugin=None) -> Trajectory:
    """RK4 integration of the backend's master equation over the configured window."""
    trajectory, _ = MasterEquation(model, config, table, plugin).run()
    return trajectory
