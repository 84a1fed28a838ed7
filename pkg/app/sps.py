#!/usr/bin/env python3
"""
sps.py

Single-photon-source figures of merit for the QD ⊗ cavity model.

* N   = γ_coll κ ∫⟨a†a⟩dt   photons collected per pulse
* N_b = Γ_b ∫⟨σ†σ⟩dt        photons lost to background modes
* I   = 1 − ∬(G²_pop + g² − |g¹|²) / ∬(2G²_pop − |⟨a(t+s)⟩⟨a†(t)⟩|²)

The two-time functions come from the quantum regression theorem: the seeds
ρ(t)a† and aρ(t)a† are carried forward in s with the same time-local dynamical
map that propagates ρ, i.e. products of the RK4 transfer matrices accumulated
over the outer grid step.
"""

import logging
from dataclasses import asdict, dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid
from tqdm import tqdm

from app.bath import DEFAULT_DS, DEFAULT_S_MAX, BathSpec, KernelTable
from app.config import is_quiet
from app.drive import PulseSpec
from app.dynamics import (
    PULSE_MARGIN,
    MasterEquation,
    ModelSpec,
    SolverConfig,
    Trajectory,
    evolve,
    read_px_final,
)
from app.errors import NoEmissionError
from app.qcore import trace_functional

logger = logging.getLogger(__name__)

RESONANT_GAMMA_COLL = 0.5
DEFAULT_OUTER_STEP = 0.5
DEFAULT_EMISSION_T_MAX = 800.0
EMISSION_THRESHOLD = 1e-4
TAIL_FIT_WINDOW = 20.0
# Denominator of I below this means nothing was emitted
EMISSION_FLOOR = 1e-12


@dataclass(frozen=True)
class CavitySpec:
    """Emitter-cavity model; rates in rad·ps⁻¹, γ_coll dimensionless."""

    g: float = 0.041
    kappa: float = 0.46
    gamma_b: float = 0.45e-3
    gamma_d: float = 0.13e-3
    gamma_coll: float = 1.0
    n_max: int = 2

    def __post_init__(self):
        for name in ("g", "kappa", "gamma_b", "gamma_d"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        if not 0.0 <= self.gamma_coll <= 1.0:
            raise ValueError(f"gamma_coll must lie in [0, 1], got {self.gamma_coll}")
        if self.n_max < 2:
            raise ValueError(f"n_max must be >= 2, got {self.n_max}")

    def with_collection(self, gamma_coll: float) -> "CavitySpec":
        return replace(self, gamma_coll=gamma_coll)


@dataclass(frozen=True)
class CorrelationSettings:
    """Emission window and two-time grid used by the cavity pipeline."""

    outer_step: float = DEFAULT_OUTER_STEP
    emission_t_max: float = DEFAULT_EMISSION_T_MAX
    emission_threshold: float = EMISSION_THRESHOLD
    tail_fit_window: float = TAIL_FIT_WINDOW
    s_max: float = DEFAULT_S_MAX
    ds: float = DEFAULT_DS
    block_steps: int = 1024
    dt: Optional[float] = None

    def __post_init__(self):
        if not self.outer_step > 0:
            raise ValueError(f"outer_step must be positive, got {self.outer_step}")
        if not self.emission_t_max > 0:
            raise ValueError(f"emission_t_max must be positive, got {self.emission_t_max}")

    def solver_config(self, model: ModelSpec) -> SolverConfig:
        """Window [−3t_p, emission_t_max] aligned to the outer step, closed early once emptied."""
        return SolverConfig.for_model(
            model,
            t_end=self.emission_t_max,
            dt=self.dt,
            align=self.outer_step,
            s_max=self.s_max,
            ds=self.ds,
            block_steps=self.block_steps,
            stop_threshold=self.emission_threshold,
            stop_after=PULSE_MARGIN * model.pulse.t_p,
        )


@dataclass
class CorrelationGrid:
    """Two-time functions on t_grid × s_grid; cell (m, n) is valid when m + n < len(t_grid)."""

    t_grid: np.ndarray
    s_grid: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    G2_pop: np.ndarray
    mean_a: np.ndarray
    n_cav: np.ndarray

    @property
    def step(self) -> float:
        return float(self.s_grid[1] - self.s_grid[0]) if len(self.s_grid) > 1 else 0.0

    def valid_mask(self) -> np.ndarray:
        n = len(self.t_grid)
        m_idx, n_idx = np.indices((n, n))
        return m_idx + n_idx < n

    def subsample(self, factor: int) -> "CorrelationGrid":
        """Every factor-th outer time and delay; exact since the grids are shared."""
        sl = slice(None, None, factor)
        return CorrelationGrid(
            t_grid=self.t_grid[sl],
            s_grid=self.s_grid[sl],
            g1=self.g1[sl, sl],
            g2=self.g2[sl, sl],
            G2_pop=self.G2_pop[sl, sl],
            mean_a=self.mean_a[sl],
            n_cav=self.n_cav[sl],
        )

    def to_frame(self) -> pd.DataFrame:
        m_idx, n_idx = np.nonzero(self.valid_mask())
        return pd.DataFrame({
            "t": self.t_grid[m_idx],
            "s": self.s_grid[n_idx],
            "re_g1": self.g1[m_idx, n_idx].real,
            "im_g1": self.g1[m_idx, n_idx].imag,
            "g2": self.g2[m_idx, n_idx],
            "G2_pop": self.G2_pop[m_idx, n_idx],
        })


@dataclass
class FomReport:
    """Scalar figures of merit of one source configuration."""

    N: float
    N_b: float
    I: float
    P_X_final: float
    budget_residual: float
    I_coarse: Optional[float] = None
    settings: dict = field(default_factory=dict)
    correlation: Optional[CorrelationGrid] = field(default=None, repr=False)

    def as_record(self) -> dict:
        record = {
            "N": self.N,
            "N_b": self.N_b,
            "I": self.I,
            "P_X_final": self.P_X_final,
            "budget_residual": self.budget_residual,
            "I_coarse": self.I_coarse,
        }
        record.update(self.settings)
        return record


class UpperBounds(NamedTuple):
    beta: float
    I_ub: float


# ----------------------------------------------------------------------
# Single-time quantities
# ----------------------------------------------------------------------

def _require_cavity(traj: Trajectory):
    if not traj.has_cavity:
        raise ValueError("trajectory has no cavity expectations (model.cavity is None)")


def exponential_tail(times: np.ndarray, values: np.ndarray, fit_window: float = TAIL_FIT_WINDOW) -> float:
    """∫_{t_end}^∞ of a decaying signal, extrapolated from a log-linear fit of its last fit_window ps."""
    times, values = np.asarray(times), np.asarray(values)
    sel = (times >= times[-1] - fit_window) & (values > 0)
    if sel.sum() < 3:
        return 0.0
    slope, _ = np.polyfit(times[sel], np.log(values[sel]), 1)
    if slope >= 0:
        logger.debug("No exponential decay in the last %.1f ps; tail correction skipped", fit_window)
        return 0.0
    return float(values[-1] / -slope)


def _integrated(traj: Trajectory, name: str, tail: bool, fit_window: float) -> float:
    values = traj.expectation(name)
    total = float(trapezoid(values, traj.times))
    if tail:
        total += exponential_tail(traj.times, values, fit_window)
    return total


def cavity_emission(traj: Trajectory, tail: bool = True, fit_window: float = TAIL_FIT_WINDOW) -> float:
    """κ∫⟨a†a⟩dt: photons leaving through the cavity mode, before collection losses."""
    _require_cavity(traj)
    return traj.model.cavity.kappa * _integrated(traj, "a_dag_a", tail, fit_window)


def collected_photons(traj: Trajectory, cavity: Optional[CavitySpec] = None, tail: bool = True,
                      fit_window: float = TAIL_FIT_WINDOW) -> float:
    """N = γ_coll κ ∫⟨a†a⟩dt."""
    _require_cavity(traj)
    cavity = cavity or traj.model.cavity
    return cavity.gamma_coll * cavity.kappa * _integrated(traj, "a_dag_a", tail, fit_window)


def background_loss(traj: Trajectory, cavity: Optional[CavitySpec] = None, tail: bool = True,
                    fit_window: float = TAIL_FIT_WINDOW) -> float:
    """N_b = Γ_b ∫⟨σ†σ⟩dt."""
    _require_cavity(traj)
    cavity = cavity or traj.model.cavity
    return cavity.gamma_b * _integrated(traj, "sigma_dag_sigma", tail, fit_window)


def residual_excitation(traj: Trajectory) -> float:
    """⟨σ†σ⟩ + ⟨a†a⟩ at the end of the trajectory."""
    residual = traj.p_x[-1]
    if traj.has_cavity:
        residual += traj.expectation("a_dag_a")[-1]
    return float(residual)


def purcell_rate(cavity: CavitySpec) -> float:
    """Bad-cavity emitter decay rate 4g²/κ."""
    return 4.0 * cavity.g ** 2 / cavity.kappa


def fit_decay_rate(traj: Trajectory, t_from: Optional[float] = None, t_to: Optional[float] = None) -> float:
    """Rate of a log-linear fit to ⟨σ†σ⟩(t) over [t_from, t_to]."""
    t_from = traj.times[0] + 10.0 if t_from is None else t_from
    t_to = min(traj.t_end, t_from + 200.0) if t_to is None else t_to
    sel = (traj.times >= t_from) & (traj.times <= t_to) & (traj.p_x > 0)
    if sel.sum() < 3:
        raise ValueError(f"not enough positive samples of P_X in [{t_from}, {t_to}] ps")
    slope, _ = np.polyfit(traj.times[sel], np.log(traj.p_x[sel]), 1)
    return float(-slope)


# ----------------------------------------------------------------------
# Two-time quantities
# ----------------------------------------------------------------------

def qrt_correlations(model: ModelSpec, config: SolverConfig, table: Optional[KernelTable] = None,
                     plugin=None):
    """Trajectory plus g¹, g², G²_pop on the grid of recorded states.

    The outer grid is every ``config.record_stride`` steps; the delay grid uses
    the same spacing. Returns ``(CorrelationGrid, Trajectory)``.
    """
    if model.cavity is None:
        raise ValueError("two-time correlations need a cavity model")
    stride = config.record_stride
    if config.n_steps % stride:
        raise ValueError(f"record_stride {stride} does not divide the {config.n_steps} steps of the window")

    equation = MasterEquation(model, config, table, plugin)
    traj, maps = equation.run(map_stride=stride)
    n_outer = len(traj.states)
    if len(maps) != n_outer - 1:
        raise ValueError(f"{len(maps)} transfer maps for {n_outer} recorded states")

    cav = equation.hamiltonian.cavity_ops
    a, a_dag = cav.a.entries, cav.a_dag.entries
    dim = equation.space.dim
    rho = np.array([state.matrix for state in traj.states])
    V1 = (rho @ a_dag).reshape(n_outer, dim * dim)
    V2 = (a @ rho @ a_dag).reshape(n_outer, dim * dim)
    w_a = trace_functional(a)
    w_n = trace_functional(a_dag @ a)

    g1 = np.zeros((n_outer, n_outer), dtype=complex)
    g2 = np.zeros((n_outer, n_outer))
    for n in tqdm(range(n_outer), desc="QRT delays", leave=None, disable=is_quiet()):
        count = n_outer - n
        g1[:count, n] = V1[:count] @ w_a
        g2[:count, n] = (V2[:count] @ w_n).real
        if count > 1:
            phi = maps[n: n + count - 1]
            V1 = np.einsum("mij,mj->mi", phi, V1[: count - 1])
            V2 = np.einsum("mij,mj->mi", phi, V2[: count - 1])

    n_cav = traj.expectation("a_dag_a")[::stride]
    mean_a = traj.expectation("a")[::stride]
    m_idx, n_idx = np.indices((n_outer, n_outer))
    valid = m_idx + n_idx < n_outer
    G2_pop = np.where(valid, n_cav[:, None] * n_cav[np.minimum(m_idx + n_idx, n_outer - 1)], 0.0)

    grid = CorrelationGrid(
        t_grid=traj.state_times,
        s_grid=np.arange(n_outer) * stride * config.dt,
        g1=g1,
        g2=g2,
        G2_pop=G2_pop,
        mean_a=mean_a,
        n_cav=n_cav,
    )
    return grid, traj


def _double_integral(values: np.ndarray, step: float) -> float:
    """∫dt ∫ds over the triangle m + n < N with trapezoid rules in both directions."""
    n_outer = values.shape[0]
    rows = np.array([
        trapezoid(values[m, : n_outer - m], dx=step) if n_outer - m > 1 else 0.0
        for m in range(n_outer)
    ])
    return float(trapezoid(rows, dx=step))


def indistinguishability(corr: CorrelationGrid) -> float:
    """I from the two-time grid, including the coherent-amplitude term of the denominator."""
    n_outer = len(corr.t_grid)
    if n_outer < 2:
        raise NoEmissionError("correlation grid has fewer than two outer times")
    m_idx, n_idx = np.indices((n_outer, n_outer))
    later = np.minimum(m_idx + n_idx, n_outer - 1)
    coherent = np.abs(corr.mean_a[later]) ** 2 * np.abs(corr.mean_a[:, None]) ** 2
    numerator = corr.G2_pop + corr.g2 - np.abs(corr.g1) ** 2
    denominator = 2.0 * corr.G2_pop - coherent
    step = corr.step
    den = _double_integral(denominator, step)
    if abs(den) < EMISSION_FLOOR:
        raise NoEmissionError("no photons emitted: indistinguishability is undefined",
                              detail={"denominator": den})
    return 1.0 - _double_integral(numerator, step) / den


# ----------------------------------------------------------------------
# Pipelines
# ----------------------------------------------------------------------

def _settings_snapshot(model: ModelSpec, config: SolverConfig) -> dict:
    pulse, bath, cavity = model.pulse, model.bath, model.cavity
    snapshot = {
        "backend": model.backend,
        "initial_state": model.initial_state,
        "theta_b_pi": pulse.theta_b / np.pi,
        "theta_r_pi": pulse.theta_r / np.pi,
        "t_p": pulse.t_p,
        "delta": pulse.delta,
        "alpha": bath.alpha,
        "omega_c": bath.omega_c,
        "temperature": bath.temperature,
        "dt": config.dt,
        "outer_step": config.record_stride * config.dt,
    }
    if cavity is not None:
        snapshot.update(asdict(cavity))
    return snapshot


def bulk_excitation(model: ModelSpec, table: Optional[KernelTable] = None,
                    settings: CorrelationSettings = CorrelationSettings()) -> float:
    """P_X at 3 t_p of the same drive and bath without the cavity."""
    bulk = replace(model, cavity=None)
    config = SolverConfig.for_model(bulk, dt=settings.dt, s_max=settings.s_max, ds=settings.ds,
                                    block_steps=settings.block_steps)
    return read_px_final(evolve(bulk, config, table))


def source_figures_of_merit(model: ModelSpec, settings: CorrelationSettings = CorrelationSettings(),
                            table: Optional[KernelTable] = None, bulk_px: Optional[float] = None,
                            plugin=None) -> FomReport:
    """Trajectory, QRT grid and two-photon indistinguishability for one cavity model."""
    if model.cavity is None:
        raise ValueError("source figures of merit need a cavity model")
    if bulk_px is None:
        bulk_px = 1.0 if model.initial_state == "excited" else bulk_excitation(model, table, settings)
    config = settings.solver_config(model)
    corr, traj = qrt_correlations(model, config, table, plugin)
    fit_window = settings.tail_fit_window
    N = collected_photons(traj, fit_window=fit_window)
    N_b = background_loss(traj, fit_window=fit_window)
    I = indistinguishability(corr)
    I_coarse = indistinguishability(corr.subsample(2)) if len(corr.t_grid) > 4 else None
    residual = cavity_emission(traj, fit_window=fit_window) + N_b + (1.0 - bulk_px) - 1.0
    if not traj.stopped_early:
        logger.warning(
            "Emission window reached %.0f ps with residual excitation %.2e",
            traj.t_end, residual_excitation(traj),
        )
    report = FomReport(
        N=N, N_b=N_b, I=I, P_X_final=bulk_px, budget_residual=residual, I_coarse=I_coarse,
        settings=_settings_snapshot(model, config), correlation=corr,
    )
    logger.info("FoM: N = %.4f, N_b = %.4f, I = %.4f, P_X = %.4f", N, N_b, I, bulk_px)
    return report


def upper_bounds(cavity: CavitySpec = CavitySpec(), bath: BathSpec = BathSpec(),
                 settings: CorrelationSettings = CorrelationSettings(), table: Optional[KernelTable] = None,
                 backend: str = "weak_coupling") -> UpperBounds:
    """β and I^(UB) of an emitter prepared in |X⟩ with the drive off."""
    model = ModelSpec(pulse=PulseSpec.off(), bath=bath, cavity=cavity, backend=backend,
                      initial_state="excited")
    config = settings.solver_config(model)
    corr, traj = qrt_correlations(model, config, table)
    beta = cavity_emission(traj, fit_window=settings.tail_fit_window)
    I_ub = indistinguishability(corr)
    logger.info("Upper bounds: beta = %.4f, I_ub = %.4f", beta, I_ub)
    return UpperBounds(beta=beta, I_ub=I_ub)


def run_resonant_reference(t_p: float, cavity: CavitySpec = CavitySpec(), bath: BathSpec = BathSpec(),
                           settings: CorrelationSettings = CorrelationSettings(),
                           table: Optional[KernelTable] = None, backend: str = "weak_coupling",
                           gamma_coll: float = RESONANT_GAMMA_COLL) -> FomReport:
    """Resonant π pulse of the same width, collected through a cross-polarisation filter."""
    model = ModelSpec(pulse=PulseSpec.resonant(t_p), bath=bath,
                      cavity=cavity.with_collection(gamma_coll), backend=backend)
    return source_figures_of_merit(model, settings, table)
