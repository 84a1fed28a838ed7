#!/usr/bin/env python3
"""
xsweep.py

Pulse-area sweeps over the (Θ_b, Θ_r) plane, simplex refinement of the best
cell and the pulse-width scan that compares dichromatic and resonant sources.

Cells are independent; they run in a process pool whose workers receive the
read-only kernel table once through the pool initializer. Results are placed by
cell index, so a grid does not depend on the worker count.
"""

import logging
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import minimize
from tqdm import tqdm

from app import __version__
from app.bath import BathSpec, KernelTable, build_kernel_table
from app.config import QUIET_ENV, is_quiet
from app.drive import PulseSpec
from app.dynamics import ModelSpec, SolverConfig, evolve, read_px_final
from app.errors import SweepAbortedError
from app.plugin_loader import DYNAMICS_GROUP, load_plugin
from app.sps import (
    RESONANT_GAMMA_COLL,
    CavitySpec,
    CorrelationSettings,
    run_resonant_reference,
    source_figures_of_merit,
    upper_bounds,
)

logger = logging.getLogger(__name__)

OBSERVABLES = ("P_X", "N", "I")
DEFAULT_XATOL_PI = 0.01
MAX_FAILURE_FRACTION = 0.05
# Accepted excursion of a cell value outside [0, 1]
RANGE_TOLERANCE = 1e-3
TIE_TOLERANCE = 1e-12
SCAN_T_P_RANGE = (1.0, 6.0)


@dataclass(frozen=True)
class AxisRange:
    """Pulse-area axis in units of π."""

    min_pi: float = 0.0
    max_pi: float = 8.0
    points: int = 41

    def __post_init__(self):
        if self.points < 2:
            raise ValueError(f"an axis needs at least 2 points, got {self.points}")
        if self.min_pi < 0:
            raise ValueError(f"pulse areas must be non-negative, got min_pi = {self.min_pi}")
        if not self.max_pi > self.min_pi:
            raise ValueError(f"degenerate axis [{self.min_pi}, {self.max_pi}]")

    def values(self) -> np.ndarray:
        """Axis values in radians."""
        return np.linspace(self.min_pi, self.max_pi, self.points) * np.pi

    @property
    def spacing(self) -> float:
        return (self.max_pi - self.min_pi) * np.pi / (self.points - 1)


def _default_fixed_model() -> ModelSpec:
    return ModelSpec(pulse=PulseSpec(theta_b=0.0, theta_r=0.0, t_p=1.0, delta=6.0))


@dataclass(frozen=True)
class SweepSpec:
    """A grid over both pulse areas; ``fixed`` carries everything else.

    The areas of ``fixed.pulse`` are ignored and stored as zero.
    """

    theta_b_range: AxisRange = AxisRange()
    theta_r_range: AxisRange = AxisRange()
    fixed: ModelSpec = field(default_factory=_default_fixed_model)
    observable: str = "P_X"
    dt: Optional[float] = None
    correlation: CorrelationSettings = CorrelationSettings()
    max_failure_fraction: float = MAX_FAILURE_FRACTION

    def __post_init__(self):
        if self.observable not in OBSERVABLES:
            raise ValueError(f"observable must be one of {OBSERVABLES}, got {self.observable!r}")
        if self.fixed.initial_state != "ground":
            raise ValueError("a pulse-area sweep starts from the ground state")
        if self.observable != "P_X" and self.fixed.cavity is None:
            raise ValueError(f"observable {self.observable} needs a cavity model")
        if not 0.0 <= self.max_failure_fraction <= 1.0:
            raise ValueError(f"max_failure_fraction must lie in [0, 1], got {self.max_failure_fraction}")
        pulse = replace(self.fixed.pulse, theta_b=0.0, theta_r=0.0)
        object.__setattr__(self, "fixed", self.fixed.with_pulse(pulse))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.theta_r_range.points, self.theta_b_range.points

    def model_at(self, theta_b: float, theta_r: float) -> ModelSpec:
        return self.fixed.with_pulse(replace(self.fixed.pulse, theta_b=float(theta_b), theta_r=float(theta_r)))

    def bulk_config(self, model: ModelSpec) -> SolverConfig:
        c = self.correlation
        return SolverConfig.for_model(model, dt=self.dt, s_max=c.s_max, ds=c.ds, block_steps=c.block_steps)

    def cells(self):
        """(row, column, Θ_b, Θ_r) in row-major order; rows follow Θ_r."""
        theta_b, theta_r = self.theta_b_range.values(), self.theta_r_range.values()
        return [(i_r, i_b, theta_b[i_b], theta_r[i_r])
                for i_r in range(len(theta_r)) for i_b in range(len(theta_b))]


@dataclass
class SweepResult:
    theta_b: np.ndarray
    theta_r: np.ndarray
    grid: np.ndarray
    status: np.ndarray
    observable: str
    max_location: Tuple[float, float, float]
    provenance: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)
    refined: Optional[Tuple[float, float, float]] = None

    @property
    def failure_fraction(self) -> float:
        return float(self.status.mean())

    def to_frame(self) -> pd.DataFrame:
        rows, cols = np.indices(self.grid.shape)
        return pd.DataFrame({
            "theta_b_pi": self.theta_b[cols.ravel()] / np.pi,
            "theta_r_pi": self.theta_r[rows.ravel()] / np.pi,
            self.observable: self.grid.ravel(),
            "failed": self.status.ravel(),
        })


# ----------------------------------------------------------------------
# Cell evaluation
# ----------------------------------------------------------------------

_WORKER_TABLE: Optional[KernelTable] = None


def _init_worker(table: Optional[KernelTable], quiet: bool):
    global _WORKER_TABLE
    _WORKER_TABLE = table
    if quiet:
        os.environ[QUIET_ENV] = "1"
        logging.getLogger().setLevel(logging.ERROR)


def needs_kernel(model: ModelSpec) -> bool:
    plugin_class, _ = load_plugin(DYNAMICS_GROUP, model.backend)
    return plugin_class.requires_kernel and not model.bath.is_free


def evaluate_cell(spec: SweepSpec, theta_b: float, theta_r: float, table: Optional[KernelTable] = None) -> float:
    """The sweep observable at one pair of pulse areas."""
    model = spec.model_at(theta_b, theta_r)
    if spec.observable == "P_X":
        bulk = replace(model, cavity=None)
        return read_px_final(evolve(bulk, spec.bulk_config(bulk), table))
    report = source_figures_of_merit(model, spec.correlation, table)
    return report.N if spec.observable == "N" else report.I


def _evaluate_task(spec: SweepSpec, index: Tuple[int, int], theta_b: float, theta_r: float,
                   table: Optional[KernelTable] = None):
    table = _WORKER_TABLE if table is None else table
    try:
        value = evaluate_cell(spec, theta_b, theta_r, table)
    except Exception as e:
        return index, np.nan, f"{type(e).__name__}: {e}"
    if not -RANGE_TOLERANCE <= value <= 1.0 + RANGE_TOLERANCE:
        return index, np.nan, f"{spec.observable} = {value:.6g} outside [0, 1]"
    return index, value, None


def argmax_cell(grid: np.ndarray, theta_b: np.ndarray, theta_r: np.ndarray) -> Tuple[int, int]:
    """Row and column of the grid maximum; ties go to the lower Θ_b² + Θ_r²."""
    if np.all(np.isnan(grid)):
        raise SweepAbortedError("no sweep cell produced a value")
    best = np.nanmax(grid)
    rows, cols = np.nonzero(np.abs(grid - best) <= TIE_TOLERANCE)
    power = theta_b[cols] ** 2 + theta_r[rows] ** 2
    pick = np.lexsort((cols, rows, power))[0]
    return int(rows[pick]), int(cols[pick])


def _abort_if_needed(spec: SweepSpec, failures: int, total: int):
    if failures > spec.max_failure_fraction * total:
        raise SweepAbortedError(
            f"{failures} of {total} sweep cells failed (limit {spec.max_failure_fraction:.0%})"
        )


def run_sweep(spec: SweepSpec, workers: int = 1, table: Optional[KernelTable] = None) -> SweepResult:
    """Evaluate every cell of the grid; failed cells are flagged and left as NaN."""
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    if table is None and needs_kernel(spec.fixed):
        table = build_kernel_table(spec.fixed.bath, spec.correlation.ds, spec.correlation.s_max)
    theta_b, theta_r = spec.theta_b_range.values(), spec.theta_r_range.values()
    grid = np.full(spec.shape, np.nan)
    status = np.zeros(spec.shape, dtype=bool)
    errors = {}
    cells = spec.cells()
    quiet = is_quiet()
    logger.info("Sweeping %s over %d x %d cells with %d worker(s)", spec.observable, *spec.shape, workers)

    def record(index, value, error):
        if error is None:
            grid[index] = value
            return
        status[index] = True
        errors[index] = error
        logger.warning("Sweep cell Θ_b = %.4gπ, Θ_r = %.4gπ failed: %s",
                       theta_b[index[1]] / np.pi, theta_r[index[0]] / np.pi, error)
        _abort_if_needed(spec, len(errors), len(cells))

    progress = tqdm(total=len(cells), desc=f"Sweep {spec.observable}", disable=quiet, leave=False)
    if workers == 1:
        for i_r, i_b, tb, tr in cells:
            record(*_evaluate_task(spec, (i_r, i_b), tb, tr, table))
            progress.update()
    else:
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=(table, quiet)) as executor:
            futures = [executor.submit(_evaluate_task, spec, (i_r, i_b), tb, tr) for i_r, i_b, tb, tr in cells]
            try:
                for future in as_completed(futures):
                    record(*future.result())
                    progress.update()
            except SweepAbortedError:
                executor.shutdown(wait=False, cancel_futures=True)
                raise
    progress.close()

    i_r, i_b = argmax_cell(grid, theta_b, theta_r)
    max_location = (float(theta_b[i_b]), float(theta_r[i_r]), float(grid[i_r, i_b]))
    logger.info("Grid maximum %s = %.4f at (%.3gπ, %.3gπ)", spec.observable, max_location[2],
                max_location[0] / np.pi, max_location[1] / np.pi)
    return SweepResult(
        theta_b=theta_b,
        theta_r=theta_r,
        grid=grid,
        status=status,
        observable=spec.observable,
        max_location=max_location,
        provenance=_provenance(spec, table),
        errors=errors,
    )


def _provenance(spec: SweepSpec, table: Optional[KernelTable]) -> dict:
    from app.config_handler import sweep_spec_to_config

    provenance = {"version": __version__, "config": sweep_spec_to_config(spec)}
    if table is not None:
        provenance["kernel_truncation_ratio"] = table.truncation_ratio
    return provenance


# ----------------------------------------------------------------------
# Refinement
# ----------------------------------------------------------------------

def nelder_mead_refine(objective: Callable[[np.ndarray], float], seed: Sequence[float], step,
                       xatol: float, maxiter: int = 200) -> Tuple[np.ndarray, float]:
    """Maximise ``objective`` from ``seed``; stops once the simplex is smaller than ``xatol``.

    ``step`` is the initial simplex edge, one value or one per coordinate. Standard
    coefficients (reflection 1, expansion 2, contraction and shrink 0.5).
    """
    seed = np.asarray(seed, dtype=float)
    steps = np.broadcast_to(np.asarray(step, dtype=float), seed.shape)
    simplex = np.vstack([seed] + [seed + np.eye(len(seed))[i] * steps[i] for i in range(len(seed))])

    def negated(x):
        value = objective(x)
        return np.inf if value is None or not np.isfinite(value) else -value

    res = minimize(
        negated,
        x0=seed,
        method="Nelder-Mead",
        options={"initial_simplex": simplex, "xatol": xatol, "fatol": np.inf, "maxiter": maxiter},
    )
    logger.debug("Nelder-Mead: %d evaluations, %s", res.nfev, res.message)
    return res.x, -res.fun


def refine_max(result: SweepResult, spec: SweepSpec, table: Optional[KernelTable] = None,
               xatol_pi: float = DEFAULT_XATOL_PI) -> Tuple[float, float, float]:
    """Simplex refinement seeded at the grid argmax; skipped when it lies on the grid boundary."""
    i_r, i_b = argmax_cell(result.grid, result.theta_b, result.theta_r)
    rows, cols = result.grid.shape
    if i_r in (0, rows - 1) or i_b in (0, cols - 1):
        logger.warning("Grid maximum at (%.3gπ, %.3gπ) lies on the boundary; refinement skipped",
                       result.max_location[0] / np.pi, result.max_location[1] / np.pi)
        result.refined = result.max_location
        return result.max_location
    if table is None and needs_kernel(spec.fixed):
        table = build_kernel_table(spec.fixed.bath, spec.correlation.ds, spec.correlation.s_max)

    def objective(x):
        if np.any(x < 0):
            return None
        _, value, error = _evaluate_task(spec, (0, 0), x[0], x[1], table)
        return None if error else value

    seed = np.array(result.max_location[:2])
    step = 0.5 * np.array([spec.theta_b_range.spacing, spec.theta_r_range.spacing])
    x, value = nelder_mead_refine(objective, seed, step, xatol_pi * np.pi)
    best = result.max_location
    if value > best[2] + TIE_TOLERANCE:
        best = (float(x[0]), float(x[1]), float(value))
    result.refined = best
    logger.info("Refined maximum %s = %.5f at (%.4gπ, %.4gπ)", spec.observable, best[2],
                best[0] / np.pi, best[1] / np.pi)
    return best


# ----------------------------------------------------------------------
# Pulse-width scan
# ----------------------------------------------------------------------

def _scan_row(t_p, delta, mode, theta_b, theta_r, report, beta, I_ub, gamma_coll):
    return {
        "t_p": t_p,
        "delta": delta,
        "mode": mode,
        "theta_b_pi": theta_b / np.pi,
        "theta_r_pi": theta_r / np.pi,
        "P_X": report.P_X_final,
        "N": report.N,
        "N_b": report.N_b,
        "I": report.I,
        "budget_residual": report.budget_residual,
        "N_ub": gamma_coll * beta,
        "I_ub": I_ub,
    }


def _source_task(model: ModelSpec, settings: CorrelationSettings, bulk_px: Optional[float],
                 with_table: bool, table: Optional[KernelTable] = None):
    table = _WORKER_TABLE if table is None else table
    return source_figures_of_merit(model, settings, table if with_table else None, bulk_px=bulk_px)


def _resonant_task(t_p: float, cavity: CavitySpec, bath: BathSpec, settings: CorrelationSettings,
                   backend: str, gamma_coll: float, table: Optional[KernelTable] = None):
    table = _WORKER_TABLE if table is None else table
    return run_resonant_reference(t_p, cavity, bath, settings, table, backend, gamma_coll)


def _run_sources(jobs, workers: int, table: Optional[KernelTable]) -> list:
    """Run (task, args) cavity pipelines; reports come back in job order."""
    quiet = is_quiet()
    reports = [None] * len(jobs)
    progress = tqdm(total=len(jobs), desc="Scan sources", disable=quiet, leave=False)
    if workers == 1:
        for k, (task, args) in enumerate(jobs):
            reports[k] = task(*args, table)
            progress.update()
    else:
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=(table, quiet)) as executor:
            futures = {executor.submit(task, *args): k for k, (task, args) in enumerate(jobs)}
            for future in as_completed(futures):
                reports[futures[future]] = future.result()
                progress.update()
    progress.close()
    return reports


def run_width_scan(t_p_list: Sequence[float], eta: float = 6.0, bath: BathSpec = BathSpec(),
                   cavity: CavitySpec = CavitySpec(), settings: CorrelationSettings = CorrelationSettings(),
                   backend: str = "weak_coupling", area_range: AxisRange = AxisRange(points=21),
                   refine: bool = True, xatol_pi: float = DEFAULT_XATOL_PI, workers: int = 1,
                   resonant_gamma_coll: float = RESONANT_GAMMA_COLL,
                   table: Optional[KernelTable] = None) -> pd.DataFrame:
    """Dichromatic, phonon-free dichromatic and resonant sources for each pulse width at δ = eta / t_p.

    The area optimisation of each width runs its sweep on the pool; the three
    cavity pipelines of every width are then submitted to the pool together.
    """
    t_p_values = [float(t) for t in t_p_list]
    lo, hi = SCAN_T_P_RANGE
    bad = [t for t in t_p_values if not lo <= t <= hi]
    if bad:
        raise ValueError(f"pulse widths {bad} lie outside [{lo}, {hi}] ps")
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    undriven = ModelSpec(pulse=PulseSpec.off(), bath=bath, backend=backend)
    if table is None and needs_kernel(undriven):
        table = build_kernel_table(bath, settings.ds, settings.s_max)
    beta, I_ub = upper_bounds(cavity, bath, settings, table, backend)
    collecting = cavity.with_collection(1.0)

    optima = []
    for t_p in tqdm(t_p_values, desc="Pulse-width scan", disable=is_quiet()):
        delta = eta / t_p
        fixed = ModelSpec(pulse=PulseSpec(theta_b=0.0, theta_r=0.0, t_p=t_p, delta=delta), bath=bath,
                          backend=backend)
        spec = SweepSpec(theta_b_range=area_range, theta_r_range=area_range, fixed=fixed,
                         correlation=settings, dt=settings.dt)
        sweep = run_sweep(spec, workers, table)
        theta_b, theta_r, p_x = refine_max(sweep, spec, table, xatol_pi) if refine else sweep.max_location
        logger.info("t_p = %.3g ps: optimum (%.3gπ, %.3gπ) with P_X = %.4f",
                    t_p, theta_b / np.pi, theta_r / np.pi, p_x)
        optima.append((t_p, delta, theta_b, theta_r, spec.model_at(theta_b, theta_r).with_cavity(collecting), p_x))

    jobs, layout = [], []
    for t_p, delta, theta_b, theta_r, model, p_x in optima:
        jobs.append((_source_task, (model, settings, p_x, True)))
        layout.append((t_p, delta, "dichromatic", theta_b, theta_r, 1.0))
        jobs.append((_source_task, (model.without_phonons(), settings, None, False)))
        layout.append((t_p, delta, "dichromatic_no_phonons", theta_b, theta_r, 1.0))
        jobs.append((_resonant_task, (t_p, cavity, bath, settings, backend, resonant_gamma_coll)))
        layout.append((t_p, 0.0, "resonant", np.pi, 0.0, resonant_gamma_coll))

    reports = _run_sources(jobs, workers, table)
    rows = [_scan_row(t_p, delta, mode, theta_b, theta_r, report, beta, I_ub, gamma_coll)
            for (t_p, delta, mode, theta_b, theta_r, gamma_coll), report in zip(layout, reports)]
    return pd.DataFrame(rows)
