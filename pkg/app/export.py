"""
export.py

CSV writers for every artifact the command line produces. Each file starts with
``# `` comment lines naming columns and units; read them back with
:func:`load_commented_csv`.
"""

import json
import logging
import os
from typing import Iterable, Optional

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.12g"

TRAJECTORY_HEADER = (
    "t in ps; P_X = <sigma_dag sigma>",
    "cavity runs add a_dag_a and re_a/im_a",
)
KERNEL_HEADER = (
    "s in ps; C(s) and phi(s) in rad^2/ps^2 and dimensionless",
)
CORRELATION_HEADER = (
    "t, s in ps; long format over the triangle t + s <= t_end",
    "g1 = <a_dag(t) a(t+s)>, g2 = <a_dag(t) a_dag a(t+s) a(t)>, G2_pop = <a_dag a>(t) <a_dag a>(t+s)",
)
SWEEP_HEADER = (
    "grid: one row per theta_r, one column per theta_b (see the _theta_b/_theta_r axis files)",
)
SCAN_HEADER = (
    "t_p in ps, delta in rad/ps, areas in units of pi",
    "N photons per pulse into the collection optics, I indistinguishability",
)

PLOT_TEMPLATE = '''\
# Plot the {observable} grid written next to this file.
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

grid = pd.read_csv("{grid}", comment="#", header=None).to_numpy()
theta_b = pd.read_csv("{theta_b}", comment="#")["theta_b_pi"].to_numpy()
theta_r = pd.read_csv("{theta_r}", comment="#")["theta_r_pi"].to_numpy()

fig, ax = plt.subplots(figsize=(5, 4))
mesh = ax.pcolormesh(theta_b, theta_r, grid, shading="nearest", vmin=0.0, vmax=1.0)
ax.plot([{max_b}], [{max_r}], "w+", markersize=10)
ax.set_xlabel(r"$\\Theta_b / \\pi$")
ax.set_ylabel(r"$\\Theta_r / \\pi$")
fig.colorbar(mesh, ax=ax, label="{observable}")
fig.tight_layout()
fig.savefig("{stem}.png", dpi=200)
'''


def _ensure_parent(path: str):
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)


def write_csv(frame: pd.DataFrame, path: str, header_lines: Iterable[str] = (), index: bool = False,
              header: bool = True) -> str:
    """Write ``frame`` after ``# `` comment lines."""
    _ensure_parent(path)
    with open(path, "w", newline="") as f:
        for line in header_lines:
            f.write(f"# {line}\n")
        frame.to_csv(f, index=index, header=header, float_format=FLOAT_FORMAT)
    logger.info("Wrote %s (%d rows)", path, len(frame))
    return path


def load_commented_csv(path: str, header: Optional[str] = "infer") -> pd.DataFrame:
    return pd.read_csv(path, comment="#", header=header)


def output_path(out_dir: str, prefix: Optional[str], name: str, suffix: str = ".csv") -> str:
    stem = f"{prefix}_{name}" if prefix else name
    return os.path.join(out_dir, stem + suffix)


def write_trajectory(traj, path: str) -> str:
    model = traj.model
    lines = TRAJECTORY_HEADER + (
        f"backend={model.backend} dt={traj.config.dt:.6g} stopped_early={traj.stopped_early}",
    )
    return write_csv(traj.to_frame(), path, lines)


def write_kernel(table, path: str) -> str:
    spec = table.spec
    lines = KERNEL_HEADER + (
        f"alpha={spec.alpha} omega_c={spec.omega_c} temperature={spec.temperature}",
        f"truncation_ratio={table.truncation_ratio:.3e}",
    )
    return write_csv(table.to_frame(), path, lines)


def write_correlation(grid, path: str) -> str:
    return write_csv(grid.to_frame(), path, CORRELATION_HEADER)


def write_record(record: dict, path: str, header_lines: Iterable[str] = ()) -> str:
    """A flat record as two ``key,value`` columns."""
    frame = pd.DataFrame({"key": list(record), "value": [_plain(v) for v in record.values()]})
    return write_csv(frame, path, header_lines)


def write_fom(report, path: str) -> str:
    return write_record(report.as_record(), path, ("figures of merit of one source configuration",))


def write_scan(frame: pd.DataFrame, path: str) -> str:
    return write_csv(frame, path, SCAN_HEADER)


def write_backend_comparison(frame: pd.DataFrame, path: str) -> str:
    return write_csv(frame, path, ("t in ps; one P_X column per dynamics backend",))


def write_sweep(result, out_dir: str, prefix: Optional[str] = None) -> dict:
    """Grid matrix, both axis files, provenance and a plot script; returns the paths by role."""
    prefix = prefix or f"sweep_{result.observable}"
    paths = {
        "grid": output_path(out_dir, prefix, "grid"),
        "theta_b": output_path(out_dir, prefix, "theta_b"),
        "theta_r": output_path(out_dir, prefix, "theta_r"),
        "status": output_path(out_dir, prefix, "status"),
        "provenance": output_path(out_dir, prefix, "provenance", ".json"),
        "plot": output_path(out_dir, prefix, "plot", ".py"),
    }
    write_csv(pd.DataFrame(result.grid), paths["grid"], SWEEP_HEADER + (f"observable={result.observable}",),
              header=False)
    write_csv(pd.DataFrame({"theta_b_pi": result.theta_b / np.pi}), paths["theta_b"], ("columns of the grid",))
    write_csv(pd.DataFrame({"theta_r_pi": result.theta_r / np.pi}), paths["theta_r"], ("rows of the grid",))
    write_csv(pd.DataFrame(result.status.astype(int)), paths["status"],
              ("1 marks a cell whose evaluation failed (grid value is NaN)",), header=False)
    with open(paths["provenance"], "w") as f:
        json.dump({k: _plain(v) for k, v in result.provenance.items()}, f, indent=4, sort_keys=True)
    max_b, max_r, _ = result.max_location
    with open(paths["plot"], "w") as f:
        f.write(PLOT_TEMPLATE.format(
            observable=result.observable,
            grid=os.path.basename(paths["grid"]),
            theta_b=os.path.basename(paths["theta_b"]),
            theta_r=os.path.basename(paths["theta_r"]),
            max_b=f"{max_b / np.pi:.6g}",
            max_r=f"{max_r / np.pi:.6g}",
            stem=prefix,
        ))
    return paths


def _plain(value):
    """numpy scalars and containers to JSON-friendly Python values."""
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    return value
