"""Deterministic CSV emitters and matplotlib figure rendering.

All numeric CSV fields use 9 significant digits with a '.' radix so the
outputs are byte-identical across runs and locales.  Figures are written
through the Agg backend with a fixed SVG hash salt and no embedded date,
keeping the vector output reproducible as well.
"""

from __future__ import annotations

from typing import Dict, Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .model import DomainError, IdmParams, VehicleClass, equilibrium_gap  # noqa: E402
from .simulation import Trajectory  # noqa: E402
from .stability import StabilityMapGrid, region_area  # noqa: E402

plt.rcParams["svg.hashsalt"] = "cvplatoon"


def fmt(value: float) -> str:
    """9-significant-digit fixed formatting; normalizes negative zero."""
    if value == 0.0:
        value = 0.0
    return f"{value:.9g}"


def map_csv_text(grids: Dict[int, StabilityMapGrid], base_m: int) -> str:
    """Stability map CSV: the base grid's cells plus a stable-area footer
    covering every computed M value."""
    spec = grids[base_m].spec
    lines = ["T_d,a_m,lhs,verdict"]
    a_vals = spec.a_m_values()
    t_vals = spec.t_d_values()
    for i, t_d in enumerate(t_vals):
        for j, a_m in enumerate(a_vals):
            cell = grids[base_m].cells[i][j]
            lines.append(f"{fmt(t_d)},{fmt(a_m)},{fmt(cell.lhs)},{cell.label}")
    lines.append("# summary")
    lines.append("# M,stable_area")
    for m in sorted(grids):
        try:
            area = fmt(region_area(grids[m]))
        except DomainError:
            area = "undefined"
        lines.append(f"# {m},{area}")
    return "\n".join(lines) + "\n"


def trajectory_csv_text(traj: Trajectory) -> str:
    """Long-format trajectory CSV with one row per vehicle per sample."""
    lines = ["t,vehicle,class,x,v,a,gap"]
    for i, t in enumerate(traj.times):
        for n in range(traj.n_vehicles):
            cls = "CV" if traj.classes[n] is VehicleClass.CONNECTED else "HV"
            lines.append(
                f"{fmt(t)},{n},{cls},{fmt(traj.x[i, n])},{fmt(traj.v[i, n])},"
                f"{fmt(traj.a[i, n])},{fmt(traj.gap[i, n])}"
            )
    return "\n".join(lines) + "\n"


def equilibrium_csv_text(speeds: Sequence[float], p: IdmParams) -> str:
    """Speed/equilibrium-gap table; speeds at or above v0 carry a flag."""
    lines = ["v_e,s_e"]
    for v in speeds:
        if 0.0 <= v < p.v0:
            lines.append(f"{fmt(v)},{fmt(float(equilibrium_gap(v, p)))}")
        else:
            lines.append(f"{fmt(v)},no-equilibrium")
    return "\n".join(lines) + "\n"


def write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _save(fig, path: str) -> None:
    if path.endswith(".svg"):
        fig.savefig(path, metadata={"Date": None})
    else:
        fig.savefig(path)
    plt.close(fig)


def render_map_figure(grids: Dict[int, StabilityMapGrid], path: str) -> None:
    """Stability diagram: critical curve (lhs = 0) per M value over the
    (T_d, a_m) plane, stable side above the curve shaded for the lowest M."""
    base_m = sorted(grids)[0]
    spec = grids[base_m].spec
    t_vals = spec.t_d_values()
    a_vals = spec.a_m_values()
    tt, aa = np.meshgrid(t_vals, a_vals, indexing="ij")

    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    ax.contourf(tt, aa, grids[base_m].stable_mask().astype(float),
                levels=[0.5, 1.5], colors=["#d8ecd8"])
    for idx, m in enumerate(sorted(grids)):
        lhs = grids[m].lhs_array()
        cs = ax.contour(tt, aa, lhs, levels=[0.0],
                        colors=[f"C{idx}"], linewidths=1.5)
        if cs.allsegs and cs.allsegs[0]:
            ax.plot([], [], color=f"C{idx}", label=f"M = {m}")
        else:
            ax.plot([], [], color=f"C{idx}", linestyle="--",
                    label=f"M = {m} (no boundary in window)")
    ax.set_xlabel("desired time headway $T_d$ (s)")
    ax.set_ylabel("maximum acceleration $a_m$ (m/s$^2$)")
    ax.set_title(f"string-stability diagram (v_e = {fmt(spec.v_e)} m/s)")
    ax.legend(loc="upper right", fontsize=9)
    fig.tight_layout()
    _save(fig, path)


def render_trajectory_figure(traj: Trajectory, path: str,
                             max_curves: int = 10) -> None:
    """Gap deviation from equilibrium over time for a spread of vehicles."""
    n = traj.n_vehicles
    step = max(1, n // max_curves)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for veh in range(0, n, step):
        if not np.all(np.isnan(traj.gap[:, veh])):
            ax.plot(traj.times, traj.gap[:, veh] - traj.eq.gap,
                    linewidth=0.9, label=f"vehicle {veh}")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("gap deviation from equilibrium (m)")
    title = "platoon response"
    if traj.collision is not None:
        title += f" (collision at t = {fmt(traj.collision.time)} s)"
    ax.set_title(title)
    if n // step <= 12:
        ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    _save(fig, path)


def render_verify_figure(points, path: str) -> None:
    """Agreement scatter for the criterion-vs-simulation batch: marker per
    point in the (T_d, a_m) plane, colored by outcome."""
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    seen = set()
    for pt in points:
        if not pt.retained:
            style = dict(marker="x", color="0.6", label="excluded (near boundary)")
        elif pt.agree:
            style = dict(marker="o", color="C2", label="agree")
        else:
            style = dict(marker="s", color="C3", label="disagree")
        label = style.pop("label")
        if label in seen:
            label = None
        else:
            seen.add(label)
        ax.scatter([pt.t_d], [pt.a_m], s=40, label=label, **style)
    ax.set_xlabel("desired time headway $T_d$ (s)")
    ax.set_ylabel("maximum acceleration $a_m$ (m/s$^2$)")
    ax.set_title("criterion vs simulated growth")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path)
