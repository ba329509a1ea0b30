"""Gripper trajectory export and plan/front/side projections."""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import numpy as np


def trajectory_records(episodes: Sequence[dict]) -> list[dict]:
    """Flatten episodes into per-step rows with start/end markers."""
    rows = []
    for k, ep in enumerate(episodes):
        path = np.asarray(ep["gripper_path"], dtype=float).reshape(-1, 3)
        for i, (x, y, z) in enumerate(path):
            marker = "start" if i == 0 else ("end" if i == len(path) - 1 else "")
            rows.append({"episode": k, "step": i, "x": float(x), "y": float(y), "z": float(z), "marker": marker})
    return rows


def export_trajectories(episodes: Sequence[dict], csv_path, plot_path=None) -> list[dict]:
    rows = trajectory_records(episodes)
    csv_path = Path(csv_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    with csv_path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["episode", "step", "x", "y", "z", "marker"])
        w.writeheader()
        w.writerows(rows)
    if plot_path is not None:
        plot_trajectories(episodes, plot_path)
    return rows


def plot_trajectories(episodes: Sequence[dict], path) -> Path:
    """Three panels: plan (x-y), front (y-z) and side (x-z)."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    views = [("plan", 0, 1), ("front", 1, 2), ("side", 0, 2)]
    labels = "xyz"
    fig, axes = plt.subplots(1, 3, figsize=(12, 4))
    for ax, (name, i, j) in zip(axes, views):
        for k, ep in enumerate(episodes):
            p = np.asarray(ep["gripper_path"], dtype=float).reshape(-1, 3)
            line, = ax.plot(p[:, i], p[:, j], lw=1, label=f"ep {k}")
            ax.plot(p[0, i], p[0, j], "o", color=line.get_color(), ms=4)
            ax.plot(p[-1, i], p[-1, j], "x", color=line.get_color(), ms=6)
            if "target_xy" in ep:
                t = np.array([*np.asarray(ep["target_xy"], dtype=float), np.nan])
                if i < 2 and j < 2:
                    ax.plot(t[i], t[j], "s", color=line.get_color(), ms=5, mfc="none")
        ax.set_title(name)
        ax.set_xlabel(f"{labels[i]} [m]")
        ax.set_ylabel(f"{labels[j]} [m]")
        ax.set_aspect("equal", adjustable="datalim")
    axes[0].legend(fontsize=7)
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path
