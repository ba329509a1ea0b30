"""Nearest-neighbour success heatmaps over the target region."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..arm_world.kinematics import WorkspaceSpec


@dataclass
class Heatmap:
    xs: np.ndarray       # raster node x coordinates, shape (nx,)
    ys: np.ndarray       # raster node y coordinates, shape (ny,)
    values: np.ndarray   # (ny, nx); NaN where masked
    mask: np.ndarray     # (ny, nx); True inside the workspace


def nearest_fill(points, values, query) -> np.ndarray:
    """Value of the nearest point for every query row; ties go to the lowest index."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    vals = np.asarray(values, dtype=float).reshape(-1)
    q = np.asarray(query, dtype=float).reshape(-1, 2)
    d2 = ((q[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
    return vals[np.argmin(d2, axis=1)]   # argmin returns the first minimum


def build_heatmap(points, values, workspace: WorkspaceSpec, raster: int | tuple[int, int] = 101) -> Heatmap:
    """Rasterize measured success values over the target rectangle.

    Raster nodes include the rectangle corners, so with ``raster - 1`` a
    multiple of ``grid - 1`` every measured lattice point is itself a node.
    Nodes outside the workspace are masked.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    vals = np.asarray(values, dtype=float).reshape(-1)
    if len(pts) == 0:
        raise ValueError("empty success map")
    if len(pts) != len(vals):
        raise ValueError("points and values differ in length")
    nx, ny = (raster, raster) if isinstance(raster, int) else raster
    if nx < 1 or ny < 1:
        raise ValueError("raster must be positive")
    xs = np.linspace(*workspace.target_x_range, nx) if nx > 1 else np.array([np.mean(workspace.target_x_range)])
    ys = np.linspace(*workspace.target_y_range, ny) if ny > 1 else np.array([np.mean(workspace.target_y_range)])
    gx, gy = np.meshgrid(xs, ys)
    query = np.stack([gx.ravel(), gy.ravel()], axis=1)
    mask = np.array([workspace.contains(p) for p in query]).reshape(ny, nx)
    grid = nearest_fill(pts, vals, query).reshape(ny, nx)
    grid[~mask] = np.nan
    return Heatmap(xs, ys, grid, mask)


def success_map_arrays(per_position: dict) -> tuple[np.ndarray, np.ndarray]:
    """``{"x,y": fraction}`` -> (points, values) in insertion order."""
    pts = np.array([[float(v) for v in k.split(",")] for k in per_position], dtype=float).reshape(-1, 2)
    return pts, np.array(list(per_position.values()), dtype=float)


def save_heatmap(hm: Heatmap, png_path, csv_path=None, points=None, title: str = "success rate") -> Path:
    """PNG rendering plus a CSV of raster values (x, y, value; empty value when masked)."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    png_path = Path(png_path)
    png_path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(5, 4))
    im = ax.imshow(np.ma.masked_invalid(hm.values), origin="lower", vmin=0.0, vmax=1.0, cmap="viridis",
                   extent=(hm.xs[0], hm.xs[-1], hm.ys[0], hm.ys[-1]), aspect="auto")
    if points is not None:
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        ax.scatter(p[:, 0], p[:, 1], c="white", s=12, edgecolors="black", linewidths=0.5)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title(title)
    fig.colorbar(im, ax=ax)
    fig.savefig(png_path, dpi=100)
    plt.close(fig)
    if csv_path is not None:
        with Path(csv_path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "value"])
            for i, y in enumerate(hm.ys):
                for j, x in enumerate(hm.xs):
                    v = hm.values[i, j]
                    w.writerow([repr(float(x)), repr(float(y)), "" if np.isnan(v) else repr(float(v))])
    return png_path
