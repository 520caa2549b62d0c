"""File formats: time-series CSV, Wigner grid text files, Poincare point CSV."""
from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from ..observables import FIELDS, WignerGrid

GRID_MAGIC = "# kerrpurity wigner grid v1"


def fmt(x: float) -> str:
    """Nine significant digits, C-locale decimal point."""
    x = float(x) + 0.0  # no negative zero
    if not math.isfinite(x):
        raise ValueError(f"refusing to write non-finite value {x}")
    return f"{x:.8e}"


def timeseries_rows(series):
    """Rows (t, excitation, purity, linear_entropy, von_neumann) from a TimeSeries."""
    if series is None or len(series.t) == 0:
        return []
    purity = np.asarray(series["purity"])
    cols = [series.t, series["excitation"], purity, 1.0 - purity, series["von_neumann"]]
    return list(zip(*cols))


def write_timeseries_csv(path, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FIELDS)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_timeseries_csv(path) -> dict:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = [[float(v) for v in row] for row in reader]
    arr = np.array(data, dtype=float).reshape(-1, len(header))
    return {name: arr[:, k] for k, name in enumerate(header)}


def write_points_csv(path, points) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y"])
        for x, y in np.asarray(points, dtype=float):
            w.writerow([fmt(x), fmt(y)])
    return path


def read_points_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        return np.array([[float(a), float(b)] for a, b in reader]).reshape(-1, 2)


def write_grid(path, grid: WignerGrid, t=None) -> Path:
    """Header lines (bounds, resolution), then ``nx`` rows of ``ny`` values."""
    path = Path(path)
    with open(path, "w") as fh:
        fh.write(GRID_MAGIC + "\n")
        if t is not None:
            fh.write(f"t {fmt(t)}\n")
        for key in ("x_min", "x_max", "y_min", "y_max"):
            fh.write(f"{key} {fmt(getattr(grid, key))}\n")
        fh.write(f"nx {grid.nx}\nny {grid.ny}\n")
        for row in np.asarray(grid.values):
            fh.write(" ".join(fmt(v) for v in row) + "\n")
    return path


def read_grid_header(path) -> dict:
    header = {}
    with open(path) as fh:
        if fh.readline().rstrip("\n") != GRID_MAGIC:
            raise ValueError(f"{path} is not a Wigner grid file")
        for line in fh:
            key, _, value = line.strip().partition(" ")
            if key in ("nx", "ny"):
                header[key] = int(value)
                if key == "ny":
                    break
            else:
                header[key] = float(value)
    return header


def read_grid(path) -> WignerGrid:
    header = read_grid_header(path)
    n_header = 1 + len(header)
    values = np.loadtxt(path, skiprows=n_header, ndmin=2)
    values = values.reshape(header["nx"], header["ny"])
    return WignerGrid(header["x_min"], header["x_max"], header["y_min"], header["y_max"],
                      header["nx"], header["ny"], values)


def render_contour(grid: WignerGrid, path, points=None, title=None) -> Path:
    """Contour image of a Wigner grid, optionally overlaid with Poincare points."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 5))
    xx, yy = np.meshgrid(grid.xs, grid.ys, indexing="ij")
    cs = ax.contour(xx, yy, grid.values, levels=12, cmap="viridis", linewidths=0.8)
    fig.colorbar(cs, ax=ax, shrink=0.8)
    if points is not None and len(points):
        pts = np.asarray(points)
        ax.plot(pts[:, 0], pts[:, 1], ",", color="k", alpha=0.6)
    ax.set_xlabel("X = Re(alpha)")
    ax.set_ylabel("Y = Im(alpha)")
    ax.set_aspect("equal")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def render_points(points, path, title=None) -> Path:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 5))
    pts = np.asarray(points)
    ax.plot(pts[:, 0], pts[:, 1], ".", markersize=1.5, color="k")
    ax.set_xlabel("X = Re(alpha)")
    ax.set_ylabel("Y = Im(alpha)")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)
