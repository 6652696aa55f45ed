"""Plain-text field files.

Header ``fbfield v1 <dim> <radius> <h>``, then one line per non-exterior node
with its coordinates and value.  Every float is written with 17 significant
digits, which round-trips IEEE doubles exactly.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .domain import HalfBallGrid, ScalarField
from .errors import MismatchedGrids

MAGIC = "fbfield"
VERSION = "v1"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_field(u: ScalarField, path) -> Path:
    grid = u.grid
    path = Path(path)
    lines = [f"{MAGIC} {VERSION} {grid.dim} {_fmt(grid.radius)} {_fmt(grid.h)}"]
    for x, v in zip(grid.coords, u.values):
        lines.append(" ".join(_fmt(c) for c in x) + " " + _fmt(v))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_field(path, grid: HalfBallGrid = None) -> ScalarField:
    """Read a field file; ``grid`` (optional) must match the header."""
    with open(path, encoding="utf-8") as fh:
        head = fh.readline().split()
        if len(head) != 5 or head[0] != MAGIC or head[1] != VERSION:
            raise ValueError(f"{path}: not an {MAGIC} {VERSION} file")
        dim, radius, h = int(head[2]), float(head[3]), float(head[4])
        data = np.loadtxt(fh, ndmin=2)
    if grid is None:
        grid = HalfBallGrid(radius, h, dim)
    elif (grid.dim, grid.radius, grid.h) != (dim, radius, h):
        raise MismatchedGrids(f"{path}: header grid ({dim}, {radius}, {h}) differs from the given grid")
    if data.shape != (grid.node_count, dim + 1):
        raise ValueError(f"{path}: expected {grid.node_count} rows of {dim + 1} columns")
    if not np.allclose(data[:, :dim], grid.coords, rtol=0, atol=1e-12 * max(1.0, radius)):
        raise ValueError(f"{path}: node coordinates do not match the lattice")
    return ScalarField(grid, data[:, dim].copy())
