"""Two-phase energy and its smoothed surrogate on a half-ball lattice.

Per cell the Dirichlet density is the average, over every choice of one
edge difference per axis, of the constant-gradient energy built from those
differences::

    [sum_k A_kk mean(e_k^2) + sum_{k!=l} A_kl mean(e_k) mean(e_l)] / h^2

with A taken at the cell midpoint (mean of the corner matrices).  In 2D this
equals the mean of the four linear-triangle energies of both diagonal splits, so
it is positive semidefinite, has no hourglass modes and reduces to the
5-point Laplacian for A = Id.  The phase of a cell is the sign of the
multilinear interpolant at its midpoint; zero counts as the negative phase.
Cells are weighted by the fraction of their area inside the integration
region.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .domain import Ball, MatrixField, ScalarField
from .errors import BallOutsideDomain, NonpositiveEpsilon


@dataclass(frozen=True)
class EnergyBreakdown:
    dirichlet: float
    volume_plus: float
    volume_minus: float

    @property
    def total(self) -> float:
        return self.dirichlet + self.volume_plus + self.volume_minus

    def to_dict(self) -> dict:
        return {
            "dirichlet": self.dirichlet,
            "total": self.total,
            "volume_minus": self.volume_minus,
            "volume_plus": self.volume_plus,
        }


@dataclass(frozen=True)
class SmoothedEnergy:
    value: float
    epsilon: float
    gradient: ScalarField
    dirichlet: float
    volume: float


def _local_forms(dim: int):
    """Constant matrices Q[k][l] with corner-vector quadratic forms per A entry."""
    corners = list(itertools.product((0, 1), repeat=dim))
    nc = len(corners)
    pos = {c: i for i, c in enumerate(corners)}
    half = 2 ** (dim - 1)
    D = []
    for k in range(dim):
        rows = []
        for c in corners:
            if c[k] == 0:
                hi = list(c)
                hi[k] = 1
                row = np.zeros(nc)
                row[pos[tuple(hi)]] = 1.0
                row[pos[c]] = -1.0
                rows.append(row)
        D.append(np.array(rows))
    Mv = [d.sum(axis=0) / half for d in D]
    Q = np.zeros((dim, dim, nc, nc))
    for k in range(dim):
        Q[k, k] = D[k].T @ D[k] / half
        for l in range(dim):
            if l != k:
                Q[k, l] = np.outer(Mv[k], Mv[l])
    # symmetrise off-diagonal pairs so A_kl Q_kl + A_lk Q_lk is symmetric
    for k in range(dim):
        for l in range(k + 1, dim):
            s = 0.5 * (Q[k, l] + Q[l, k])
            Q[k, l] = s
            Q[l, k] = s
    return corners, Q


class Discretization:
    """Index maps and operators shared by energy, solver and minimizer.

    ``cells`` lists the active cells (positive area in the half-ball) in C
    order; ``corner_nodes[c]`` holds the node numbers of its 2^N corners.
    ``K`` is the stiffness matrix, with v^T K v equal to the Dirichlet energy
    over the whole half-ball, and ``P`` maps nodal values to cell midpoints.
    """

    def __init__(self, A: MatrixField):
        grid = A.grid
        self.grid = grid
        self.A = A
        dim = grid.dim
        self.corners, self.Q = _local_forms(dim)
        node_index = np.full(grid.shape, -1, dtype=np.int64)
        node_index[grid.mask] = np.arange(grid.node_count)
        self.node_index = node_index
        frac = grid.cell_fraction
        active = frac > 0
        self.cell_mask = active
        self.cells = np.argwhere(active)
        corner_nodes = np.empty((len(self.cells), len(self.corners)), dtype=np.int64)
        for j, c in enumerate(self.corners):
            corner_nodes[:, j] = node_index[tuple((self.cells + np.array(c)).T)]
        assert np.all(corner_nodes >= 0)
        self.corner_nodes = corner_nodes
        self.weights = frac[active].copy()
        Ac = A.cell_average()[active]
        self.A_cells = Ac
        # local stiffness per cell: sum_kl A_kl Q_kl, scaled by h^(N-2)
        self.local = np.einsum("ckl,klij->cij", Ac, self.Q)
        self.scale = grid.h ** (dim - 2)
        self.cell_volume = grid.h ** dim
        self.K = self._assemble(self.weights)
        n = len(self.corners)
        rows = np.repeat(np.arange(len(self.cells)), n)
        self.P = sp.csr_matrix(
            (np.full(rows.size, 1.0 / n), (rows, corner_nodes.ravel())),
            shape=(len(self.cells), grid.node_count),
        )

    def _assemble(self, weights):
        n = len(self.corners)
        data = (self.local * (weights * self.scale)[:, None, None]).ravel()
        rows = np.repeat(self.corner_nodes, n, axis=1).ravel()
        cols = np.tile(self.corner_nodes, (1, n)).ravel()
        K = sp.csr_matrix((data, (rows, cols)), shape=(self.grid.node_count,) * 2)
        K.sum_duplicates()
        return K

    def region_weights(self, region: Optional[Ball]) -> np.ndarray:
        if region is None:
            return self.weights
        if not self.grid.contains_ball(region):
            raise BallOutsideDomain(
                f"region {region} is not inside the half-ball of radius {self.grid.radius}"
            )
        return self.grid.ball_fraction(region)[self.cell_mask]

    def cell_dirichlet(self, v: np.ndarray) -> np.ndarray:
        """Dirichlet energy density times h^N per active cell (unweighted)."""
        V = v[self.corner_nodes]
        return self.scale * np.einsum("ci,cij,cj->c", V, self.local, V)

    def midpoints(self, v: np.ndarray) -> np.ndarray:
        return v[self.corner_nodes].mean(axis=1)


_CACHE: dict = {}


def discretization(A: MatrixField) -> Discretization:
    """Cached ``Discretization`` for a coefficient field (keyed by identity)."""
    key = id(A)
    hit = _CACHE.get(key)
    if hit is not None and hit[0] is A:
        return hit[1]
    disc = Discretization(A)
    if len(_CACHE) > 16:
        _CACHE.clear()
    _CACHE[key] = (A, disc)
    return disc


def _check_pair(v: ScalarField, A: MatrixField):
    v.grid.require_same(A.grid)


def energy(
    v: ScalarField,
    A: MatrixField,
    lambda_plus: float,
    lambda_minus: float,
    region: Optional[Ball] = None,
) -> EnergyBreakdown:
    """Exact (unsmoothed) two-phase energy of ``v`` over ``region`` (default: all)."""
    _check_pair(v, A)
    disc = discretization(A)
    w = disc.region_weights(region)
    vals = v.values
    dir_ = float(np.dot(w, disc.cell_dirichlet(vals)))
    pos = disc.midpoints(vals) > 0.0
    vol = disc.cell_volume
    return EnergyBreakdown(
        dirichlet=dir_,
        volume_plus=float(lambda_plus * vol * w[pos].sum()),
        volume_minus=float(lambda_minus * vol * w[~pos].sum()),
    )


def dirichlet_energy(v: ScalarField, A: MatrixField, region: Optional[Ball] = None) -> float:
    _check_pair(v, A)
    disc = discretization(A)
    w = disc.region_weights(region)
    return float(np.dot(w, disc.cell_dirichlet(v.values)))


def ramp(t, eps):
    return np.clip(np.asarray(t, dtype=float) / eps, 0.0, 1.0)


def ramp_slope(t, eps):
    t = np.asarray(t, dtype=float)
    return np.where((t > 0.0) & (t < eps), 1.0 / eps, 0.0)


def smoothed_energy(
    v: ScalarField,
    A: MatrixField,
    lambda_plus: float,
    lambda_minus: float,
    eps: float,
    region: Optional[Ball] = None,
) -> SmoothedEnergy:
    """Energy with chi{v>0} replaced by the ramp H_eps, plus its nodal gradient."""
    if not eps > 0:
        raise NonpositiveEpsilon(f"smoothing width must be positive, got {eps!r}")
    _check_pair(v, A)
    disc = discretization(A)
    w = disc.region_weights(region)
    vals = v.values
    dir_cells = disc.cell_dirichlet(vals)
    m = disc.midpoints(vals)
    dl = lambda_plus - lambda_minus
    vol = disc.cell_volume * w
    volume = float(np.dot(vol, lambda_minus + dl * ramp(m, eps)))
    dirichlet = float(np.dot(w, dir_cells))
    K = disc.K if region is None else disc._assemble(w)
    grad = 2.0 * (K @ vals) + dl * (disc.P.T @ (vol * ramp_slope(m, eps)))
    return SmoothedEnergy(
        value=dirichlet + volume,
        epsilon=float(eps),
        gradient=ScalarField(v.grid, grad),
        dirichlet=dirichlet,
        volume=volume,
    )


def transition_layer_measure(v: ScalarField, A: MatrixField, eps: float, region=None) -> float:
    """Area-weighted measure of cells with 0 < midpoint value < eps."""
    disc = discretization(A)
    w = disc.region_weights(region)
    m = disc.midpoints(v.values)
    layer = (m > 0) & (m < eps)
    return float(disc.cell_volume * w[layer].sum())


def positive_measure(v: ScalarField, region: Optional[Ball] = None) -> float:
    """Area-weighted measure of {v > 0} by the midpoint rule."""
    grid = v.grid
    w = grid.cell_fraction if region is None else grid.ball_fraction(region)
    mids = _lattice_midpoints(v)
    return float(grid.h ** grid.dim * w[np.nan_to_num(mids, nan=-1.0) > 0].sum())


def _lattice_midpoints(v: ScalarField) -> np.ndarray:
    grid = v.grid
    acc = np.zeros(grid.cell_shape)
    for corner in itertools.product((0, 1), repeat=grid.dim):
        sl = tuple(slice(c, c + s) for c, s in zip(corner, grid.cell_shape))
        acc = acc + v.array[sl]
    return acc / 2 ** grid.dim
