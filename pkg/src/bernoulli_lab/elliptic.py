"""A-harmonic Dirichlet solves and harmonic replacement.

The discrete operator is the Hessian of the Dirichlet energy used by
``functional``, so solves are energy minimisations and the replacement
never raises the energy it is compared with.
"""

from __future__ import annotations

import itertools
import math
from typing import Optional

import numpy as np

from .domain import Ball, HalfBallGrid, MatrixField, ScalarField
from .errors import BallOutsideDomain, SolverDivergence
from .functional import discretization
from .reports import CheckReport


def pcg(K, b, x0=None, rtol=1e-12, maxiter=None):
    """Jacobi-preconditioned conjugate gradients for SPD ``K``.

    Returns ``(x, iterations, relative_residual)``; raises ``SolverDivergence``
    when the cap is reached first.
    """
    n = b.shape[0]
    if n == 0:
        return np.zeros(0), 0, 0.0
    if maxiter is None:
        maxiter = max(100, int(50 * math.sqrt(n)))
    dinv = 1.0 / K.diagonal()
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - K @ x
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        bnorm = 1.0
    z = dinv * r
    p = z.copy()
    rz = float(r @ z)
    res = float(np.linalg.norm(r)) / bnorm
    for it in range(maxiter + 1):
        if res <= rtol:
            return x, it, res
        if it == maxiter:
            break
        Kp = K @ p
        alpha = rz / float(p @ Kp)
        x += alpha * p
        r -= alpha * Kp
        res = float(np.linalg.norm(r)) / bnorm
        z = dinv * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverDivergence(f"PCG stopped after {maxiter} iterations at relative residual {res:.3e}")


def _solve_free(A: MatrixField, values: np.ndarray, free: np.ndarray) -> np.ndarray:
    """Minimise v^T K v over the ``free`` nodes, others held at ``values``."""
    disc = discretization(A)
    K = disc.K
    out = values.copy()
    if not free.any():
        return out
    fixed = ~free
    KFF = K[free][:, free]
    rhs = -(K[free][:, fixed] @ values[fixed])
    x, _, _ = pcg(KFF.tocsr(), rhs)
    out[free] = x
    return out


def solve_dirichlet(A: MatrixField, grid: HalfBallGrid, g: ScalarField) -> ScalarField:
    """A-harmonic field with the boundary values of ``g`` on flat and curved nodes."""
    grid.require_same(A.grid)
    grid.require_same(g.grid)
    free = A.grid.interior_mask[A.grid.mask]
    vals = np.where(free, 0.0, g.values)
    return ScalarField(A.grid, _solve_free(A, vals, free))


def weak_residual(u: ScalarField, A: MatrixField, free: Optional[np.ndarray] = None) -> float:
    """max |(K u)_i| over free nodes (default: interior nodes)."""
    disc = discretization(A)
    if free is None:
        free = A.grid.interior_mask[A.grid.mask]
    r = disc.K @ u.values
    return float(np.max(np.abs(r[free]))) if free.any() else 0.0


def region_free_nodes(grid: HalfBallGrid, region: Ball) -> np.ndarray:
    """Interior nodes all of whose incident cells lie entirely inside ``region``."""
    frac = grid.ball_fraction(region) >= 1.0 - 1e-12
    ok = grid.interior_mask.copy()
    for corner in itertools.product((0, 1), repeat=grid.dim):
        sl = tuple(slice(c, c + s) for c, s in zip(corner, grid.cell_shape))
        inside = np.zeros(grid.shape, dtype=bool)
        inside[sl] = frac
        ok &= inside
    return ok[grid.mask]


def harmonic_replacement(u: ScalarField, A: MatrixField, region: Ball) -> ScalarField:
    """Replace ``u`` inside ``region`` by the A-harmonic field with the same trace."""
    u.grid.require_same(A.grid)
    if not u.grid.contains_ball(region):
        raise BallOutsideDomain(f"region {region} is not inside the half-ball")
    free = region_free_nodes(u.grid, region)
    return ScalarField(u.grid, _solve_free(A, u.values, free))


def check_maximum_principle(u: ScalarField, g: ScalarField, rel_tol: float = 1e-10) -> CheckReport:
    """min g <= u <= max g over the boundary nodes, up to rel_tol * scale."""
    bmask = u.grid.boundary_mask[u.grid.mask]
    gb = g.values[bmask]
    lo, hi = float(gb.min()), float(gb.max())
    scale = 1.0 + max(abs(lo), abs(hi))
    vals = u.values
    excess = max(lo - float(vals.min()), float(vals.max()) - hi, 0.0)
    return CheckReport(
        name="maximum_principle",
        passed=excess <= rel_tol * scale,
        measured=excess,
        bound=0.0,
        tolerance=rel_tol * scale,
        details={"boundary_min": lo, "boundary_max": hi},
    )
