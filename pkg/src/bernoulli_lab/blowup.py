"""Blow-up sequences u_r(x) = u(c + r x)/r with coefficients A(c + r x).

All members of a sequence are resampled onto one analysis half-ball, so the
convergence diagnostics are nodal comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .domain import (
    Ball,
    HalfBallGrid,
    MatrixField,
    ScalarField,
    blowup_field,
    rescale_coefficients,
)
from .errors import BallOutsideDomain, RadiusOverflow
from .functional import dirichlet_energy, energy
from .reports import CheckReport


def _region_nodes(f: ScalarField, region: Optional[Ball]) -> np.ndarray:
    if region is None:
        return np.ones(f.grid.node_count, dtype=bool)
    if not f.grid.contains_ball(region):
        raise BallOutsideDomain(f"{region} is not inside the half-ball of radius {f.grid.radius}")
    d = np.linalg.norm(f.grid.coords - region.center, axis=1)
    return d <= region.radius * (1 + 1e-12)


def uniform_distance(f: ScalarField, g: ScalarField, region: Optional[Ball] = None) -> float:
    """max |f - g| over the nodes inside ``region`` (default: all nodes)."""
    f.grid.require_same(g.grid)
    sel = _region_nodes(f, region)
    if not sel.any():
        return 0.0
    return float(np.max(np.abs(f.values[sel] - g.values[sel])))


@dataclass(frozen=True)
class ProfileFit:
    c: float
    residual: float
    degenerate: bool = False

    def __iter__(self):
        return iter((self.c, self.residual))

    def to_dict(self) -> dict:
        return {"c": self.c, "degenerate": self.degenerate, "residual": self.residual}


def fit_halfplane_profile(u: ScalarField, region: Optional[Ball] = None) -> ProfileFit:
    """Best uniform fit of c * x_N^+ with c >= 0 over the nodes in ``region``."""
    sel = _region_nodes(u, region)
    vals = u.values[sel]
    xn = u.grid.coords[sel, -1]
    top_u = float(np.max(np.abs(vals))) if vals.size else 0.0
    top_x = float(np.max(xn)) if xn.size else 0.0
    if top_u == 0.0 or top_x == 0.0:
        return ProfileFit(0.0, top_u, degenerate=True)
    dist = lambda c: float(np.max(np.abs(vals - c * xn)))
    hi = 2.0 * top_u / top_x
    res = minimize_scalar(dist, bounds=(0.0, hi), method="bounded", options={"xatol": 1e-13 * hi})
    c, r = float(res.x), float(res.fun)
    for edge in (0.0, hi):
        if dist(edge) < r:
            c, r = edge, dist(edge)
    return ProfileFit(c, r, degenerate=c == 0.0)


@dataclass
class BlowupSequence:
    u: ScalarField
    A: MatrixField
    radii: list
    R: float
    center: np.ndarray
    grid: HalfBallGrid
    fields: list = field(default_factory=list)
    coefficients: list = field(default_factory=list)
    distances: list = field(default_factory=list)
    h1: list = field(default_factory=list)
    fits: list = field(default_factory=list)
    flat_sup: list = field(default_factory=list)

    @property
    def diagnostic_region(self) -> Ball:
        return Ball(np.zeros(self.grid.dim), min(1.0, self.R))

    def to_dict(self) -> dict:
        return {
            "center": self.center.tolist(),
            "distances": list(self.distances),
            "fits": [f.to_dict() for f in self.fits],
            "flat_sup": list(self.flat_sup),
            "h1": list(self.h1),
            "R": self.R,
            "radii": list(self.radii),
        }


def _analysis_spacing(R: float, h: float) -> float:
    n = R / h
    if abs(n - round(n)) > 1e-9:
        raise ValueError(f"analysis radius {R} is not a multiple of spacing {h}")
    return R / round(n)


def generate_sequence(
    u: ScalarField,
    A: MatrixField,
    radii: Sequence[float],
    R: float = 1.0,
    center=None,
    h: Optional[float] = None,
) -> BlowupSequence:
    """Blow-ups of ``u`` and ``A`` at ``center`` (a flat point) for each radius."""
    radii = [float(r) for r in radii]
    if not radii or any(not 0 < r <= 1 for r in radii) or any(b >= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly decreasing in (0, 1]")
    u.grid.require_same(A.grid)
    base = u.grid
    c = np.zeros(base.dim) if center is None else np.asarray(center, dtype=float)
    reach = R * radii[0] + float(np.linalg.norm(c))
    if reach > base.radius * (1 + 1e-12):
        raise RadiusOverflow(
            f"analysis radius {R} at scale {radii[0]} needs data up to {reach:.6g} > {base.radius}"
        )
    grid = HalfBallGrid(R, _analysis_spacing(R, base.h if h is None else h), base.dim)
    seq = BlowupSequence(u, A, radii, float(R), c, grid)
    eye = MatrixField.identity(grid, A.mu)
    region = seq.diagnostic_region
    flat = grid.node_class[grid.mask] == 2
    for r in radii:
        ur = blowup_field(u, r, center=c, grid=grid)
        seq.fields.append(ur)
        seq.coefficients.append(rescale_coefficients(A, r, center=c, grid=grid))
        seq.h1.append(dirichlet_energy(ur, eye, region))
        seq.fits.append(fit_halfplane_profile(ur, region))
        seq.flat_sup.append(float(np.max(np.abs(ur.values[flat]))))
    seq.distances = [
        uniform_distance(a, b, region) for a, b in zip(seq.fields, seq.fields[1:])
    ]
    return seq


def scaling_identity_check(
    u: ScalarField,
    A: MatrixField,
    lambda_plus: float,
    lambda_minus: float,
    r: float,
    target_A: Optional[MatrixField] = None,
    tol: Optional[float] = None,
) -> CheckReport:
    """Compare r^N E(u_r, A^r; B_2^+) with E(u, A; B_2r^+).

    The blow-up lives on a half-ball of radius 2 with spacing h/r, so its
    nodes are the base nodes of B_2r^+ and both sides use matched quadrature.
    ``target_A`` replaces A^r on that grid (for adversarial variants).
    """
    if not 0 < r < 1:
        raise ValueError("scale must lie in (0, 1)")
    base = u.grid
    if 2 * r > base.radius * (1 + 1e-12):
        raise RadiusOverflow(f"B_2r with r={r} leaves the half-ball of radius {base.radius}")
    grid = HalfBallGrid(2.0, _analysis_spacing(2.0, base.h / r), base.dim)
    ur = blowup_field(u, r, grid=grid)
    Ar = rescale_coefficients(A, r, grid=grid) if target_A is None else target_A
    lhs = r ** base.dim * energy(ur, Ar, lambda_plus, lambda_minus).total
    rhs = energy(u, A, lambda_plus, lambda_minus, Ball(np.zeros(base.dim), 2 * r)).total
    tol = 10.0 * base.h if tol is None else tol
    gap = abs(lhs - rhs)
    return CheckReport(
        name="scaling_identity",
        passed=gap <= tol * (1.0 + abs(rhs)),
        measured=gap,
        bound=0.0,
        tolerance=tol * (1.0 + abs(rhs)),
        details={"base_energy": rhs, "r": r, "scaled_blowup_energy": lhs},
    )
