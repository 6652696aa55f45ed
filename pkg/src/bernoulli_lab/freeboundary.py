"""Free-boundary extraction, positivity density and cone diagnostics.

The free boundary is sampled by the vertices of marching squares (2D) or
marching cubes (3D): one point per lattice edge whose endpoints lie in
different phases, placed by linear interpolation.  A corner value of exactly
zero belongs to the non-positive phase.  Vertices on the flat boundary are
not free-boundary points; they only serve as contact-point candidates.

Cone statistics are taken in coordinates translated to the contact point,
the flat-boundary point nearest the free boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .domain import Ball, HalfBallGrid, MatrixField, ScalarField, interpolate_many
from .errors import BallOutsideDomain, NoContactPoint
from .functional import _lattice_midpoints

# lattice spacings around the contact treated as the contact itself
CONTACT_EXCLUSION = 4.0


@dataclass
class FreeBoundary:
    """Free-boundary sample points with an optional contact point.

    ``exclusion`` is the radius around the contact inside which points count
    as the contact itself (four lattice spacings for extracted boundaries).
    """

    points: np.ndarray
    contact: Optional[np.ndarray] = None
    exclusion: float = 0.0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        self.points = pts if pts.ndim == 2 else pts.reshape(len(pts), -1)
        if self.contact is not None:
            self.contact = np.asarray(self.contact, dtype=float)

    @classmethod
    def from_points(cls, points, contact=None, exclusion: float = 0.0) -> "FreeBoundary":
        return cls(np.atleast_2d(np.asarray(points, dtype=float)), contact, exclusion)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def recentered(self) -> np.ndarray:
        if self.contact is None:
            return self.points.copy()
        return self.points - self.contact

    def _near_contact(self, rel: np.ndarray) -> np.ndarray:
        r = np.linalg.norm(rel, axis=1)
        return r <= max(self.exclusion, 1e-12)

    @property
    def ratios(self) -> np.ndarray:
        """x_N / |x| per point after recentering; 0 at the contact itself."""
        rel = self.recentered()
        r = np.linalg.norm(rel, axis=1)
        out = np.zeros(len(rel))
        ok = ~self._near_contact(rel)
        out[ok] = np.clip(rel[ok, -1] / r[ok], 0.0, 1.0)
        return out

    def to_dict(self) -> dict:
        return {
            "contact": None if self.contact is None else self.contact.tolist(),
            "count": len(self),
            "max_ratio": float(self.ratios.max()) if len(self) else None,
        }


@dataclass
class ConeReport:
    radii: list
    s: list
    empty: list
    contact: Optional[list]
    epsilon: Optional[float] = None
    violations: list = field(default_factory=list)
    no_contact: bool = False

    def to_dict(self) -> dict:
        return {
            "contact": self.contact,
            "empty": list(self.empty),
            "epsilon": self.epsilon,
            "no_contact": self.no_contact,
            "radii": list(self.radii),
            "s": [None if np.isnan(v) else float(v) for v in self.s],
            "violations": [len(v) for v in self.violations],
        }


def _edge_vertices(grid: HalfBallGrid, arr: np.ndarray, axis: int):
    """Crossing points on lattice edges along ``axis``; returns (points, lower index)."""
    n = arr.shape[axis]
    v0 = np.take(arr, np.arange(n - 1), axis=axis)
    v1 = np.take(arr, np.arange(1, n), axis=axis)
    with np.errstate(invalid="ignore"):
        hit = np.isfinite(v0) & np.isfinite(v1) & ((v0 > 0) != (v1 > 0))
    idx = np.argwhere(hit)
    a, b = v0[hit], v1[hit]
    t = a / (a - b)
    pts = grid.origin + idx * grid.h
    pts[:, axis] += t * grid.h
    return pts, idx


def _contact_point(grid: HalfBallGrid, flat_pts: np.ndarray, band_pts: np.ndarray):
    """Flat-boundary point nearest the free boundary, closest to the origin on ties.

    Sign changes of the data along the flat boundary are contacts outright.
    Otherwise each cluster of vertices within one spacing of the flat
    boundary proposes the projection of its lowest vertex.
    """
    cands = [p for p in flat_pts]
    if len(band_pts):
        tang = band_pts[:, :-1]
        order = np.lexsort(tang.T[::-1])
        band = band_pts[order]
        # single-linkage clusters in the tangential variables
        gaps = np.linalg.norm(np.diff(band[:, :-1], axis=0), axis=1) > 2.0 * grid.h
        starts = np.concatenate([[0], np.flatnonzero(gaps) + 1, [len(band)]])
        for s, e in zip(starts[:-1], starts[1:]):
            chunk = band[s:e]
            low = chunk[np.argmin(chunk[:, -1])].copy()
            low[-1] = 0.0
            cands.append(low)
    if not cands:
        return None
    cands = np.array(cands)
    r = np.linalg.norm(cands, axis=1)
    best = np.flatnonzero(r <= r.min() + 1e-12)
    pick = best[np.argmax(cands[best, 0])] if len(best) > 1 else best[0]
    return cands[pick]


def extract_free_boundary(u: ScalarField) -> FreeBoundary:
    """Marching-squares/cubes vertices of the level set 0+ of ``u``."""
    grid = u.grid
    arr = u.array
    pts, flat = [], []
    for axis in range(grid.dim):
        p, idx = _edge_vertices(grid, arr, axis)
        on_flat = p[:, -1] <= 0.0
        if axis < grid.dim - 1:
            flat.append(p[on_flat])
        pts.append(p[~on_flat])
    points = np.concatenate(pts) if pts else np.zeros((0, grid.dim))
    flat_pts = np.concatenate(flat) if flat else np.zeros((0, grid.dim))
    band = points[points[:, -1] <= grid.h * (1 + 1e-9)]
    contact = _contact_point(grid, flat_pts, band)
    return FreeBoundary(points, contact, exclusion=CONTACT_EXCLUSION * grid.h * (1 + 1e-9))


def _flat_center(grid: HalfBallGrid, center) -> np.ndarray:
    if center is None:
        return np.zeros(grid.dim)
    c = np.atleast_1d(np.asarray(center, dtype=float))
    if c.size == grid.dim - 1:
        c = np.append(c, 0.0)
    if c.size != grid.dim or c[-1] != 0.0:
        raise ValueError("center must be a flat-boundary point")
    return c


def _cell_positive(u: ScalarField) -> np.ndarray:
    return np.nan_to_num(_lattice_midpoints(u), nan=-1.0) > 0


def positivity_density(u: ScalarField, rho: float, center=None) -> float:
    """|B_rho^+(center) cap {u > 0}| / |B_rho^+(center)| by area-weighted cells."""
    grid = u.grid
    ball = Ball(_flat_center(grid, center), float(rho))
    if not grid.contains_ball(ball):
        raise BallOutsideDomain(f"{ball} is not inside the half-ball of radius {grid.radius}")
    w = grid.ball_fraction(ball)
    total = w.sum()
    return float(w[_cell_positive(u)].sum() / total) if total > 0 else 0.0


def indicator_l1_distance(u: ScalarField, v: ScalarField, region: Optional[Ball] = None) -> float:
    """Measure of {u > 0} symmetric-difference {v > 0} inside ``region``."""
    u.grid.require_same(v.grid)
    grid = u.grid
    if region is not None and not grid.contains_ball(region):
        raise BallOutsideDomain(f"{region} is not inside the half-ball of radius {grid.radius}")
    w = grid.cell_fraction if region is None else grid.ball_fraction(region)
    diff = _cell_positive(u) != _cell_positive(v)
    return float(grid.h ** grid.dim * w[diff].sum())


def _in_ball(fb: FreeBoundary, rho: float):
    rel = fb.recentered()
    r = np.linalg.norm(rel, axis=1)
    keep = (r <= rho) & ~fb._near_contact(rel)
    return rel, keep


def cone_membership(fb: FreeBoundary, epsilon: float, rho: float) -> np.ndarray:
    """Recentered points in B_rho with x_N >= epsilon |x'| (the cone K_epsilon)."""
    if not epsilon > 0:
        raise ValueError("cone aperture must be positive")
    if len(fb) == 0:
        return np.zeros((0, fb.dim))
    if fb.contact is None:
        raise NoContactPoint("free boundary has no contact point with the flat boundary")
    rel, keep = _in_ball(fb, rho)
    tang = np.linalg.norm(rel[:, :-1], axis=1)
    hit = keep & (rel[:, -1] >= epsilon * tang)
    return rel[hit]


def sigma_profile(
    fb: FreeBoundary,
    radii: Sequence[float],
    epsilon: Optional[float] = None,
    strict: bool = False,
) -> ConeReport:
    """s(rho) = max of x_N/|x| over recentered points in B_rho minus the contact.

    Without a contact point the report is flagged (or ``NoContactPoint`` is
    raised when ``strict``).  Empty intersections give NaN and a flag.
    """
    radii = [float(r) for r in radii]
    if any(r <= 0 for r in radii) or any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be positive and strictly ascending")
    if fb.contact is None:
        if strict:
            raise NoContactPoint("free boundary has no contact point with the flat boundary")
        nan = [float("nan")] * len(radii)
        return ConeReport(radii, nan, [True] * len(radii), None, epsilon, [], no_contact=True)
    ratios = fb.ratios
    s, empty, viol = [], [], []
    for rho in radii:
        _, keep = _in_ball(fb, rho)
        if keep.any():
            s.append(float(ratios[keep].max()))
            empty.append(False)
        else:
            s.append(float("nan"))
            empty.append(True)
        if epsilon is not None:
            viol.append(cone_membership(fb, epsilon, rho))
    return ConeReport(radii, s, empty, fb.contact.tolist(), epsilon, viol)


@dataclass
class GradientJump:
    points: np.ndarray
    p_plus: np.ndarray
    p_minus: np.ndarray
    jump: np.ndarray


def gradient_jump(
    u: ScalarField,
    fb: FreeBoundary,
    A: Optional[MatrixField] = None,
    delta: Optional[float] = None,
    margin: float = 0.1,
) -> GradientJump:
    """One-sided A-weighted slopes across the free boundary.

    Along the unit gradient direction n, p+ is the slope of u between x + d n
    and x + 2d n and p- the slope between x - 2d n and x - d n, so both
    samples stay inside their phase.  Points closer than ``margin`` to the
    curved or flat boundary are skipped.
    """
    grid = u.grid
    d = 2.0 * grid.h if delta is None else float(delta)
    pts = fb.points
    r = np.linalg.norm(pts, axis=1)
    pts = pts[(grid.radius - r > margin) & (pts[:, -1] > margin)]
    if len(pts) == 0:
        z = np.zeros(0)
        return GradientJump(pts, z, z, z)
    eye = np.eye(grid.dim) * grid.h
    grad = np.stack(
        [(interpolate_many(u, pts + e) - interpolate_many(u, pts - e)) / (2 * grid.h) for e in eye],
        axis=1,
    )
    norm = np.linalg.norm(grad, axis=1)
    ok = norm > 0
    pts, n = pts[ok], grad[ok] / norm[ok, None]
    f = lambda s: interpolate_many(u, pts + s * d * n)
    p_plus = (f(2) - f(1)) / d
    p_minus = (f(-1) - f(-2)) / d
    w = np.ones(len(pts)) if A is None else np.einsum("pi,pij,pj->p", n, interpolate_many(A, pts), n)
    return GradientJump(pts, p_plus, p_minus, w * (p_plus ** 2 - p_minus ** 2))
