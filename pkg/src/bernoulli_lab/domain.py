"""Discrete half-balls, nodal fields and the checks on problem data.

The half-ball B_R^+ = {|x| < R, x_N > 0} is realised on a uniform Cartesian
lattice with spacing h that is clipped to the ball.  Lattice axis ``k`` for
``k < N-1`` runs over ``-R, -R+h, ..., R``; the last axis runs over
``0, h, ..., R``.  Cells are the lattice boxes; every cell carries the exact
fraction of its volume lying inside the ball (analytic in 2D, sampled in 3D).
A node is *non-exterior* iff it is a corner of a cell that meets the ball.

Fields keep the full lattice array with NaN at exterior nodes, which keeps
stencil code slice-based.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    BallOutsideDomain,
    InvalidDimension,
    MismatchedGrids,
    NonEllipticCoefficients,
    PointOutsideDomain,
    ResolutionTooCoarse,
    TargetRadiusExceedsDomain,
)
from .reports import CheckReport

EXTERIOR, INTERIOR, FLAT, CURVED = 0, 1, 2, 3
MIN_RESOLUTION = 16
_FULL = 1.0 - 1e-12


@dataclass(frozen=True)
class Ball:
    """Region B_radius(center) intersected with the upper half-space."""

    center: tuple
    radius: float

    @classmethod
    def at_origin(cls, radius: float, dim: int = 2) -> "Ball":
        return cls(tuple([0.0] * dim), float(radius))


# ---------------------------------------------------------------------------
# exact cell/disk areas (2D)


def _segment_integral(x, R):
    """Antiderivative of sqrt(R^2 - x^2), constant outside [-R, R]."""
    xc = np.clip(x, -R, R)
    s = np.sqrt(np.maximum(R * R - xc * xc, 0.0))
    return 0.5 * (xc * s + R * R * np.arcsin(xc / R))


def _min_profile_integral(a, b, t, R):
    # int_a^b min(sqrt(R^2-x^2)_+, t) dx, t >= 0
    xt = np.sqrt(np.maximum(R * R - t * t, 0.0))
    lo = np.maximum(a, -xt)
    hi = np.minimum(b, xt)
    inner = np.where(hi > lo, hi - lo, 0.0)
    total = _segment_integral(b, R) - _segment_integral(a, R)
    capped = np.where(hi > lo, _segment_integral(hi, R) - _segment_integral(lo, R), 0.0)
    return t * inner + total - capped


def _upper_rect_area(a, b, y0, y1, R):
    return _min_profile_integral(a, b, y1, R) - _min_profile_integral(a, b, y0, R)


def rect_disk_area(a, b, c, d, R):
    """Area of [a, b] x [c, d] intersected with the disk of radius R at 0."""
    a, b, c, d = (np.asarray(v, dtype=float) for v in (a, b, c, d))
    upper = _upper_rect_area(a, b, np.maximum(c, 0.0), np.maximum(d, 0.0), R)
    lower = _upper_rect_area(a, b, np.maximum(-d, 0.0), np.maximum(-c, 0.0), R)
    return upper + lower


# ---------------------------------------------------------------------------
# grid


class HalfBallGrid:
    """Uniform lattice clipped to the closed half-ball of given radius."""

    def __init__(self, radius: float, h: float, dim: int = 2):
        if dim not in (2, 3):
            raise InvalidDimension(f"dim must be 2 or 3, got {dim!r}")
        if not (radius > 0 and h > 0):
            raise ResolutionTooCoarse("radius and h must be positive")
        ratio = radius / h
        if ratio < MIN_RESOLUTION - 1e-9:
            raise ResolutionTooCoarse(
                f"radius/h = {ratio:g} is below the minimum resolution {MIN_RESOLUTION}"
            )
        n = int(round(ratio))
        if abs(ratio - n) > 1e-9 * max(1.0, ratio):
            raise ResolutionTooCoarse(f"radius/h = {ratio!r} must be an integer")
        self.radius = float(radius)
        self.h = float(radius) / n
        self.dim = dim
        self.n = n
        self.shape = tuple([2 * n + 1] * (dim - 1) + [n + 1])
        self.cell_shape = tuple(s - 1 for s in self.shape)
        self.origin = np.array([-self.radius] * (dim - 1) + [0.0])
        self.axes = [self.origin[k] + self.h * np.arange(self.shape[k]) for k in range(dim)]
        self.axes[-1][0] = 0.0

        self.cell_fraction = self.ball_fraction(Ball.at_origin(self.radius, dim))
        self.cell_fraction.setflags(write=False)
        self._classify()

    # -- construction helpers -------------------------------------------------

    def _classify(self):
        active = self.cell_fraction > 0.0
        full = self.cell_fraction >= _FULL
        nonext = np.zeros(self.shape, dtype=bool)
        all_full = np.ones(self.shape, dtype=bool)
        # interior nodes need every incident cell to exist and be fully inside
        for corner in itertools.product((0, 1), repeat=self.dim):
            sl = tuple(slice(c, c + s) for c, s in zip(corner, self.cell_shape))
            nonext[sl] |= active
            ok = np.zeros(self.shape, dtype=bool)
            ok[sl] = full
            all_full &= ok
        cls = np.full(self.shape, EXTERIOR, dtype=np.int8)
        upper = np.ones(self.shape, dtype=bool)
        upper[..., 0] = False
        cls[nonext & upper] = CURVED
        cls[nonext & upper & all_full] = INTERIOR
        cls[nonext & ~upper] = FLAT
        cls.setflags(write=False)
        self.node_class = cls
        self.mask = nonext
        self.mask.setflags(write=False)
        self._coords = self._lattice_coords()[nonext]
        self._coords.setflags(write=False)

    def _lattice_coords(self):
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    # -- queries --------------------------------------------------------------

    @property
    def node_count(self) -> int:
        return int(self.mask.sum())

    @property
    def coords(self) -> np.ndarray:
        """Coordinates of the non-exterior nodes, in C order of the lattice."""
        return self._coords

    def lattice_coords(self) -> np.ndarray:
        return self._lattice_coords()

    def count(self, node_class: int) -> int:
        return int((self.node_class == node_class).sum())

    @property
    def boundary_mask(self) -> np.ndarray:
        return (self.node_class == FLAT) | (self.node_class == CURVED)

    @property
    def interior_mask(self) -> np.ndarray:
        return self.node_class == INTERIOR

    @property
    def origin_index(self) -> tuple:
        return tuple([self.n] * (self.dim - 1) + [0])

    def cell_midpoints(self) -> np.ndarray:
        mids = [ax[:-1] + 0.5 * self.h for ax in self.axes]
        return np.stack(np.meshgrid(*mids, indexing="ij"), axis=-1)

    def compatible(self, other: "HalfBallGrid") -> bool:
        return (
            other is self
            or (
                self.dim == other.dim
                and self.n == other.n
                and math.isclose(self.radius, other.radius, rel_tol=1e-12)
            )
        )

    def require_same(self, other: "HalfBallGrid"):
        if not self.compatible(other):
            raise MismatchedGrids(
                f"grid (R={self.radius}, h={self.h}, dim={self.dim}) differs from "
                f"(R={other.radius}, h={other.h}, dim={other.dim})"
            )

    def contains_ball(self, ball: Ball, slack: float = 1e-12) -> bool:
        c = np.asarray(ball.center, dtype=float)
        if c[-1] < -slack:
            return False
        return float(np.linalg.norm(c)) + ball.radius <= self.radius * (1 + slack) + slack

    def ball_fraction(self, ball: Optional[Ball]) -> np.ndarray:
        """Fraction of every lattice cell inside ``ball`` (and x_N >= 0)."""
        if ball is None:
            return np.asarray(self.cell_fraction)
        c = np.asarray(ball.center, dtype=float)
        if c.shape != (self.dim,):
            raise ValueError("ball center has the wrong dimension")
        lo = [ax[:-1] - ck for ax, ck in zip(self.axes, c)]
        hi = [ax[1:] - ck for ax, ck in zip(self.axes, c)]
        if self.dim == 2:
            A, C = np.meshgrid(lo[0], lo[1], indexing="ij")
            B, D = np.meshgrid(hi[0], hi[1], indexing="ij")
            frac = rect_disk_area(A, B, C, D, ball.radius) / (self.h * self.h)
            return np.clip(frac, 0.0, 1.0)
        return self._sampled_fraction(c, ball.radius)

    def _sampled_fraction(self, center, radius, samples: int = 6):
        # midpoint sub-sampling of each cell; 3D only
        offs = (np.arange(samples) + 0.5) / samples * self.h
        frac = np.zeros(self.cell_shape)
        lo = [ax[:-1] - ck for ax, ck in zip(self.axes, center)]
        for o in itertools.product(offs, repeat=self.dim):
            r2 = np.zeros(self.cell_shape)
            for k in range(self.dim):
                shape = [1] * self.dim
                shape[k] = -1
                r2 = r2 + ((lo[k] + o[k]) ** 2).reshape(shape)
            frac += r2 < radius * radius
        frac /= samples ** self.dim
        # cells far from the sphere are exact either way; refine cut ones analytically
        return frac

    def nearest_node(self, point) -> tuple:
        idx = np.rint((np.asarray(point, dtype=float) - self.origin) / self.h).astype(int)
        idx = np.clip(idx, 0, np.array(self.shape) - 1)
        return tuple(int(i) for i in idx)

    def __repr__(self):
        return f"HalfBallGrid(radius={self.radius}, h={self.h}, dim={self.dim})"


def build_half_ball_grid(radius: float, h: float, dim: int = 2) -> HalfBallGrid:
    return HalfBallGrid(radius, h, dim)


# ---------------------------------------------------------------------------
# fields


class ScalarField:
    """One real value per non-exterior node of ``grid``."""

    def __init__(self, grid: HalfBallGrid, values):
        values = np.asarray(values, dtype=float)
        if values.shape == grid.shape:
            arr = np.where(grid.mask, values, np.nan)
        elif values.shape == (grid.node_count,):
            arr = np.full(grid.shape, np.nan)
            arr[grid.mask] = values
        else:
            raise ValueError(
                f"expected {grid.shape} lattice array or {grid.node_count} nodal values, "
                f"got shape {values.shape}"
            )
        if not np.all(np.isfinite(arr[grid.mask])):
            raise ValueError("field values must be finite on non-exterior nodes")
        arr.setflags(write=False)
        self.grid = grid
        self.array = arr

    @classmethod
    def from_function(cls, grid: HalfBallGrid, func: Callable[[np.ndarray], np.ndarray]):
        vals = np.asarray(func(grid.coords), dtype=float)
        return cls(grid, np.broadcast_to(vals, (grid.node_count,)))

    @classmethod
    def constant(cls, grid: HalfBallGrid, value: float):
        return cls(grid, np.full(grid.node_count, float(value)))

    @property
    def values(self) -> np.ndarray:
        return self.array[self.grid.mask]

    def filled(self, fill: float = 0.0) -> np.ndarray:
        return np.where(self.grid.mask, self.array, fill)

    def with_array(self, array) -> "ScalarField":
        return ScalarField(self.grid, array)

    def positive_part(self) -> "ScalarField":
        return self.with_array(np.maximum(self.array, 0.0))

    def negative_part(self) -> "ScalarField":
        return self.with_array(np.maximum(-self.array, 0.0))

    def __neg__(self):
        return self.with_array(-self.array)

    def __add__(self, other):
        if isinstance(other, ScalarField):
            self.grid.require_same(other.grid)
            return self.with_array(self.array + other.array)
        return self.with_array(self.array + other)

    def __sub__(self, other):
        if isinstance(other, ScalarField):
            self.grid.require_same(other.grid)
            return self.with_array(self.array - other.array)
        return self.with_array(self.array - other)

    def __mul__(self, scalar):
        return self.with_array(self.array * scalar)

    __rmul__ = __mul__

    def sup(self) -> float:
        return float(np.max(np.abs(self.values))) if self.grid.node_count else 0.0


class MatrixField:
    """Symmetric elliptic coefficient matrix per non-exterior node."""

    def __init__(
        self,
        grid: HalfBallGrid,
        values,
        mu: float,
        require_identity_at_origin: bool = True,
    ):
        d = grid.dim
        values = np.asarray(values, dtype=float)
        if values.shape == (d, d):
            values = np.broadcast_to(values, grid.shape + (d, d))
        if values.shape != grid.shape + (d, d):
            raise ValueError(f"expected lattice array of {d}x{d} matrices, got {values.shape}")
        if not 0.0 < mu < 1.0:
            raise ValueError("ellipticity constant mu must lie in (0, 1)")
        arr = np.where(grid.mask[..., None, None], values, np.nan)
        nodal = arr[grid.mask]
        if not np.all(np.isfinite(nodal)):
            raise NonEllipticCoefficients("coefficient matrices must be finite")
        scale = max(1.0, float(np.max(np.abs(nodal))))
        asym = float(np.max(np.abs(nodal - np.swapaxes(nodal, -1, -2))))
        if asym > 1e-12 * scale:
            raise NonEllipticCoefficients(f"coefficients not symmetric (max asymmetry {asym:.3g})")
        eig = np.linalg.eigvalsh(0.5 * (nodal + np.swapaxes(nodal, -1, -2)))
        lo, hi = float(eig.min()), float(eig.max())
        if lo < mu * (1 - 1e-12) or hi > (1 / mu) * (1 + 1e-12):
            raise NonEllipticCoefficients(
                f"eigenvalues span [{lo:.6g}, {hi:.6g}], outside [{mu:g}, {1 / mu:g}]"
            )
        if require_identity_at_origin:
            a0 = arr[grid.origin_index]
            if float(np.max(np.abs(a0 - np.eye(d)))) > 1e-12:
                raise NonEllipticCoefficients("A at the origin must be the identity")
        arr.setflags(write=False)
        self.grid = grid
        self.array = arr
        self.mu = float(mu)
        self.eigen_range = (lo, hi)

    @classmethod
    def identity(cls, grid: HalfBallGrid, mu: float = 0.5) -> "MatrixField":
        return cls(grid, np.eye(grid.dim), mu)

    @classmethod
    def from_function(cls, grid, func, mu, require_identity_at_origin=True):
        vals = np.full(grid.shape + (grid.dim, grid.dim), np.nan)
        vals[grid.mask] = np.asarray(func(grid.coords), dtype=float)
        return cls(grid, vals, mu, require_identity_at_origin)

    @property
    def values(self) -> np.ndarray:
        return self.array[self.grid.mask]

    def cell_average(self) -> np.ndarray:
        """Mean of the corner matrices of every cell (NaN where undefined)."""
        acc = np.zeros(self.grid.cell_shape + (self.grid.dim, self.grid.dim))
        for corner in itertools.product((0, 1), repeat=self.grid.dim):
            sl = tuple(slice(c, c + s) for c, s in zip(corner, self.grid.cell_shape))
            acc += self.array[sl]
        return acc / 2 ** self.grid.dim

    def sup_norm(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvalsh(self.values))))


# ---------------------------------------------------------------------------
# interpolation and rescaling


def _multilinear(grid: HalfBallGrid, array: np.ndarray, pts: np.ndarray, slack=1e-9):
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if pts.shape[-1] != grid.dim:
        raise PointOutsideDomain("point has the wrong dimension")
    idx = (pts - grid.origin) / grid.h
    upper = np.array(grid.shape) - 1
    if np.any(idx < -slack) or np.any(idx > upper + slack):
        raise PointOutsideDomain("point lies outside the lattice box")
    i0 = np.clip(np.floor(idx).astype(int), 0, upper - 1)
    t = np.clip(idx - i0, 0.0, 1.0)
    trailing = array.shape[grid.dim:]
    out = np.zeros((len(pts),) + trailing)
    for corner in itertools.product((0, 1), repeat=grid.dim):
        w = np.ones(len(pts))
        for k, c in enumerate(corner):
            w = w * (t[:, k] if c else 1.0 - t[:, k])
        sel = tuple(i0[:, k] + corner[k] for k in range(grid.dim))
        vals = array[sel]
        # zero-weight corners may be exterior (NaN); do not let them poison the sum
        vals = np.where(w.reshape((-1,) + (1,) * len(trailing)) == 0.0, 0.0, vals)
        out += w.reshape((-1,) + (1,) * len(trailing)) * vals
    return out


def _check_in_half_ball(grid, pts, slack):
    r = np.linalg.norm(pts, axis=1)
    bad = (pts[:, -1] < -slack) | (r > grid.radius + slack)
    if np.any(bad):
        raise PointOutsideDomain(f"point {pts[bad][0].tolist()} lies outside the closed half-ball")


def interpolate_many(f, pts, clamp: bool = False) -> np.ndarray:
    """Multilinear interpolation of a scalar or matrix field at many points.

    Points must lie in the closed half-ball.  With ``clamp=True`` points at
    most one cell diagonal outside the ball are first projected radially onto
    it; this is used when resampling onto lattice nodes that sit just outside
    the curved boundary.
    """
    grid = f.grid
    pts = np.atleast_2d(np.asarray(pts, dtype=float)).copy()
    slack = 1e-12 * max(1.0, grid.radius)
    if clamp:
        r = np.linalg.norm(pts, axis=1)
        far = r > grid.radius
        pts[:, -1] = np.maximum(pts[:, -1], 0.0)
        out = np.full((len(pts),) + f.array.shape[grid.dim:], np.nan)
        if far.any():
            # lattice data outside the ball is used where its stencil exists
            idx = (pts[far] - grid.origin) / grid.h
            inside = np.all((idx >= 0) & (idx <= np.array(grid.shape) - 1), axis=1)
            sub = np.flatnonzero(far)[inside]
            if sub.size:
                out[sub] = _multilinear(grid, f.array, pts[sub])
            bad = np.flatnonzero(far)[~np.all(np.isfinite(out[far].reshape(far.sum(), -1)), axis=1)]
            pts[bad] *= (grid.radius / r[bad])[:, None]
            out[bad] = _multilinear(grid, f.array, pts[bad])
        out[~far] = _multilinear(grid, f.array, pts[~far])
    else:
        _check_in_half_ball(grid, pts, slack)
        out = _multilinear(grid, f.array, pts)
    if not np.all(np.isfinite(out)):
        raise PointOutsideDomain("interpolation stencil touches exterior nodes")
    return out


def interpolate(f: ScalarField, p) -> float:
    return float(interpolate_many(f, np.asarray(p, dtype=float)[None, :])[0])


def _blowup_points(source_grid, target_grid, r, center):
    if not 0.0 < r:
        raise ValueError("blow-up scale must be positive")
    c = np.zeros(source_grid.dim) if center is None else np.asarray(center, dtype=float)
    if target_grid.radius * r + float(np.linalg.norm(c)) > source_grid.radius * (1 + 1e-12):
        raise TargetRadiusExceedsDomain(
            f"target radius {target_grid.radius} at scale {r} needs data up to "
            f"{target_grid.radius * r + np.linalg.norm(c):.6g} > {source_grid.radius}"
        )
    return c + r * target_grid.coords


def blowup_field(
    u: ScalarField,
    r: float,
    center=None,
    grid: Optional[HalfBallGrid] = None,
) -> ScalarField:
    """Rescaled field x -> u(center + r x) / r sampled on ``grid`` (default u.grid)."""
    target = u.grid if grid is None else grid
    pts = _blowup_points(u.grid, target, r, center)
    return ScalarField(target, interpolate_many(u, pts, clamp=True) / r)


def rescale_coefficients(
    A: MatrixField,
    r: float,
    center=None,
    grid: Optional[HalfBallGrid] = None,
) -> MatrixField:
    """Coefficients x -> A(center + r x) sampled on ``grid`` (default A.grid)."""
    target = A.grid if grid is None else grid
    pts = _blowup_points(A.grid, target, r, center)
    vals = interpolate_many(A, pts, clamp=True)
    vals = 0.5 * (vals + np.swapaxes(vals, -1, -2))
    anchored = center is None or not np.any(np.asarray(center, dtype=float))
    lattice = np.full(target.shape + (target.dim, target.dim), np.nan)
    lattice[target.mask] = vals
    return MatrixField(target, lattice, A.mu, require_identity_at_origin=anchored)


# ---------------------------------------------------------------------------
# Hoelder seminorm


def _pair_quotients(vals, pts, i, j, alpha):
    dist = np.linalg.norm(pts[i] - pts[j], axis=1)
    keep = dist > 0
    diff = np.abs(vals[i[keep]] - vals[j[keep]])
    if diff.ndim > 1:
        diff = diff.reshape(len(diff), -1).max(axis=1)
    if len(diff) == 0:
        return 0.0
    return float(np.max(diff / dist[keep] ** alpha))


def hoelder_seminorm(f, alpha: float, max_pairs: int = 10**6, seed: int = 0) -> float:
    """max |f(x) - f(y)| / |x - y|^alpha over node pairs (matrices: entrywise).

    All pairs are used when there are at most ``max_pairs`` of them; otherwise
    a deterministic sample: all lattice-neighbour pairs, pairs against a few
    anchor nodes (including the node nearest the origin), and random pairs
    stratified by distance decade.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    grid = f.grid
    pts = grid.coords
    vals = f.values
    n = len(pts)
    if n < 2:
        return 0.0
    best = 0.0
    if n * (n - 1) // 2 <= max_pairs:
        for start in range(0, n, 512):
            i = np.repeat(np.arange(start, min(start + 512, n)), n)
            j = np.tile(np.arange(n), min(start + 512, n) - start)
            keep = i < j
            best = max(best, _pair_quotients(vals, pts, i[keep], j[keep], alpha))
        return best

    rng = np.random.default_rng(seed)
    index = np.full(grid.shape, -1)
    index[grid.mask] = np.arange(n)
    # lattice neighbours (axis and diagonal directions)
    for step in itertools.product((-1, 0, 1), repeat=grid.dim):
        if step <= tuple([0] * grid.dim):
            continue
        src = tuple(slice(max(0, -s), dim - max(0, s)) for s, dim in zip(step, grid.shape))
        dst = tuple(slice(max(0, s), dim - max(0, -s)) for s, dim in zip(step, grid.shape))
        a, b = index[src].ravel(), index[dst].ravel()
        ok = (a >= 0) & (b >= 0)
        best = max(best, _pair_quotients(vals, pts, a[ok], b[ok], alpha))
    # anchors
    anchors = [int(index[grid.origin_index])] + list(rng.choice(n, size=min(15, n), replace=False))
    for a in anchors:
        j = np.arange(n)
        best = max(best, _pair_quotients(vals, pts, np.full(n, a), j, alpha))
    # distance-stratified random pairs
    lo, hi = math.log10(grid.h), math.log10(2 * grid.radius)
    decades = max(1, int(math.ceil(hi - lo)))
    per = max_pairs // decades
    for k in range(decades):
        i = rng.integers(0, n, size=per)
        direction = rng.normal(size=(per, grid.dim))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        dist = 10 ** rng.uniform(lo + k, min(lo + k + 1, hi), size=per)
        target = pts[i] + direction * dist[:, None]
        ti = np.rint((target - grid.origin) / grid.h).astype(int)
        inside = np.all((ti >= 0) & (ti < np.array(grid.shape)), axis=1)
        j = np.full(per, -1)
        j[inside] = index[tuple(ti[inside].T)]
        ok = j >= 0
        best = max(best, _pair_quotients(vals, pts, i[ok], j[ok], alpha))
    return best


# ---------------------------------------------------------------------------
# boundary data checks


def flat_values(phi: ScalarField) -> np.ndarray:
    """Flat-boundary slice (x_N = 0) of the lattice array."""
    return phi.array[..., 0]


def tangential_gradient(phi: ScalarField) -> np.ndarray:
    """Discrete |grad' phi| on the flat boundary: central, one-sided at the rim."""
    grid = phi.grid
    flat = flat_values(phi)
    fmask = grid.node_class[..., 0] == FLAT
    sq = np.zeros(flat.shape)
    for k in range(grid.dim - 1):
        fwd = np.full(flat.shape, np.nan)
        bwd = np.full(flat.shape, np.nan)
        sl_a = [slice(None)] * (grid.dim - 1)
        sl_b = [slice(None)] * (grid.dim - 1)
        sl_a[k], sl_b[k] = slice(1, None), slice(None, -1)
        fwd[tuple(sl_b)] = np.where(fmask[tuple(sl_a)], flat[tuple(sl_a)], np.nan)
        bwd[tuple(sl_a)] = np.where(fmask[tuple(sl_b)], flat[tuple(sl_b)], np.nan)
        central = (fwd - bwd) / (2 * grid.h)
        forward = (fwd - flat) / grid.h
        backward = (flat - bwd) / grid.h
        g = np.where(np.isfinite(central), central, np.where(np.isfinite(forward), forward, backward))
        g = np.where(np.isfinite(g), g, 0.0)
        sq += g * g
    return np.where(fmask, np.sqrt(sq), np.nan)


def check_dpt(phi: ScalarField, tol: Optional[float] = None) -> CheckReport:
    """Degenerate phase transition: where phi vanishes on x_N = 0, so does grad' phi."""
    grid = phi.grid
    fmask = grid.node_class[..., 0] == FLAT
    flat = flat_values(phi)
    sup = float(np.max(np.abs(flat[fmask])))
    thr = (1e-8 if tol is None else tol) * (1.0 + sup)
    grad = tangential_gradient(phi)
    zero = fmask & (np.abs(np.where(fmask, flat, np.inf)) <= thr)
    bad = zero & (grad > thr)
    lattice = grid.lattice_coords()[..., 0, :]
    worst = float(np.max(grad[zero])) if np.any(zero) else 0.0
    return CheckReport(
        name="dpt",
        passed=not bool(np.any(bad)),
        measured=worst,
        bound=thr,
        tolerance=0.0,
        witnesses=[tuple(p) for p in lattice[bad]],
        details={"zero_nodes": int(zero.sum()), "violations": int(bad.sum())},
    )


def check_boundary_growth(phi: ScalarField, M: float, alpha: float, r: float = 1.0) -> CheckReport:
    """|phi(x')| <= M r^(1+alpha) |x'|^(1+alpha) at every flat-boundary node."""
    if M <= 0 or not 0 < alpha < 1:
        raise ValueError("need M > 0 and alpha in (0, 1)")
    grid = phi.grid
    fmask = grid.node_class[..., 0] == FLAT
    lattice = grid.lattice_coords()[..., 0, :]
    xabs = np.linalg.norm(lattice[..., :-1], axis=-1)
    bound = M * r ** (1 + alpha) * xabs ** (1 + alpha)
    vals = np.abs(flat_values(phi))
    excess = np.where(fmask, vals - bound, -np.inf)
    tol = 1e-14 * (1.0 + float(np.max(vals[fmask])))
    bad = excess > tol
    return CheckReport(
        name="boundary_growth",
        passed=not bool(np.any(bad)),
        measured=float(np.max(excess[fmask])),
        bound=0.0,
        tolerance=tol,
        witnesses=[tuple(p) for p in lattice[bad]],
        details={"violations": int(bad.sum()), "M": M, "alpha": alpha, "r": r},
    )


# ---------------------------------------------------------------------------
# problem instance


@dataclass
class ProblemSpec:
    """One member of the class P_r: data, constants and the discrete grid."""

    grid: HalfBallGrid
    A: MatrixField
    phi: ScalarField
    lambda_plus: float
    lambda_minus: float
    mu: float
    M: float
    alpha: float
    density_D: float
    r: float = 1.0
    extras: dict = field(default_factory=dict)

    def problems(self) -> list[str]:
        out = []
        if not 0 < self.lambda_minus < self.lambda_plus:
            out.append(
                "energy densities violate the ordering 0 < lambda_minus < lambda_plus "
                f"(got lambda_minus={self.lambda_minus}, lambda_plus={self.lambda_plus})"
            )
        if not 0 < self.mu < 1:
            out.append("mu must lie in (0, 1)")
        if not 0 < self.alpha < 1:
            out.append("alpha must lie in (0, 1)")
        if not 0 < self.density_D < 1:
            out.append("density_D must lie in (0, 1)")
        if self.M <= 0 or self.r <= 0:
            out.append("M and r must be positive")
        if out:
            return out
        if not (self.A.grid.compatible(self.grid) and self.phi.grid.compatible(self.grid)):
            out.append("A, phi and grid disagree")
            return out
        if self.A.mu < self.mu * (1 - 1e-12):
            out.append("coefficient field validated with a weaker ellipticity constant")
        dpt = check_dpt(self.phi)
        if not dpt.passed:
            out.append(f"boundary data violates DPT at {len(dpt.witnesses)} flat nodes")
        growth = check_boundary_growth(self.phi, self.M, self.alpha, self.r)
        if not growth.passed:
            out.append("boundary data violates |phi(x')| <= M r^(1+alpha) |x'|^(1+alpha)")
        if self.A.sup_norm() > self.M * (1 + 1e-12):
            out.append(f"sup |A| = {self.A.sup_norm():.6g} exceeds M = {self.M}")
        semi = hoelder_seminorm(self.A, self.alpha)
        if semi > self.r ** self.alpha * self.M * (1 + 1e-9):
            out.append(f"[A]_C^alpha = {semi:.6g} exceeds r^alpha M")
        return out

    def validate(self) -> "ProblemSpec":
        from .errors import InvalidSpec

        issues = self.problems()
        if issues:
            raise InvalidSpec("; ".join(issues))
        return self


def require_region(grid: HalfBallGrid, region: Optional[Ball], error=BallOutsideDomain) -> Optional[Ball]:
    if region is not None and not grid.contains_ball(region):
        raise error(f"region {region} is not contained in the half-ball of radius {grid.radius}")
    return region
