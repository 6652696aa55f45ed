"""Executable checks: A-subharmonicity, linear growth, H1 bounds, non-degeneracy.

The discrete pairing int <A grad w, grad psi> is w^T K psi with the same
stiffness matrix as the energy, so every check reads the field through the
operator the minimizer used.
"""

from __future__ import annotations

import math
from typing import Iterable, Optional, Sequence

import numpy as np

from .blowup import BlowupSequence
from .domain import Ball, HalfBallGrid, MatrixField, ScalarField, hoelder_seminorm, interpolate_many
from .elliptic import harmonic_replacement, solve_dirichlet
from .errors import AnalysisRegionTooSmall, ProbeOutsideDomain
from .functional import _lattice_midpoints, dirichlet_energy, discretization
from .reports import CheckReport

SUBHARMONIC_TOL = 1e-6
CIRCLE_POINTS = 256


def bump(grid: HalfBallGrid, center, width: float) -> np.ndarray:
    """Nodal values of (1 - |x - c|^2 / w^2)^3_+."""
    d2 = np.sum((grid.coords - np.asarray(center, dtype=float)) ** 2, axis=1) / width ** 2
    return np.clip(1.0 - d2, 0.0, None) ** 3


def _random_bumps(grid: HalfBallGrid, trials: int, rng: np.random.Generator):
    """Bumps with width >= 6h whose support stays off the boundary."""
    h, R = grid.h, grid.radius
    w_max = max(6 * h, 0.25 * R)
    out = []
    while len(out) < trials:
        w = rng.uniform(6 * h, w_max)
        c = rng.uniform(-R, R, grid.dim)
        c[-1] = rng.uniform(0.0, R)
        if c[-1] >= w + h and np.linalg.norm(c) <= R - w - h:
            out.append((c, w))
    return out


def _parts(u: ScalarField, parts: Iterable[str]):
    v = u.values
    table = {"plus": np.maximum(v, 0.0), "minus": np.maximum(-v, 0.0), "raw": v}
    return [(p, table[p]) for p in parts]


def check_subharmonic(
    u: ScalarField,
    A: MatrixField,
    trials: int = 100,
    seed: int = 0,
    parts: Sequence[str] = ("plus", "minus"),
    tol: float = SUBHARMONIC_TOL,
) -> CheckReport:
    """Weak A-subharmonicity of u+ and u- against random nonnegative bumps.

    Each pairing is normalised by the Cauchy-Schwarz scale
    sqrt(D(w) D(psi)); a trial fails when the normalised value exceeds ``tol``.
    """
    u.grid.require_same(A.grid)
    K = discretization(A).K
    rng = np.random.default_rng(seed)
    bumps = [bump(u.grid, c, w) for c, w in _random_bumps(u.grid, trials, rng)]
    worst, witnesses = -np.inf, []
    per_part = {}
    for name, w in _parts(u, parts):
        Kw = K @ w
        dw = float(w @ Kw)
        vals = []
        for k, psi in enumerate(bumps):
            scale = math.sqrt(max(dw, 0.0) * float(psi @ (K @ psi))) + 1e-300
            val = float(psi @ Kw) / scale
            vals.append(val)
            if val > tol:
                witnesses.append({"part": name, "trial": k, "value": val})
        per_part[name] = max(vals) if vals else 0.0
        worst = max(worst, per_part[name])
    worst = float(worst) if np.isfinite(worst) else 0.0
    return CheckReport(
        name="subharmonic",
        passed=worst <= tol,
        measured=worst,
        bound=0.0,
        tolerance=tol,
        witnesses=witnesses,
        details={"per_part": per_part, "trials": trials},
    )


def cell_gradient_sup(f: ScalarField, region: Optional[Ball] = None) -> float:
    """max over cells meeting ``region`` of the corner-averaged gradient norm."""
    grid = f.grid
    arr = f.array
    dim = grid.dim
    g2 = np.zeros(grid.cell_shape)
    for k in range(dim):
        acc = np.zeros(grid.cell_shape)
        for corner in np.ndindex(*([2] * (dim - 1))):
            lo, hi = [], []
            it = iter(corner)
            for a in range(dim):
                if a == k:
                    lo.append(slice(0, -1))
                    hi.append(slice(1, None))
                else:
                    c = next(it)
                    s = slice(c, c + grid.cell_shape[a])
                    lo.append(s)
                    hi.append(s)
            acc = acc + (arr[tuple(hi)] - arr[tuple(lo)])
        g2 += (acc / (2 ** (dim - 1) * grid.h)) ** 2
    w = grid.cell_fraction if region is None else grid.ball_fraction(region)
    sel = (w > 0) & np.isfinite(g2)
    return float(np.sqrt(g2[sel].max())) if sel.any() else 0.0


def check_linear_growth(
    u: ScalarField,
    A: MatrixField,
    phi: ScalarField,
    mu: float,
    M: float,
    tol: float = 1e-3,
    alpha0: float = 0.5,
) -> CheckReport:
    """|u(x)| <= (sup |grad w| + M) |x| on the inner half-ball B_{R/2}^+.

    w solves the A-Dirichlet problem with data phi^+ (phi^- for u^-); nodes
    with |x| < 4h are skipped.  ``mu`` only enters the report.
    """
    grid = u.grid
    grid.require_same(A.grid)
    inner = Ball(np.zeros(grid.dim), 0.5 * grid.radius)
    r = np.linalg.norm(grid.coords, axis=1)
    sel = (r >= 4 * grid.h) & (r <= inner.radius)
    details, witnesses = {"mu": mu, "M": M}, []
    ok = True
    worst, bound_used = 0.0, 0.0
    for name, part, data in (
        ("plus", np.maximum(u.values, 0.0), phi.positive_part()),
        ("minus", np.maximum(-u.values, 0.0), phi.negative_part()),
    ):
        w = solve_dirichlet(A, grid, data)
        B = cell_gradient_sup(w, inner) + M
        q = part[sel] / r[sel] if sel.any() else np.zeros(0)
        K = float(q.max()) if q.size else 0.0
        details[name] = {"K": K, "B": B}
        if K > B * (1 + tol):
            ok = False
            i = int(np.argmax(q))
            witnesses.append({"part": name, "x": grid.coords[sel][i].tolist(), "quotient": K})
        if bound_used == 0.0 or K / B > worst / bound_used:
            worst, bound_used = K, B
    details["hoelder_quotient"] = hoelder_seminorm(u, alpha0, max_pairs=200_000)
    return CheckReport(
        name="linear_growth",
        passed=ok,
        measured=worst,
        bound=bound_used,
        tolerance=tol * bound_used,
        witnesses=witnesses,
        details=details,
    )


def check_h1_bound(seq: BlowupSequence, R: float = 1.0, lambda_plus: float = 2.0) -> CheckReport:
    """Uniform bound on int_{B_R^+} |grad u_r|^2 along a blow-up sequence.

    The competitor is the harmonic replacement on B_{R'}^+ with
    R' = min(2R, analysis radius): D_j = D(h_j; A^r_j) + lambda_+ |B_{R'}^+|.
    Passes when every value is at most 4 max D_j and max/median <= 2.
    """
    if seq.R < R:
        raise AnalysisRegionTooSmall(f"analysis radius {seq.R} is smaller than {R}")
    grid = seq.grid
    dim = grid.dim
    eye = MatrixField.identity(grid, seq.A.mu)
    ball = Ball(np.zeros(dim), R)
    outer = Ball(np.zeros(dim), min(2 * R, seq.R))
    half = 0.5 * math.pi ** (dim / 2) / math.gamma(dim / 2 + 1) * outer.radius ** dim
    values, comps = [], []
    for u_r, A_r in zip(seq.fields, seq.coefficients):
        values.append(dirichlet_energy(u_r, eye, ball))
        h_r = harmonic_replacement(u_r, A_r, outer)
        comps.append(dirichlet_energy(h_r, A_r, outer) + lambda_plus * half)
    values = np.array(values)
    top = float(values.max()) if values.size else 0.0
    med = float(np.median(values)) if values.size else 0.0
    ratio = top / med if med > 0 else (1.0 if top == 0 else math.inf)
    cap = 4.0 * max(comps) if comps else 0.0
    return CheckReport(
        name="h1_bound",
        passed=bool(top <= cap and ratio <= 2.0),
        measured=ratio,
        bound=2.0,
        details={"seminorms": values.tolist(), "competitors": comps, "cap": cap, "R": R},
    )


def sphere_points(dim: int, count: int = CIRCLE_POINTS) -> np.ndarray:
    """Equal-angle circle points (2D) or a Fibonacci sphere (3D)."""
    if dim == 2:
        t = 2 * np.pi * (np.arange(count) + 0.5) / count
        return np.column_stack([np.cos(t), np.sin(t)])
    k = np.arange(count) + 0.5
    z = 1 - 2 * k / count
    phi = np.pi * (1 + 5 ** 0.5) * k
    s = np.sqrt(1 - z * z)
    return np.column_stack([s * np.cos(phi), s * np.sin(phi), z])


def _check_probe(grid: HalfBallGrid, x0: np.ndarray, r: float):
    if x0[-1] < r * (1 - 1e-12) or np.linalg.norm(x0) + r > grid.radius * (1 + 1e-12):
        raise ProbeOutsideDomain(f"probe ball B_{r}({x0.tolist()}) leaves the upper half-ball")


def scaled_sphere_average(u: ScalarField, x0, r: float) -> float:
    """(1/r) times the mean of u^+ over the sphere of radius r about x0."""
    x0 = np.asarray(x0, dtype=float)
    _check_probe(u.grid, x0, r)
    pts = x0 + r * sphere_points(u.grid.dim)
    vals = interpolate_many(u, pts, clamp=True)
    return float(np.maximum(vals, 0.0).mean() / r)


def positive_fraction(u: ScalarField, ball: Ball) -> float:
    """Area-weighted fraction of cells in ``ball`` with positive midpoint."""
    w = u.grid.ball_fraction(ball)
    pos = np.nan_to_num(_lattice_midpoints(u), nan=-1.0) > 0
    total = w.sum()
    return float(w[pos].sum() / total) if total > 0 else 0.0


def random_probes(grid: HalfBallGrid, count: int, seed: int = 0, r_min=None, r_max=None):
    """Probe balls B_r(x0) inside the upper half-ball, r in [r_min, r_max]."""
    rng = np.random.default_rng(seed)
    r_max = 0.25 * grid.radius if r_max is None else r_max
    # coarse grids shrink the lower radius so the range stays non-empty
    r_min = min(8 * grid.h, 0.5 * r_max) if r_min is None else r_min
    out = []
    while len(out) < count:
        r = rng.uniform(r_min, r_max)
        x0 = rng.uniform(-grid.radius, grid.radius, grid.dim)
        x0[-1] = rng.uniform(r, grid.radius)
        if np.linalg.norm(x0) + r <= grid.radius:
            out.append((x0, float(r)))
    return out


def check_nondegeneracy(
    u: ScalarField,
    probes: Sequence,
    kappa: float = 0.5,
    c: float = 0.1,
) -> CheckReport:
    """Scaled sphere average below c must force u^+ = 0 on B_{kappa r}(x0)."""
    if not 0 < kappa < 1:
        raise ValueError("kappa must lie in (0, 1)")
    witnesses, premises = [], 0
    for x0, r in probes:
        x0 = np.asarray(x0, dtype=float)
        avg = scaled_sphere_average(u, x0, r)
        if avg < c:
            premises += 1
            frac = positive_fraction(u, Ball(x0, kappa * r))
            if frac > 0:
                witnesses.append({"x0": x0.tolist(), "r": r, "average": avg, "positive_fraction": frac})
    return CheckReport(
        name="nondegeneracy",
        passed=not witnesses,
        measured=float(len(witnesses)),
        bound=0.0,
        witnesses=witnesses,
        details={"c": c, "kappa": kappa, "premises": premises, "probes": len(probes)},
    )


def calibrate_nondegeneracy(fields: Sequence[ScalarField], probes_per_field: int = 200,
                            kappa: float = 0.5, seed: int = 0) -> float:
    """Half the smallest scaled average over probes whose B_{kappa r} meets {u > 0}."""
    smallest = math.inf
    for k, u in enumerate(fields):
        for x0, r in random_probes(u.grid, probes_per_field, seed + k):
            if positive_fraction(u, Ball(x0, kappa * r)) > 0:
                smallest = min(smallest, scaled_sphere_average(u, x0, r))
    return 0.5 * smallest if np.isfinite(smallest) else 0.0
