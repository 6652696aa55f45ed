"""Named coefficient and boundary-data families.

Every preset is sampled from an analytic formula, so the data conditions
(ellipticity, A(0) = Id, Hoelder bounds, DPT, flat-boundary growth) hold by
construction and can be checked discretely.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .domain import HalfBallGrid, MatrixField, ProblemSpec, ScalarField
from .errors import ConfigInvalid
from .oracle1d import solve_1d_exact

COEFFICIENT_PRESETS = ("identity", "hoelder_bump")
BOUNDARY_PRESETS = ("zero", "slab", "sign_change")
SIGN_CHANGE_DEFAULTS = {"b_plus": 2.0, "b_minus": 0.3, "split": 0.6}


def bump_direction(dim: int) -> np.ndarray:
    """Trace-free diagonal direction S used by the Hoelder-bump family."""
    s = np.zeros((dim, dim))
    s[0, 0], s[1, 1] = 1.0, -1.0
    return s


def hoelder_bump_matrix(x: np.ndarray, m: float, alpha: float, S: Optional[np.ndarray] = None):
    """A(x) = Id + m |x|^alpha S, evaluated at the rows of ``x``."""
    x = np.atleast_2d(x)
    dim = x.shape[1]
    S = bump_direction(dim) if S is None else np.asarray(S, dtype=float)
    r = np.linalg.norm(x, axis=1) ** alpha
    return np.eye(dim)[None] + m * r[:, None, None] * S[None]


def make_coefficients(
    grid: HalfBallGrid,
    preset: str = "identity",
    m: float = 0.0,
    alpha: float = 0.5,
    mu: float = 0.5,
) -> MatrixField:
    if preset == "identity":
        return MatrixField(grid, np.eye(grid.dim), mu)
    if preset == "hoelder_bump":
        top = m * grid.radius ** alpha
        if top >= 1.0 - mu or top > 1.0 / mu - 1.0:
            raise ConfigInvalid(
                f"hoelder_bump with m={m}, alpha={alpha} leaves the eigenvalue window [{mu}, {1 / mu}]"
            )
        return MatrixField.from_function(grid, lambda x: hoelder_bump_matrix(x, m, alpha), mu)
    raise ConfigInvalid(f"unknown coefficient preset {preset!r}; expected one of {COEFFICIENT_PRESETS}")


def slab_profile(b: float, lambda_plus: float, lambda_minus: float, height: float):
    """1D minimiser on [0, height] with values 0 and b, as a function of t."""
    sol = solve_1d_exact(0.0, b / height, lambda_plus, lambda_minus)
    s = sol.s * height
    slope = sol.slope_plus

    def profile(t):
        return slope * np.maximum(np.asarray(t, dtype=float) - s, 0.0)

    return profile, s


def sign_change_trace(theta, b_plus, b_minus, split):
    """Curved-boundary trace: a positive bump on the arc 0 < theta < split*pi
    (which covers the top when split > 1/2) and a negative bump on the rest,
    next to the left end of the flat boundary."""
    ts = split * math.pi
    theta = np.asarray(theta, dtype=float)
    pos = b_plus * np.sin(np.pi * np.clip(theta / ts, 0.0, 1.0))
    neg = -b_minus * np.sin(np.pi * np.clip((theta - ts) / (math.pi - ts), 0.0, 1.0))
    return np.where(theta <= ts, pos, neg)


def make_boundary(
    grid: HalfBallGrid,
    preset: str,
    params: Optional[dict] = None,
    lambda_plus: float = 2.0,
    lambda_minus: float = 1.0,
) -> ScalarField:
    """Boundary data phi sampled on all nodes (only boundary nodes matter)."""
    params = dict(params or {})
    if preset == "zero":
        _reject_extra(params, set())
        return ScalarField.constant(grid, 0.0)
    if preset == "slab":
        _reject_extra(params, {"b"})
        b = float(params.get("b", 0.5))
        if b <= 0:
            raise ConfigInvalid("slab preset needs b > 0")
        profile, _ = slab_profile(b, lambda_plus, lambda_minus, grid.radius)
        return ScalarField.from_function(grid, lambda x: profile(x[:, -1]))
    if preset == "sign_change":
        _reject_extra(params, {"b_plus", "b_minus", "split"})
        b_plus = float(params.get("b_plus", SIGN_CHANGE_DEFAULTS["b_plus"]))
        b_minus = float(params.get("b_minus", SIGN_CHANGE_DEFAULTS["b_minus"]))
        split = float(params.get("split", SIGN_CHANGE_DEFAULTS["split"]))
        if grid.dim != 2:
            raise ConfigInvalid("sign_change preset is defined for dim = 2")
        if not (b_plus > 0 and b_minus >= 0 and 0 < split < 1):
            raise ConfigInvalid("sign_change needs b_plus > 0, b_minus >= 0, 0 < split < 1")

        def phi(x):
            r = np.linalg.norm(x, axis=1)
            theta = np.arctan2(x[:, 1], x[:, 0])
            return sign_change_trace(theta, b_plus, b_minus, split) * np.minimum(r / grid.radius, 1.0)

        return ScalarField.from_function(grid, phi)
    raise ConfigInvalid(f"unknown boundary preset {preset!r}; expected one of {BOUNDARY_PRESETS}")


def _reject_extra(params: dict, allowed: set):
    extra = set(params) - allowed
    if extra:
        raise ConfigInvalid(f"unknown boundary parameters {sorted(extra)}")


def build_spec(
    radius: float = 1.0,
    h: float = 1 / 64,
    dim: int = 2,
    coefficients: str = "identity",
    m: float = 0.0,
    alpha: float = 0.5,
    mu: float = 0.5,
    boundary: str = "zero",
    params: Optional[dict] = None,
    lambda_plus: float = 2.0,
    lambda_minus: float = 1.0,
    M: float = 2.0,
    density_D: float = 0.1,
    grid: Optional[HalfBallGrid] = None,
) -> ProblemSpec:
    grid = grid or HalfBallGrid(radius, h, dim)
    A = make_coefficients(grid, coefficients, m, alpha, mu)
    phi = make_boundary(grid, boundary, params, lambda_plus, lambda_minus)
    return ProblemSpec(
        grid=grid,
        A=A,
        phi=phi,
        lambda_plus=lambda_plus,
        lambda_minus=lambda_minus,
        mu=mu,
        M=M,
        alpha=alpha,
        density_D=density_D,
    )
