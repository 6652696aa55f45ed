"""One-dimensional two-phase problem on [0, 1]: closed form and discrete twin.

With v(0) = a <= 0 and v(1) = b > 0 the minimiser is piecewise linear with a
single breakpoint s, so the energy reduces to

    f(s) = a^2/s + b^2/(1-s) + lambda_minus s + lambda_plus (1-s).

A zero plateau between the phases never helps: it only lengthens the
negative ramp at no saving.  The endpoint s = -a/(b-a) reproduces the plain
linear profile, which is the minimiser when f has no interior critical point
below it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq, minimize_scalar

from .errors import InvalidLambdaOrdering, Stagnation
from .minimizer import Schedule, VolumeProblem, run_continuation


@dataclass(frozen=True)
class Oracle1DSolution:
    s: float
    slope_minus: float
    slope_plus: float
    energy: float
    boundary_attained: bool
    residual: float = 0.0

    def to_dict(self):
        return {
            "boundary_attained": self.boundary_attained,
            "energy": self.energy,
            "residual": self.residual,
            "s": self.s,
            "slope_minus": self.slope_minus,
            "slope_plus": self.slope_plus,
        }


def _check(a, b, lp, lm):
    if not 0 < lm < lp:
        raise InvalidLambdaOrdering(
            f"need 0 < lambda_minus < lambda_plus, got lambda_minus={lm}, lambda_plus={lp}"
        )
    if not (b > 0 and a <= 0):
        raise ValueError("need a <= 0 < b")


def breakpoint_energy(s, a, b, lp, lm):
    return a * a / s + b * b / (1.0 - s) + lm * s + lp * (1.0 - s)


def _stationarity(s, a, b, dl):
    return b * b / (1.0 - s) ** 2 - a * a / (s * s) - dl


def _polish_root(s, a, b, dl, lo, hi):
    """Refine the golden-section point to the root of f' (f' increases in s)."""
    g = lambda t: _stationarity(t, a, b, dl)
    if g(lo) < 0 < g(hi):
        return float(brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200))
    return s


def solve_1d_exact(a: float, b: float, lambda_plus: float, lambda_minus: float) -> Oracle1DSolution:
    """Energy-minimising breakpoint by a scan-guarded golden-section search."""
    _check(a, b, lambda_plus, lambda_minus)
    dl = lambda_plus - lambda_minus
    f = lambda s: breakpoint_energy(s, a, b, lambda_plus, lambda_minus)
    lo, hi = 1e-6, 1.0 - 1e-6
    grid = np.linspace(lo, hi, 1001)
    vals = f(grid)
    k = int(np.argmin(vals))

    s0 = 0.0 - a / (b - a)
    linear = (b - a) ** 2 + lambda_minus * s0 + lambda_plus * (1.0 - s0)
    if 0 < k < len(grid) - 1:
        res = minimize_scalar(f, bracket=(grid[k - 1], grid[k], grid[k + 1]), method="golden",
                              options={"xtol": 1e-12})
        s = _polish_root(float(res.x), a, b, dl, lo, hi)
        e = float(f(s))
        if e <= linear:
            pm = 0.0 - a / s
            pp = b / (1.0 - s)
            resid = abs(pp * pp - pm * pm - dl)
            return Oracle1DSolution(s, pm, pp, e, False, resid)
    # no interior critical point beats the linear profile
    slope = b - a
    return Oracle1DSolution(s0, slope, slope, float(linear), True, 0.0)


@dataclass
class DiscreteProfile:
    x: np.ndarray
    v: np.ndarray
    energy: float
    breakpoint: float
    slope_plus: float
    trace: list


def _problem_1d(a, b, lp, lm, n):
    h = 1.0 / (n - 1)
    main = np.full(n, 2.0 / h)
    main[0] = main[-1] = 1.0 / h
    K = sp.diags([main, np.full(n - 1, -1.0 / h), np.full(n - 1, -1.0 / h)], [0, 1, -1], format="csr")
    corners = np.column_stack([np.arange(n - 1), np.arange(1, n)])
    free = np.ones(n, dtype=bool)
    free[[0, -1]] = False
    colors = [np.arange(1, n - 1, 2), np.arange(2, n - 1, 2)]
    return VolumeProblem(K, corners, np.full(n - 1, h), lp, lm, free, colors=colors, lattice=np.arange(n)), h


def _sign_change(x, v):
    """Last crossing from <= 0 to > 0, by linear interpolation."""
    pos = v > 0
    idx = np.flatnonzero(~pos[:-1] & pos[1:])
    if idx.size == 0:
        return 0.0 if pos[0] else 1.0
    i = int(idx[-1])
    t = v[i] / (v[i] - v[i + 1])
    return float(x[i] + t * (x[i + 1] - x[i]))


def minimize_1d_discrete(
    a: float,
    b: float,
    lambda_plus: float,
    lambda_minus: float,
    n: int,
    schedule: Optional[Schedule] = None,
) -> DiscreteProfile:
    """Same continuation as the half-ball minimizer on a uniform 1D grid."""
    _check(a, b, lambda_plus, lambda_minus)
    if n < 64:
        raise ValueError("need at least 64 nodes")
    schedule = schedule or Schedule()
    problem, h = _problem_1d(a, b, lambda_plus, lambda_minus, n)
    x = np.linspace(0.0, 1.0, n)
    v0 = a + (b - a) * x
    eps0 = schedule.eps0 if schedule.eps0 is not None else 0.1 * (1.0 + max(abs(a), abs(b)))
    eps_min = schedule.eps_min if schedule.eps_min is not None else h * math.sqrt(lambda_plus - lambda_minus)
    v, trace = run_continuation(problem, v0, eps0, eps_min, schedule)
    if not np.all(np.isfinite(v)):
        raise Stagnation("1D continuation produced non-finite values")
    s = _sign_change(x, v)
    top = x >= s + 0.5 * (1.0 - s)
    slope = float(np.polyfit(x[top], v[top], 1)[0]) if top.sum() >= 2 else float("nan")
    return DiscreteProfile(x, v, problem.exact(v), s, slope, trace)
