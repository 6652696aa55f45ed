"""Independent reference computations used to derive frozen test values.

Nothing here imports the package: each oracle is a direct enumeration or
quadrature so the frozen numbers do not share code with the implementation.
"""

import math

import numpy as np
from scipy import integrate


def lattice_half_disk_counts(radius, h):
    """(all lattice points in the closed half-disk, of which on x_2 = 0)."""
    n = int(round(radius / h))
    i = np.arange(-n, n + 1)
    j = np.arange(0, n + 1)
    X, Y = np.meshgrid(i * h, j * h, indexing="ij")
    inside = X * X + Y * Y <= radius * radius * (1 + 1e-12)
    return int(inside.sum()), int(inside[:, 0].sum())


def strip_area_in_half_disk(a, b, R=1.0):
    """Area of {a < y < b} inside the unit half-disk."""
    val, _ = integrate.quad(lambda y: 2.0 * math.sqrt(max(R * R - y * y, 0.0)), a, b, epsabs=1e-13)
    return val


def rect_disk_area_quad(a, b, c, d, R=1.0):
    """Area of [a,b]x[c,d] inside the disk of radius R, by 1D quadrature."""
    def chord(x):
        if abs(x) >= R:
            return 0.0
        s = math.sqrt(R * R - x * x)
        return max(0.0, min(d, s) - max(c, -s))

    pts = [p for p in (-R, R) if a < p < b]
    val, _ = integrate.quad(chord, a, b, points=pts or None, epsabs=1e-13, limit=200)
    return val


def parabola_sigma(rho, samples=200_001):
    """max x_2/|x| over sampled points of x_2 = x_1^2 inside B_rho minus 0."""
    t = np.linspace(-rho, rho, samples)
    p = np.column_stack([t, t * t])
    r = np.linalg.norm(p, axis=1)
    keep = (r <= rho) & (r > 0)
    return float(np.max(p[keep, 1] / r[keep]))


def parabola_sigma_closed(rho):
    """Exact value: the extreme point has t^2 = (sqrt(1 + 4 rho^2) - 1) / 2."""
    t2 = (math.sqrt(1 + 4 * rho * rho) - 1) / 2
    return t2 / rho


def oracle_1d_scan(a, b, lp, lm, samples=2_000_001):
    """Dense scan of the breakpoint energy, then the linear competitor."""
    s = np.linspace(1e-7, 1 - 1e-7, samples)
    f = a * a / s + b * b / (1 - s) + lm * s + lp * (1 - s)
    k = int(np.argmin(f))
    s0 = -a / (b - a)
    lin = (b - a) ** 2 + lm * s0 + lp * (1 - s0)
    return (float(s[k]), float(f[k])) if f[k] <= lin else (s0, lin)


def profile_fit_scan(values, xn, c_hi, samples=200_001):
    """Brute-force min over c of max |values - c xn|."""
    cs = np.linspace(0.0, c_hi, samples)
    best = (math.inf, 0.0)
    for chunk in np.array_split(cs, 200):
        d = np.max(np.abs(values[None, :] - chunk[:, None] * xn[None, :]), axis=1)
        k = int(np.argmin(d))
        if d[k] < best[0]:
            best = (float(d[k]), float(chunk[k]))
    return best[1], best[0]
