import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bernoulli_lab.domain import Ball, HalfBallGrid, MatrixField, ScalarField
from bernoulli_lab.elliptic import (
    check_maximum_principle,
    harmonic_replacement,
    solve_dirichlet,
    weak_residual,
)
from bernoulli_lab.errors import BallOutsideDomain
from bernoulli_lab.functional import dirichlet_energy
from bernoulli_lab.presets import hoelder_bump_matrix


def test_affine_reproduced(grid32, eye32):
    g = ScalarField.from_function(grid32, lambda x: x[:, -1])
    u = solve_dirichlet(eye32, grid32, g)
    assert np.max(np.abs(u.values - g.values)) <= 1e-10


def test_constant_anisotropic_reproduces_linear(grid32):
    A = MatrixField(grid32, np.diag([2.0, 1.0]), 0.5, require_identity_at_origin=False)
    g = ScalarField.from_function(grid32, lambda x: x[:, 0])
    u = solve_dirichlet(A, grid32, g)
    assert np.max(np.abs(u.values - g.values)) <= 1e-10


def test_harmonic_quadratic_exact(grid32, eye32):
    # the bilinear stencil is exact on harmonic quadratics
    f = lambda x: x[:, 0] ** 2 - x[:, 1] ** 2
    u = solve_dirichlet(eye32, grid32, ScalarField.from_function(grid32, f))
    assert np.max(np.abs(u.values - f(grid32.coords))) <= 1e-10


def test_manufactured_solution_second_order():
    errs = []
    for n in (16, 32, 64):
        grid = HalfBallGrid(1.0, 1 / n)
        f = lambda x: np.exp(x[:, 0]) * np.cos(x[:, 1])
        u = solve_dirichlet(MatrixField.identity(grid), grid, ScalarField.from_function(grid, f))
        errs.append(np.max(np.abs(u.values - f(grid.coords))))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.7)
    assert errs[-1] <= 2 * (1 / 64) ** 2


def test_weak_residual_and_boundary(grid32):
    A = MatrixField.from_function(grid32, lambda x: hoelder_bump_matrix(x, 0.3, 0.5), 0.5)
    g = ScalarField.from_function(grid32, lambda x: np.cos(3 * x[:, 0]) + x[:, 1])
    u = solve_dirichlet(A, grid32, g)
    assert weak_residual(u, A) <= 1e-10 * (1 + g.sup())
    b = grid32.boundary_mask[grid32.mask]
    assert np.array_equal(u.values[b], g.values[b])
    assert check_maximum_principle(u, g).passed


@given(c=st.floats(-2, 2), k=st.floats(0.5, 5), shift=st.floats(0, 1))
def test_comparison_principle(grid16, c, k, shift):
    A = MatrixField.identity(grid16)
    g1 = ScalarField.from_function(grid16, lambda x: c * np.sin(k * x[:, 0]) + x[:, 1])
    g2 = g1 + shift
    u1, u2 = solve_dirichlet(A, grid16, g1), solve_dirichlet(A, grid16, g2)
    assert np.all(u1.values <= u2.values + 1e-10 * (1 + g2.sup()))


def test_replacement_idempotent_on_harmonic(grid32, eye32):
    u = ScalarField.from_function(grid32, lambda x: x[:, 0] * x[:, 1])
    h = harmonic_replacement(u, eye32, Ball((0.0, 0.3), 0.25))
    # discrete harmonicity of x1 x2 holds for the bilinear stencil
    assert np.max(np.abs(h.values - u.values)) <= 1e-10


def test_replacement_lowers_energy(grid32, eye32):
    u = ScalarField.from_function(grid32, lambda x: np.sum(x * x, axis=1))
    region = Ball((0.0, 0.0), 0.5)
    h = harmonic_replacement(u, eye32, region)
    assert dirichlet_energy(h, eye32, region) < dirichlet_energy(u, eye32, region) - 1e-3
    outside = np.linalg.norm(grid32.coords, axis=1) > 0.5 + 1e-9
    assert np.array_equal(h.values[outside], u.values[outside])


@given(cx=st.floats(-0.4, 0.4), rad=st.floats(0.1, 0.5), k=st.floats(1, 8))
def test_replacement_energy_monotone(grid16, cx, rad, k):
    A = MatrixField.identity(grid16)
    u = ScalarField.from_function(grid16, lambda x: np.sin(k * x[:, 0]) * x[:, 1] + x[:, 0] ** 2)
    region = Ball((cx, 0.0), min(rad, 1 - abs(cx)))
    h = harmonic_replacement(u, A, region)
    scale = 1 + dirichlet_energy(u, A, region)
    assert dirichlet_energy(h, A, region) <= dirichlet_energy(u, A, region) + 1e-12 * scale


def test_replacement_empty_region(grid32, eye32):
    u = ScalarField.from_function(grid32, lambda x: np.sum(x * x, axis=1))
    h = harmonic_replacement(u, eye32, Ball((0.0, 0.5), 0.01))
    assert np.array_equal(h.values, u.values)


def test_replacement_region_outside(grid32, eye32):
    u = ScalarField.constant(grid32, 0.0)
    with pytest.raises(BallOutsideDomain):
        harmonic_replacement(u, eye32, Ball((0.8, 0.0), 0.5))
