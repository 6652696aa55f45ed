import numpy as np
import pytest

from bernoulli_lab.blowup import (
    fit_halfplane_profile,
    generate_sequence,
    scaling_identity_check,
    uniform_distance,
)
from bernoulli_lab.domain import Ball, HalfBallGrid, MatrixField, ScalarField
from bernoulli_lab.errors import MismatchedGrids, RadiusOverflow
from bernoulli_lab.presets import hoelder_bump_matrix, make_coefficients

from oracles import profile_fit_scan

RADII = [2.0 ** -j for j in range(1, 6)]


def test_homogeneous_profile_is_fixed(grid64, eye64):
    u = ScalarField.from_function(grid64, lambda x: 2 * np.maximum(x[:, 1], 0))
    seq = generate_sequence(u, eye64, RADII, R=1.0)
    assert max(seq.distances) <= 1e-12
    for f in seq.fits:
        assert f.c == pytest.approx(2.0, abs=1e-10) and f.residual <= 1e-10


def test_analytic_remainder_bound(grid64, eye64):
    u = ScalarField.from_function(grid64, lambda x: x[:, 1] + x[:, 1] * np.linalg.norm(x, axis=1))
    R = 1.0
    seq = generate_sequence(u, eye64, RADII, R=R)
    xn = ScalarField.from_function(seq.grid, lambda x: x[:, 1])
    for r, f in zip(seq.radii, seq.fields):
        # base-grid bilinear error of x_N |x| (second derivatives <= 3), magnified by 1/r
        interp = 3 * grid64.h ** 2 / 8 / r
        assert uniform_distance(f, xn, Ball((0.0, 0.0), R)) <= r * R * R + interp
    # successive distances of a converging analytic family decay
    assert all(b <= a + 1e-12 for a, b in zip(seq.distances, seq.distances[1:]))


def test_flat_data_vanishes_under_blowup(grid64, eye64):
    u = ScalarField.from_function(grid64, lambda x: x[:, 1] + x[:, 0] ** 2)
    seq = generate_sequence(u, eye64, RADII, R=1.0)
    assert all(b < a for a, b in zip(seq.flat_sup, seq.flat_sup[1:]))
    assert seq.flat_sup[-1] <= RADII[-1] + 1e-12


def test_radius_overflow(grid32, eye32):
    u = ScalarField.constant(grid32, 0.0)
    with pytest.raises(RadiusOverflow):
        generate_sequence(u, eye32, [0.5, 0.25], R=3.0)


def test_radii_validated(grid32, eye32):
    u = ScalarField.constant(grid32, 0.0)
    with pytest.raises(ValueError):
        generate_sequence(u, eye32, [0.25, 0.5])
    with pytest.raises(ValueError):
        generate_sequence(u, eye32, [1.5, 0.5])


def test_fields_share_analysis_grid(grid32, eye32):
    u = ScalarField.from_function(grid32, lambda x: x[:, 0] * x[:, 1])
    seq = generate_sequence(u, eye32, RADII[:3], R=0.5)
    assert all(f.grid is seq.grid for f in seq.fields)
    assert all(a.grid is seq.grid for a in seq.coefficients)
    assert seq.grid.radius == 0.5


def test_sequence_to_dict(grid32, eye32):
    u = ScalarField.from_function(grid32, lambda x: x[:, 1])
    d = generate_sequence(u, eye32, RADII[:2]).to_dict()
    assert set(d) == {"center", "distances", "fits", "flat_sup", "h1", "R", "radii"}


# -- uniform distance ---------------------------------------------------------


def test_uniform_distance_examples(grid32):
    f = ScalarField.from_function(grid32, lambda x: x[:, 1])
    assert uniform_distance(f, f) == 0.0
    assert uniform_distance(f, f + 0.1) == pytest.approx(0.1, abs=1e-15)


def test_uniform_distance_brute_force(grid32):
    rng = np.random.default_rng(5)
    f = ScalarField(grid32, rng.uniform(-1, 1, grid32.shape))
    g = ScalarField(grid32, rng.uniform(-1, 1, grid32.shape))
    want = max(abs(a - b) for a, b in zip(f.values, g.values))
    assert uniform_distance(f, g) == want
    region = Ball((0.2, 0.0), 0.3)
    inside = np.linalg.norm(grid32.coords - region.center, axis=1) <= 0.3
    assert uniform_distance(f, g, region) == np.max(np.abs(f.values - g.values)[inside])


def test_uniform_distance_mismatch(grid32, grid16):
    with pytest.raises(MismatchedGrids):
        uniform_distance(ScalarField.constant(grid32, 0.0), ScalarField.constant(grid16, 0.0))


# -- profile fit --------------------------------------------------------------


def test_fit_exact_profile(grid32):
    fit = fit_halfplane_profile(ScalarField.from_function(grid32, lambda x: 2 * x[:, 1]))
    assert fit.c == pytest.approx(2.0, abs=1e-10) and fit.residual <= 1e-10
    assert not fit.degenerate


def test_fit_zero_is_degenerate(grid32):
    fit = fit_halfplane_profile(ScalarField.constant(grid32, 0.0))
    assert fit.c == 0.0 and fit.degenerate


def test_fit_perturbed_against_scan(grid64):
    u = ScalarField.from_function(grid64, lambda x: x[:, 1] + 0.01 * np.sin(x[:, 0]))
    c, res = fit_halfplane_profile(u)
    assert c == pytest.approx(1.0, abs=0.02) and res <= 0.011
    c_scan, res_scan = profile_fit_scan(u.values, grid64.coords[:, 1], 2 * np.max(np.abs(u.values)))
    assert res <= res_scan + 1e-9
    assert c == pytest.approx(c_scan, abs=1e-4)


def test_fit_region(grid64):
    u = ScalarField.from_function(grid64, lambda x: np.where(x[:, 0] < 0.5, 3 * x[:, 1], 0.0))
    fit = fit_halfplane_profile(u, Ball((0.0, 0.0), 0.4))
    assert fit.c == pytest.approx(3.0, abs=1e-9) and fit.residual <= 1e-9


# -- scaling identity ---------------------------------------------------------


def test_scaling_identity_linear(grid32, eye32):
    u = ScalarField.from_function(grid32, lambda x: x[:, 1])
    rep = scaling_identity_check(u, eye32, 2.0, 1.0, 0.5)
    assert rep.passed and rep.measured <= 1e-10


def test_scaling_identity_bilinear(grid64, eye64):
    u = ScalarField.from_function(grid64, lambda x: x[:, 0] * x[:, 1])
    rep = scaling_identity_check(u, eye64, 2.0, 1.0, 0.25)
    assert rep.passed


def test_scaling_identity_hoelder(grid64):
    A = make_coefficients(grid64, "hoelder_bump", m=0.4, alpha=0.5)
    u = ScalarField.from_function(grid64, lambda x: x[:, 0] - 0.2 * x[:, 1])
    assert scaling_identity_check(u, A, 2.0, 1.0, 0.5).passed


def test_scaling_identity_detects_missing_rescale():
    grid = HalfBallGrid(1.0, 1 / 128)
    A = make_coefficients(grid, "hoelder_bump", m=0.4, alpha=0.5)
    u = ScalarField.from_function(grid, lambda x: 5 * x[:, 0])
    r = 0.25
    assert scaling_identity_check(u, A, 2.0, 1.0, r).passed
    big = HalfBallGrid(2.0, grid.h / r)
    wrong = MatrixField.from_function(big, lambda x: hoelder_bump_matrix(x, 0.4, 0.5), 0.4)
    rep = scaling_identity_check(u, A, 2.0, 1.0, r, target_A=wrong)
    assert not rep.passed


def test_scaling_identity_scale_range(grid32, eye32):
    u = ScalarField.constant(grid32, 0.0)
    with pytest.raises(ValueError):
        scaling_identity_check(u, eye32, 2.0, 1.0, 1.0)
    with pytest.raises(RadiusOverflow):
        scaling_identity_check(u, eye32, 2.0, 1.0, 0.75)
