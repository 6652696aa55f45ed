import math

import numpy as np
import pytest

from bernoulli_lab.domain import ScalarField
from bernoulli_lab.elliptic import solve_dirichlet
from bernoulli_lab.errors import InvalidSpec, NonpositiveEpsilon
from bernoulli_lab.freeboundary import extract_free_boundary
from bernoulli_lab.functional import energy
from bernoulli_lab.minimizer import Schedule, minimize, perturbation_audit
from bernoulli_lab.oracle1d import solve_1d_exact
from bernoulli_lab.presets import build_spec

HALF_DISK = math.pi / 2


@pytest.fixture(scope="module")
def slab64():
    spec = build_spec(h=1 / 64, boundary="slab", params={"b": 0.5})
    return spec, minimize(spec)


@pytest.fixture(scope="module")
def sign32():
    spec = build_spec(h=1 / 32, boundary="sign_change")
    return spec, minimize(spec)


def test_zero_data_gives_zero(grid32):
    spec = build_spec(grid=grid32, coefficients="hoelder_bump", m=0.3, boundary="zero")
    res = minimize(spec)
    assert np.all(res.u.values == 0.0)
    # the nodal half-disk is polygonal; exact value up to cell-count error
    assert res.energy.total == pytest.approx(1.0 * HALF_DISK, abs=3 * grid32.h)
    assert res.audit.passed


def test_doubling_lambdas_doubles_energy(grid32):
    e1 = minimize(build_spec(grid=grid32, lambda_plus=2.0, lambda_minus=1.0)).energy.total
    e2 = minimize(build_spec(grid=grid32, lambda_plus=4.0, lambda_minus=2.0)).energy.total
    assert e2 == pytest.approx(2 * e1, rel=1e-14)


def test_boundary_values_fixed(sign32):
    spec, res = sign32
    b = spec.grid.boundary_mask[spec.grid.mask]
    assert np.array_equal(res.u.values[b], spec.phi.values[b])


def test_trace_energies_non_increasing(sign32):
    _, res = sign32
    e = np.array([t.energy for t in res.trace])
    assert np.all(np.diff(e) <= 1e-9 * np.abs(e[:-1]))
    eps = [t.eps for t in res.trace]
    assert eps[-1] == 0.0 and all(a > b for a, b in zip(eps, eps[1:]))


def test_energy_below_harmonic_competitor(sign32):
    spec, res = sign32
    harm = solve_dirichlet(spec.A, spec.grid, spec.phi)
    assert res.energy.total <= energy(harm, spec.A, spec.lambda_plus, spec.lambda_minus).total + 1e-12


def test_determinism(grid32):
    spec = build_spec(grid=grid32, boundary="sign_change", coefficients="hoelder_bump", m=0.3)
    a, b = minimize(spec, seed=7), minimize(spec, seed=7)
    assert np.array_equal(a.u.values, b.u.values)
    assert a.to_dict() == b.to_dict()


def test_slab_matches_oracle(slab64):
    spec, res = slab64
    h = spec.grid.h
    sol = solve_1d_exact(0.0, 0.5, 2.0, 1.0)
    fb = extract_free_boundary(res.u)
    inner = fb.points[np.abs(fb.points[:, 0]) < 0.5]
    assert np.max(np.abs(inner[:, 1] - sol.s)) <= 2 * h
    x = spec.grid.coords
    top = (np.abs(x[:, 0]) < 0.3) & (x[:, 1] > 0.65) & (x[:, 1] < 0.85)
    slope = np.polyfit(x[top, 1], res.u.values[top], 1)[0]
    assert slope == pytest.approx(sol.slope_plus, rel=0.02)


def test_invalid_spec_rejected(grid32):
    spec = build_spec(grid=grid32, lambda_plus=1.0, lambda_minus=2.0)
    with pytest.raises(InvalidSpec, match="lambda_minus < lambda_plus"):
        minimize(spec)


def test_schedule_validation():
    with pytest.raises(NonpositiveEpsilon):
        Schedule(eps0=0.0)
    with pytest.raises(ValueError):
        Schedule(factor=1.5)


# -- audit --------------------------------------------------------------------


def test_audit_zero_passes(grid32):
    spec = build_spec(grid=grid32)
    rep = perturbation_audit(ScalarField.constant(grid32, 0.0), spec, trials=40)
    assert rep.passed and rep.measured == 0.0
    assert rep.details["competitors"] == 40 * 9


def test_audit_harmonic_positive_instance(grid32):
    spec = build_spec(grid=grid32)
    phi = ScalarField.from_function(grid32, lambda x: 1.0 + x[:, 0] + x[:, 1])
    spec = type(spec)(**{**spec.__dict__, "phi": phi})
    u = solve_dirichlet(spec.A, grid32, phi)
    assert perturbation_audit(u, spec, trials=40).passed


def test_audit_detects_planted_plateau(slab64):
    spec, res = slab64
    v = res.u.values.copy()
    d = np.linalg.norm(spec.grid.coords - np.array([0.0, 0.8]), axis=1)
    v[d < 0.1] = -0.05
    rep = perturbation_audit(ScalarField(spec.grid, v), spec, trials=40)
    assert not rep.passed
    assert rep.measured > rep.tolerance and rep.witnesses


def test_minimizer_survives_own_audit_with_other_seeds(sign32):
    spec, res = sign32
    for seed in (1, 2):
        assert perturbation_audit(res.u, spec, trials=20, seed=seed).passed
