import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from dysonflow import equilibrium as E
from dysonflow import potentials as P
from dysonflow.free_energy import free_entropy
from dysonflow.measures import GridDensity, wasserstein

CASES = [P.quadratic(0.5), P.quadratic(2.0), P.double_well(-3), P.double_well(-2),
         P.double_well(0), P.double_well(1)]


def test_critical_case_value():
    spec = E.equilibrium_spec(P.double_well(-2))
    assert spec.density(math.sqrt(2)) == pytest.approx(math.sqrt(2) / math.pi, abs=1e-15)


def test_two_cut_support_and_mass():
    spec = E.equilibrium_spec(P.double_well(-3))
    (l1, r1), (l2, r2) = spec.intervals
    assert (l2, r2) == pytest.approx((1.0, math.sqrt(5)))
    assert (l1, r1) == pytest.approx((-math.sqrt(5), -1.0))
    assert spec.mass() == pytest.approx(1.0, abs=1e-8)
    assert spec.density(0.0) == 0.0


def test_one_cut_parameters_at_zero():
    p = E.equilibrium_spec(P.double_well(0)).params
    assert p["a2"] == pytest.approx(4 / math.sqrt(3))
    assert p["b0"] == pytest.approx(math.sqrt(3) / 3)
    assert p["b2"] == 0.5
    # int x^2 sqrt(a^2-x^2) = pi a^4/8, int sqrt(a^2-x^2) = pi a^2/2
    assert p["b2"] * p["a2"] ** 2 / 8 + p["b0"] * p["a2"] / 2 == pytest.approx(1.0, abs=1e-14)


@settings(max_examples=30, deadline=None)
@given(c=st.floats(-1.99, 4.0))
def test_one_cut_unit_mass(c):
    assert E.equilibrium_spec(P.double_well(c)).mass() == pytest.approx(1.0, abs=1e-8)


@settings(max_examples=15, deadline=None)
@given(c=st.floats(-6.0, -2.01))
def test_two_cut_unit_mass(c):
    assert E.equilibrium_spec(P.double_well(c)).mass() == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("v", CASES, ids=lambda v: f"{v.kind}{v.params}")
def test_emitted_density_invariants(v):
    mu = E.equilibrium_density(v)
    assert np.all(mu.rho >= 0)
    assert mu.mass() == pytest.approx(1.0, abs=1e-8)
    assert np.allclose(mu.rho, mu.rho[::-1], atol=1e-12)
    assert np.allclose(mu.x, -mu.x[::-1], atol=1e-12)
    spec = E.equilibrium_spec(v)
    r1 = E.euler_lagrange_residual(mu, v, spec.intervals)
    r2 = E.euler_lagrange_residual(E.equilibrium_density(v, 8192), v, spec.intervals)
    assert r1 <= 5e-3
    assert r2 <= 0.65 * r1


def test_residual_examples():
    sc = E.equilibrium_density(P.quadratic(0.5))
    assert E.euler_lagrange_residual(sc, P.quadratic(0.5)) <= 2e-3
    # inner 90% of [-2, 2] reaches |x| = 1.8 where |x/2 - x| = 0.9
    assert E.euler_lagrange_residual(sc, P.quadratic(1.0)) == pytest.approx(0.9, abs=2e-3)


def test_support_detection_two_cut():
    mu = E.equilibrium_density(P.double_well(-3))
    iv = E.support_intervals(mu)
    assert len(iv) == 2
    assert iv[1][0] == pytest.approx(1.0, abs=2 * mu.h)
    assert E.euler_lagrange_residual(mu, P.double_well(-3)) <= 5e-3


def test_unsupported_kind():
    with pytest.raises(E.EquilibriumNotAvailable):
        E.equilibrium_density(P.kontsevich_penner(1, 1, 1))
    with pytest.raises(E.EquilibriumNotAvailable):
        E.equilibrium_density(P.quadratic(-1.0))


def test_case_continuity():
    crit = E.equilibrium_density(P.double_well(-2))
    for c in (-2.01, -1.99):
        assert wasserstein(2, E.equilibrium_density(P.double_well(c)), crit) <= 0.02


def test_json_sidecar():
    data = json.loads(E.equilibrium_spec(P.double_well(0.5)).to_json())
    for key in ("a", "a2", "b0", "b2", "intervals", "potential"):
        assert key in data
    data = json.loads(E.equilibrium_spec(P.double_well(-3)).to_json())
    assert data["a"] == 1.0 and data["b"] == pytest.approx(math.sqrt(5))


@pytest.mark.parametrize("v", CASES[:1] + CASES[2:], ids=lambda v: f"{v.kind}{v.params}")
def test_minimality_under_perturbation(v):
    rng = np.random.default_rng(17)
    x = np.linspace(-3.5, 3.5, 2049)
    base = E.equilibrium_spec(v).density(x)
    ref = free_entropy(GridDensity(x, base).normalized(), v)
    for _ in range(20):
        c, w, eps = rng.uniform(-2.5, 2.5), rng.uniform(0.1, 1.0), rng.uniform(0.02, 0.5)
        bump = np.sqrt(np.clip(w * w - (x - c) ** 2, 0, None))
        bump /= np.trapezoid(bump, x)
        mix = GridDensity(x, (1 - eps) * base + eps * bump).normalized()
        assert free_entropy(mix, v) >= ref - 1e-6
