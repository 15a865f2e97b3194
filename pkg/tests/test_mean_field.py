import math

import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from dysonflow import mean_field as mf
from dysonflow import potentials as P
from dysonflow.equilibrium import equilibrium_density
from dysonflow.measures import bump_density, wasserstein
from dysonflow.series import MetricSeries
from scipy.special import roots_hermite

V2 = P.quadratic(0.5)


def test_state_validation():
    with pytest.raises(ValueError):
        mf.MeanFieldState(np.array([0.0]))
    with pytest.raises(ValueError):
        mf.MeanFieldState(np.array([0.0, 0.0]))


def test_two_particles_free_spreading():
    # gap g obeys g' = 2/(Q g) = 1/g for Q = 2, so g = sqrt(2t + g0^2)
    a = 0.5
    out = mf.mf_step(mf.MeanFieldState(np.array([-a, a])), P.zero(), 1.0)
    assert np.diff(out.particles)[0] == pytest.approx(math.sqrt(2 + 4 * a * a), rel=1e-6)


def test_discrete_equilibrium_is_scaled_hermite_zeros():
    # fixed points of the Q-particle flow for V = x^2/2 are sqrt(2/Q) times Hermite zeros
    q = 64
    zeros = np.sqrt(2 / q) * roots_hermite(q)[0]
    assert np.max(np.abs(mf.velocity(zeros, V2))) <= 1e-10
    st = mf.mf_step(mf.MeanFieldState(zeros), V2, 0.5)
    assert np.max(np.abs(st.particles - zeros)) <= 1e-10


def test_stationarity_drift_shrinks_with_q():
    # quantiles of the continuum law sit O(1/Q) away from the discrete fixed point
    drift = []
    for q in (128, 256):
        s0 = mf.from_measure(equilibrium_density(V2), q, V2)
        (s,) = mf.solve(s0, V2, [1.0])
        drift.append(wasserstein(2, s.particles, s0.particles))
    assert drift[0] <= 4e-3
    assert 0.4 <= drift[1] / drift[0] <= 0.6


def test_variance_relaxes_to_semicircle_variance():
    q = 200
    s0 = mf.from_measure(bump_density(0.0, 0.1), q, V2)
    m0 = s0.variance()
    times = [1.0, 3.0, 8.0]
    for t, s in zip(times, mf.solve(s0, V2, times)):
        # exact for the particle system: m' = (Q-1)/Q - m
        target = (q - 1) / q + (m0 - (q - 1) / q) * math.exp(-t)
        assert s.variance() == pytest.approx(target, abs=1e-7)
    assert s.variance() == pytest.approx(1.0, abs=0.01)


def test_mean_follows_drift_sum():
    v = P.double_well(-1.0)
    s = mf.from_measure(bump_density(0.4, 0.5), 128, v)
    for _ in range(5):
        nxt = mf.mf_step(s, v, 1e-4)
        pred = s.mean() + 1e-4 * 0.5 * (mf.mean_drift(s, v) + mf.mean_drift(nxt, v))
        assert abs(nxt.mean() - pred) <= 1e-8
        s = nxt


def test_stiffness_error(monkeypatch):
    monkeypatch.setattr(mf, "MAX_HALVINGS", 0)
    s = mf.MeanFieldState(np.array([0.0, 1e-3, 1.0]))
    with pytest.raises(mf.StiffnessError):
        mf.mf_step(s, V2, 1.0, c=1e6, h_max=1.0)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10**6), q=st.integers(2, 40))
def test_order_preserved(seed, q):
    rng = np.random.default_rng(seed)
    x = np.sort(rng.normal(size=q) * rng.uniform(0.01, 2))
    if np.min(np.diff(x)) < 1e-6:
        return
    out = mf.solve(mf.MeanFieldState(x), P.double_well(-2.0), [0.05, 0.1])
    for s in out:
        assert np.all(np.diff(s.particles) > 0)


def test_weak_form_examples():
    s0 = mf.from_measure(bump_density(0.0, 0.3), 128, V2)
    traj = mf.solve(s0, V2, np.round(np.arange(0, 0.051, 0.01), 10))
    res = mf.weak_form_residual(traj, V2, "one", dt=0.01)
    assert np.all(res.column("residual") == 0.0)
    with pytest.raises(ValueError):
        mf.weak_form_residual(traj[:2], V2, "one")
    with pytest.raises(ValueError):
        mf.weak_form_residual(traj, V2, "one", dt=0.02)


def test_weak_form_stationary():
    s0 = mf.from_measure(equilibrium_density(V2), 1024, V2)
    traj = mf.solve(s0, V2, [0.0, 1e-3, 2e-3])
    res = mf.weak_form_residual(traj, V2, "bump", center=0.3, width=0.5)
    lhs, rhs, r = res.rows[0][1:]
    assert abs(lhs) <= 1e-3 and abs(rhs) <= 1e-3 and r <= 1e-3


def test_weak_form_refinement_halves():
    res = []
    for q, dt in ((128, 1e-2), (256, 5e-3)):
        s0 = mf.from_measure(bump_density(0.0, 0.5), q, V2)
        traj = mf.solve(s0, V2, [0.5 - dt, 0.5, 0.5 + dt])
        res.append(mf.weak_form_residual(traj, V2, "x2half").rows[0][3])
    assert 0.35 <= res[1] / res[0] <= 0.65


def test_contraction_identical_data():
    mu = bump_density(0.2, 0.3)
    ser, ok = mf.contraction_experiment(mu, mu, V2, 1.0, [0.5, 1.0], q=128)
    assert ok and np.all(ser.column("w2") == 0.0)


def test_contraction_free_case_non_expansive():
    a, b = bump_density(-0.3, 0.2), bump_density(0.4, 0.5)
    ser, ok = mf.contraction_experiment(a, b, P.zero(), 1.0, [0.25, 0.5, 1.0], q=256)
    assert ok
    assert ser.column("bound")[-1] == ser.column("w2")[0]


def test_translates_contract_at_half_rate():
    # the flow moves the mean with velocity -x/2, so translates separate as exp(-t/2)
    a, b = bump_density(-0.5, 0.2), bump_density(0.5, 0.2)
    ser, _ = mf.contraction_experiment(a, b, V2, 1.0, [0.5, 1.0], q=256)
    assert np.allclose(ser.column("ratio"), np.exp(-0.5 * ser.t), atol=1e-6)


def test_entropy_series_decreases():
    v = P.double_well(-1.0)
    s0 = mf.from_measure(bump_density(0.0, 0.5), 256, v)
    states = mf.solve(s0, v, [0.0, 0.25, 0.5, 1.0])
    ser = mf.entropy_series(states, v, equilibrium_density(v))
    assert mf.is_nonincreasing(ser.column("sigma"))
    assert ser.columns == ["t", "sigma", "w2"]


def test_metric_series_rules(tmp_path):
    s = MetricSeries("m", ["t", "a"])
    s.append(0.0, 1.0)
    with pytest.raises(ValueError):
        s.append(0.0, 2.0)
    with pytest.raises(ValueError):
        s.append(1.0)
    with pytest.raises(ValueError):
        MetricSeries("bad", ["a", "t"])
    s.append(0.5, 1e-17)
    s.to_csv(tmp_path / "m.csv")
    back = MetricSeries.from_csv(tmp_path / "m.csv")
    assert back.rows == s.rows
