"""Deterministic quantile-particle solver for the McKean-Vlasov limit.

Q ordered particles carry mass 1/Q each and follow the characteristics

    x_i' = (1/Q) sum_{j != i} 1/(x_i - x_j) - V'(x_i)/2,

the zero-noise GDBM drift.  Time stepping is classical RK4 with substeps
h <= c * min_gap^2 * Q, halved whenever a stage would reorder particles.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._kernels import divided_difference_sum, pair_interaction
from . import observables
from .measures import GridDensity, densify, to_quantiles, wasserstein
from .potentials import Potential, convexity_bound
from .series import MetricSeries

MAX_HALVINGS = 20
# cap for sparse configurations where the gap rule alone allows long steps
H_MAX = 0.01


class StiffnessError(RuntimeError):
    """Step rejected MAX_HALVINGS times in a row."""


@dataclass(frozen=True)
class MeanFieldState:
    particles: np.ndarray
    time: float = 0.0
    potential: Potential | None = None

    def __post_init__(self):
        x = np.asarray(self.particles, dtype=float)
        if x.ndim != 1 or x.size < 2:
            raise ValueError("need Q >= 2 particles")
        if not np.all(np.diff(x) > 0):
            raise ValueError("particles must be strictly increasing")
        x.setflags(write=False)
        object.__setattr__(self, "particles", x)

    @property
    def q(self) -> int:
        return self.particles.size

    @property
    def positions(self) -> np.ndarray:
        return self.particles

    @property
    def density(self) -> GridDensity:
        return densify(self.particles)

    def mean(self) -> float:
        return float(np.mean(self.particles))

    def variance(self) -> float:
        return float(np.var(self.particles))


def from_measure(mu, q: int, v: Potential | None = None, time: float = 0.0) -> MeanFieldState:
    """Midpoint quantiles of a density (or particle set) as the initial state."""
    return MeanFieldState(to_quantiles(mu, q).values.copy(), time, v)


def velocity(x: np.ndarray, v: Potential) -> np.ndarray:
    return pair_interaction(x, math.inf) - 0.5 * v.deriv(x)


def _ordered(x: np.ndarray) -> bool:
    return bool(np.all(np.isfinite(x)) and np.all(np.diff(x) > 0))


def _rk4(x, v, h):
    k1 = velocity(x, v)
    y = x + 0.5 * h * k1
    if not _ordered(y):
        return None
    k2 = velocity(y, v)
    y = x + 0.5 * h * k2
    if not _ordered(y):
        return None
    k3 = velocity(y, v)
    y = x + h * k3
    if not _ordered(y):
        return None
    k4 = velocity(y, v)
    out = x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return out if _ordered(out) else None


def mf_step(state: MeanFieldState, v: Potential, dt: float, c: float = 0.1,
            h_max: float = H_MAX) -> MeanFieldState:
    """Advance by exactly ``dt`` using as many adaptive RK4 substeps as needed."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    x = np.array(state.particles)
    q = x.size
    remaining = dt
    while remaining > 0:
        gap = float(np.min(np.diff(x)))
        h = min(remaining, h_max, c * gap * gap * q)
        # avoid leaving a sliver at the end
        if remaining - h < 1e-3 * h:
            h = remaining
        for _ in range(MAX_HALVINGS + 1):
            nxt = _rk4(x, v, h)
            if nxt is not None:
                break
            h *= 0.5
        else:
            raise StiffnessError(f"step rejected {MAX_HALVINGS} times at t={state.time + dt - remaining}")
        x = nxt
        remaining -= h
    return MeanFieldState(x, state.time + dt, v)


def solve(initial: MeanFieldState, v: Potential, save_times: Sequence[float], c: float = 0.1) -> list[MeanFieldState]:
    """States at each requested time (the initial state is included if t0 is listed)."""
    times = np.asarray(save_times, dtype=float)
    if np.any(np.diff(times) <= 0) or (times.size and times[0] < initial.time):
        raise ValueError("save times must be increasing and not before the initial time")
    out = []
    state = initial
    for t in times:
        if t > state.time:
            state = mf_step(state, v, t - state.time, c)
        out.append(state)
    return out


def mean_drift(state: MeanFieldState, v: Potential) -> float:
    """d/dt of the mean: the interaction cancels pairwise."""
    return float(-0.5 * np.mean(v.deriv(state.particles)))


def weak_form_rhs(x: np.ndarray, v: Potential, tf) -> float:
    """1/2 sum_{i,j} (f'(x_i)-f'(x_j))/(x_i-x_j) / Q^2 - 1/2 mean(V' f')."""
    q = x.size
    fp = np.asarray(tf.df(x), dtype=float)
    fpp = np.asarray(tf.d2f(x), dtype=float)
    dd = divided_difference_sum(np.ascontiguousarray(x), fp, fpp) / (q * q)
    return 0.5 * dd - 0.5 * float(np.mean(v.deriv(x) * fp))


def weak_form_residual(trajectory: Sequence[MeanFieldState], v: Potential, f="x2half",
                       dt: float | None = None, **params) -> MetricSeries:
    """|d/dt <mu, f> - RHS| with a centered difference at interior slices."""
    traj = list(trajectory)
    if len(traj) < 3:
        raise ValueError("weak-form residual needs at least three slices")
    tf = observables.get(f, **params) if isinstance(f, str) else f
    times = np.array([s.time for s in traj])
    if dt is not None and not np.allclose(np.diff(times), dt, rtol=1e-9, atol=1e-12):
        raise ValueError("slice spacing does not match dt")
    vals = np.array([float(np.mean(tf.f(s.particles))) for s in traj])
    out = MetricSeries("weak_form_residual", ["t", "lhs", "rhs", "residual"])
    for k in range(1, len(traj) - 1):
        lhs = (vals[k + 1] - vals[k - 1]) / (times[k + 1] - times[k - 1])
        rhs = weak_form_rhs(traj[k].particles, v, tf)
        out.append(times[k], lhs, rhs, abs(lhs - rhs))
    return out


def _hull(*states: MeanFieldState) -> tuple[float, float]:
    return (min(float(s.particles[0]) for s in states), max(float(s.particles[-1]) for s in states))


def contraction_experiment(mu1_0, mu2_0, v: Potential, T: float, checkpoints: Sequence[float],
                           q: int = 1024, tol: float = 0.05, K: float | None = None):
    """W2 between two evolved initial conditions against exp(-K t) W2(0).

    Returns ``(series, passed)``; series columns are t, w2, bound, ratio.
    """
    s1 = mu1_0 if isinstance(mu1_0, MeanFieldState) else from_measure(mu1_0, q, v)
    s2 = mu2_0 if isinstance(mu2_0, MeanFieldState) else from_measure(mu2_0, q, v)
    if K is None:
        K = convexity_bound(v, _hull(s1, s2))
    times = sorted({0.0, *[float(t) for t in checkpoints if t <= T]})
    a = solve(s1, v, times)
    b = solve(s2, v, times)
    w0 = wasserstein(2, s1.particles, s2.particles)
    out = MetricSeries("contraction", ["t", "w2", "bound", "ratio"])
    passed = True
    for t, x, y in zip(times, a, b):
        w = wasserstein(2, x.particles, y.particles)
        bound = math.exp(-K * t) * w0
        ratio = w / w0 if w0 > 0 else 0.0
        if t > 0 and w > bound * (1 + tol):
            passed = False
        out.append(t, w, bound, ratio)
    return out, passed


def decay_experiment(mu0, v: Potential, checkpoints: Sequence[float], equilibrium: GridDensity,
                     q: int = 1024, tol: float = 0.05, K: float | None = None):
    """W2 and relative free entropy to the equilibrium against exp(-Kt) and exp(-2Kt) envelopes.

    Returns ``(series, passed)``; series columns are t, w2, w2_bound,
    sigma_rel, sigma_bound.
    """
    from .free_energy import free_entropy

    s0 = mu0 if isinstance(mu0, MeanFieldState) else from_measure(mu0, q, v)
    if K is None:
        lo, hi = _hull(s0)
        elo, ehi = equilibrium.support
        K = convexity_bound(v, (min(lo, elo), max(hi, ehi)))
    times = sorted({0.0, *map(float, checkpoints)})
    states = solve(s0, v, times)
    sig_eq = free_entropy(equilibrium, v)
    out = MetricSeries("decay", ["t", "w2", "w2_bound", "sigma_rel", "sigma_bound"])
    w0 = s0_rel = None
    passed = True
    for t, s in zip(times, states):
        w = wasserstein(2, s.particles, equilibrium, s.q)
        rel = free_entropy(s.density, v) - sig_eq
        if w0 is None:
            w0, s0_rel = w, rel
        wb = math.exp(-K * t) * w0
        sb = math.exp(-2 * K * t) * s0_rel
        if t > 0 and (w > wb * (1 + tol) or rel > sb * (1 + tol)):
            passed = False
        out.append(t, w, wb, rel, sb)
    return out, passed


def entropy_series(states: Sequence[MeanFieldState], v: Potential,
                   equilibrium: GridDensity | None = None) -> MetricSeries:
    """Sigma_V of densified states, and W2 to the equilibrium when one is given."""
    from .free_energy import free_entropy

    cols = ["t", "sigma"] + (["w2"] if equilibrium is not None else [])
    out = MetricSeries("entropy", cols)
    for s in states:
        row = [s.time, free_entropy(s.density, v)]
        if equilibrium is not None:
            row.append(wasserstein(2, s.particles, equilibrium, s.q))
        out.append(*row)
    return out


def is_nonincreasing(values, tol: float = 0.0) -> bool:
    return bool(np.all(np.diff(np.asarray(values, dtype=float)) <= tol))
