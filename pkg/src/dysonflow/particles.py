"""Euler-Maruyama integrator for generalized Dyson Brownian motion.

    dx_i = sqrt(2/(beta N)) dW_i + (1/N) sum_{j!=i} phi_R(x_i - x_j) dt - V'(x_i)/2 dt

with the truncated kernel phi_R(x) = 1/x for |x| >= 1/R and R^2 x otherwise.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import observables
from ._kernels import log_pair_sum, pair_interaction
from .potentials import Potential
from .series import MetricSeries, fmt

R_FLOOR = 10.0


class ExplosionError(RuntimeError):
    def __init__(self, step_index: int):
        super().__init__(f"non-finite particle position after step {step_index}")
        self.step_index = step_index


class CollisionError(ValueError):
    """Coincident particles: the log interaction is infinite."""


@dataclass(frozen=True)
class ParticleState:
    positions: np.ndarray
    time: float = 0.0
    beta: float = 2.0

    def __post_init__(self):
        x = np.asarray(self.positions, dtype=float)
        if x.ndim != 1 or x.size == 0:
            raise ValueError("positions must be a non-empty 1-D array")
        if x.size > 1 and not np.all(np.diff(x) > 0):
            raise ValueError("positions must be strictly increasing")
        if self.time < 0:
            raise ValueError("time must be nonnegative")
        x.setflags(write=False)
        object.__setattr__(self, "positions", x)

    @property
    def n(self) -> int:
        return self.positions.size


@dataclass(frozen=True)
class SimConfig:
    """dt, step count, truncation radius (None = adaptive) and seeding.

    ``thread_count`` only spreads independent trials over threads; every
    trajectory is computed identically whatever its value.
    """

    dt: float = 1e-3
    steps: int = 1000
    R: float | None = None
    seed: int = 0
    thread_count: int = 1
    noise: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.steps < 0:
            raise ValueError("steps must be nonnegative")
        if self.R is not None and not self.R > 0:
            raise ValueError("R must be positive")
        if self.thread_count < 1:
            raise ValueError("thread_count must be >= 1")


def phi(x, R: float):
    x = np.asarray(x, dtype=float)
    return np.where(np.abs(x) >= 1.0 / R, 1.0 / np.where(x == 0, 1.0, x), R * R * x)


def interaction(positions, R: float = math.inf) -> np.ndarray:
    return pair_interaction(np.ascontiguousarray(positions, dtype=float), float(R))


def drift(state: ParticleState, v: Potential, R: float = math.inf) -> np.ndarray:
    """Per-particle drift with the phi_R kernel."""
    if not R > 0:
        raise ValueError("R must be positive")
    x = state.positions
    return interaction(x, R) - 0.5 * v.deriv(x)


def min_gap(state: ParticleState) -> float:
    if state.n < 2:
        return math.inf
    return float(np.min(np.diff(state.positions)))


def adaptive_R(state: ParticleState, dt: float) -> float:
    """max(R_FLOOR, 2/min_gap), capped at sqrt(N/dt).

    Each truncated pair contributes a linear force of slope R^2/N, so the cap
    keeps dt times that slope at most one.
    """
    cap = math.sqrt(state.n / dt)
    g = min_gap(state)
    r = R_FLOOR if not math.isfinite(g) else max(R_FLOOR, 2.0 / g)
    return min(r, max(cap, R_FLOOR))


def _separate_ties(x: np.ndarray) -> np.ndarray:
    # exact ties after sorting get nudged up by one ulp each, in index order
    bad = np.flatnonzero(np.diff(x) <= 0)
    if bad.size:
        x = x.copy()
        for k in range(1, x.size):
            if x[k] <= x[k - 1]:
                x[k] = np.nextafter(x[k - 1], np.inf)
    return x


def step(state: ParticleState, v: Potential, cfg: SimConfig, rng: np.random.Generator | None = None,
         step_index: int = 0) -> ParticleState:
    """One Euler-Maruyama step, followed by re-sorting."""
    if state.beta < 1:
        warnings.warn("beta < 1: non-collision is not guaranteed", RuntimeWarning, stacklevel=2)
    if cfg.R is None:
        R = adaptive_R(state, cfg.dt)
    else:
        R = cfg.R
        if cfg.dt * R * R > state.n:
            raise ValueError(f"fixed R={R} violates dt*R^2 <= N for N={state.n}")
    x = state.positions
    new = x + drift(state, v, R) * cfg.dt
    if cfg.noise:
        if rng is None:
            raise ValueError("a random generator is required when noise is on")
        new = new + math.sqrt(2.0 * cfg.dt / (state.beta * state.n)) * rng.standard_normal(state.n)
    if not np.all(np.isfinite(new)):
        raise ExplosionError(step_index)
    new = _separate_ties(np.sort(new))
    return ParticleState(new, state.time + cfg.dt, state.beta)


def lyapunov(state: ParticleState, v: Potential) -> float:
    """(1/N) sum V(x_i) - (1/N^2) sum_{i != j} log|x_i - x_j|."""
    x = state.positions
    n = state.n
    if n > 1 and np.min(np.diff(x)) <= 0:
        raise CollisionError("coincident particles")
    return float(np.mean(v.eval(x)) - 2.0 * log_pair_sum(x) / n**2)


def stiffness_warning(state: ParticleState, v: Potential, dt: float) -> float:
    lo, hi = state.positions[0], state.positions[-1]
    grid = np.linspace(lo, hi, 257)
    if v.has_log:
        grid = grid[grid != 0]
    s = float(dt * np.max(np.abs(v.deriv2(grid))))
    if s > 0.1:
        warnings.warn(f"dt*max|V''| = {s:.3g} exceeds 0.1 on the occupied range", RuntimeWarning,
                      stacklevel=3)
    return s


# -- trajectories -------------------------------------------------------------

@dataclass
class Trajectory:
    times: np.ndarray
    positions: np.ndarray  # (slices, N)
    beta: float

    def state(self, k: int) -> ParticleState:
        return ParticleState(self.positions[k], float(self.times[k]), self.beta)

    def __len__(self) -> int:
        return len(self.times)

    def __iter__(self):
        return (self.state(k) for k in range(len(self)))

    def to_csv(self, path=None) -> str:
        n = self.positions.shape[1]
        lines = [",".join(["t"] + [f"x_{i + 1}" for i in range(n)])]
        for t, row in zip(self.times, self.positions):
            lines.append(",".join([fmt(t)] + [fmt(v) for v in row]))
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    @classmethod
    def from_csv(cls, path, beta: float = 2.0) -> "Trajectory":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1:], beta)


def simulate(initial: ParticleState, v: Potential, cfg: SimConfig, save_every: int = 1,
             rng: np.random.Generator | None = None) -> Trajectory:
    """Run ``cfg.steps`` steps, keeping every ``save_every``-th state (and the first)."""
    if save_every < 1:
        raise ValueError("save_every must be >= 1")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    stiffness_warning(initial, v, cfg.dt)
    times = [initial.time]
    snaps = [initial.positions.copy()]
    state = initial
    for k in range(1, cfg.steps + 1):
        state = step(state, v, cfg, rng, step_index=k)
        if k % save_every == 0:
            times.append(state.time)
            snaps.append(state.positions.copy())
    return Trajectory(np.array(times), np.array(snaps), initial.beta)


def run_trials(initial: ParticleState, v: Potential, cfg: SimConfig, trials: int, save_every: int = 1,
               reducer: Callable[[Trajectory], object] | None = None) -> list:
    """Independent replicas seeded ``cfg.seed + k``; results ordered by trial index."""
    def one(k):
        traj = simulate(initial, v, replace(cfg, seed=cfg.seed + k), save_every)
        return reducer(traj) if reducer is not None else traj

    if cfg.thread_count == 1:
        return [one(k) for k in range(trials)]
    with ThreadPoolExecutor(max_workers=cfg.thread_count) as pool:
        return list(pool.map(one, range(trials)))


def observable_series(trajectory: Trajectory | Sequence[ParticleState], f, name: str | None = None,
                      **params) -> MetricSeries:
    """<L_N(t), f> along a run.  Complex-valued f gives ``re``/``im`` columns."""
    tf = observables.get(f, **params)
    if tf.complex_valued:
        out = MetricSeries(name or tf.name, ["t", "re", "im"])
    else:
        out = MetricSeries(name or tf.name, ["t", "value"])
    for s in trajectory:
        val = np.mean(tf.f(s.positions))
        if tf.complex_valued:
            out.append(s.time, float(val.real), float(val.imag))
        else:
            out.append(s.time, float(val))
    return out


def moment_ode(m0: float, beta: float, n: int, t):
    """Solution of m' = 1/(beta N) + (N-1)/(2N) - m for m = <L_N, x^2/2> under V = x^2/2."""
    c = 1.0 / (beta * n) + (n - 1) / (2.0 * n)
    return c + (m0 - c) * np.exp(-np.asarray(t, float))
