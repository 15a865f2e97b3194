"""Self-adjoint matrix diffusion dX = sqrt(2/(beta N)) dB - V'(X)/2 dt for beta = 1, 2.

dB is the self-adjoint Gaussian increment with diagonal variance dt and
off-diagonal variance dt/2 (beta = 1) or dt/2 per real and imaginary part
(beta = 2).  With this calibration the eigenvalues follow the GDBM SDE.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .potentials import Potential
from .series import fmt


@dataclass(frozen=True)
class MatrixState:
    matrix: np.ndarray
    time: float = 0.0
    beta: int = 2

    def __post_init__(self):
        a = np.asarray(self.matrix)
        if self.beta not in (1, 2):
            raise ValueError("beta must be 1 or 2")
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("matrix must be square")
        a = a.astype(float if self.beta == 1 else complex)
        if not np.array_equal(a, a.conj().T):
            raise ValueError("matrix must be self-adjoint")
        a.setflags(write=False)
        object.__setattr__(self, "matrix", a)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def zeros(cls, n: int, beta: int = 2) -> "MatrixState":
        return cls(np.zeros((n, n)), 0.0, beta)

    @classmethod
    def diagonal(cls, d, beta: int = 2) -> "MatrixState":
        return cls(np.diag(np.asarray(d, dtype=float)), 0.0, beta)


def hermitize(a: np.ndarray) -> np.ndarray:
    """Mirror the upper triangle onto the lower one; the diagonal is made real."""
    out = np.triu(a, 1)
    out = out + out.conj().T + np.diag(np.diag(a).real)
    return out


def gaussian_increment(n: int, beta: int, dt: float, rng: np.random.Generator) -> np.ndarray:
    """Self-adjoint increment with diagonal variance dt, off-diagonal dt/2 per real component."""
    s = np.sqrt(dt)
    g = rng.standard_normal((n, n))
    if beta == 1:
        return (g + g.T) * 0.5 * s
    h = rng.standard_normal((n, n))
    a = g + 1j * h
    return (a + a.conj().T) * 0.5 * s


def spectral_apply(a: np.ndarray, f: Callable) -> np.ndarray:
    w, u = np.linalg.eigh(a)
    return (u * f(w)) @ u.conj().T


def matrix_step(state: MatrixState, v: Potential, dt: float, rng: np.random.Generator,
                noise: bool = True) -> MatrixState:
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not v.is_polynomial:
        raise ValueError("matrix diffusion needs a polynomial potential")
    n = state.n
    x = state.matrix
    drift = spectral_apply(x, v.deriv)
    new = x - 0.5 * dt * drift
    if noise:
        new = new + np.sqrt(2.0 / (state.beta * n)) * gaussian_increment(n, state.beta, dt, rng)
    new = hermitize(new)
    if state.beta == 1:
        new = new.real
    return MatrixState(new, state.time + dt, state.beta)


def spectrum(state) -> np.ndarray:
    a = state.matrix if isinstance(state, MatrixState) else np.asarray(state)
    return np.linalg.eigvalsh(a)


@dataclass
class SpectrumTrajectory:
    times: np.ndarray
    eigenvalues: np.ndarray

    def to_csv(self, path=None) -> str:
        n = self.eigenvalues.shape[1]
        lines = [",".join(["t"] + [f"lambda_{i + 1}" for i in range(n)])]
        for t, row in zip(self.times, self.eigenvalues):
            lines.append(",".join([fmt(t)] + [fmt(x) for x in row]))
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


def simulate_matrix(initial: MatrixState, v: Potential, dt: float, steps: int, seed: int = 0,
                    save_every: int | None = None, noise: bool = True) -> SpectrumTrajectory:
    rng = np.random.default_rng(seed)
    save_every = save_every or steps or 1
    times = [initial.time]
    eigs = [spectrum(initial)]
    state = initial
    for k in range(1, steps + 1):
        state = matrix_step(state, v, dt, rng, noise)
        if k % save_every == 0:
            times.append(state.time)
            eigs.append(spectrum(state))
    return SpectrumTrajectory(np.array(times), np.array(eigs))


def run_matrix_trials(initial: MatrixState, v: Potential, dt: float, steps: int, trials: int,
                      seed: int = 0, thread_count: int = 1, reducer: Callable | None = None) -> list:
    """Replicas seeded ``seed + k``; final spectra (or ``reducer`` of the trajectory) in trial order."""
    def one(k):
        traj = simulate_matrix(initial, v, dt, steps, seed + k)
        return reducer(traj) if reducer is not None else traj.eigenvalues[-1]

    if thread_count == 1:
        return [one(k) for k in range(trials)]
    with ThreadPoolExecutor(max_workers=thread_count) as pool:
        return list(pool.map(one, range(trials)))
