"""Hilbert, Stieltjes and logarithmic-potential transforms, and the Burgers residual.

Grid densities are read as their piecewise-linear interpolants, for which
all three transforms have closed forms.  Summing the per-cell integrals by
node leaves, at interior node y_j, only the jump in slope
dm_j = m_j - m_{j-1} times a function of (x - y_j) that vanishes at 0; the
principal value needs no excluded neighbourhood.  Only the end nodes carry
log singularities, and they vanish when the density does.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._kernels import pair_interaction
from .measures import GridDensity, _atoms
from .series import MetricSeries

_BLOCK = 512
# multipole branch for |z - c| >= _FAR * r, where [c - r, c + r] is the grid span
_FAR = 3.0
_NTERMS = 40


def _slope_jumps(g: GridDensity) -> np.ndarray:
    m = np.diff(g.rho) / g.h
    return np.diff(np.concatenate([[0.0], m, [0.0]]))


def _xlogx(w):
    aw = np.abs(w)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(aw > 0, w * np.log(np.where(aw > 0, aw, 1.0)), 0.0)


def _safe_log_abs(w):
    aw = np.abs(w)
    with np.errstate(divide="ignore"):
        return np.log(aw)


def _blocked(fn, pts, dtype=float):
    pts = np.asarray(pts)
    flat = pts.ravel()
    out = np.empty(flat.shape, dtype=dtype)
    for s in range(0, flat.size, _BLOCK):
        out[s:s + _BLOCK] = fn(flat[s:s + _BLOCK])
    return out.reshape(pts.shape)


def hilbert(rho: GridDensity, x):
    """Principal value Hrho(x) = PV int rho(y)/(x - y) dy."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("x must be finite")
    dm = _slope_jumps(rho)
    y = rho.x
    r0, rm = rho.rho[0], rho.rho[-1]

    def block(xs):
        w = xs[:, None] - y[None, :]
        val = (_xlogx(w) - w) @ dm
        if r0:
            val = val + r0 * _safe_log_abs(xs - y[0])
        if rm:
            val = val - rm * _safe_log_abs(xs - y[-1])
        return val

    out = _blocked(block, x)
    return float(out) if out.ndim == 0 else out


def log_potential(rho: GridDensity, x):
    """U(x) = int log|x - y| rho(y) dy (no singularity anywhere)."""
    x = np.asarray(x, dtype=float)
    dm = _slope_jumps(rho)
    y = rho.x
    r0, rm = rho.rho[0], rho.rho[-1]

    def kappa(u):
        return 0.5 * _xlogx(u) * u - 0.75 * u * u

    def chi(u):
        return _xlogx(u) - u

    def block(xs):
        u = y[None, :] - xs[:, None]
        val = kappa(u) @ dm
        if rm:
            val = val + rm * chi(u[:, -1])
        if r0:
            val = val - r0 * chi(u[:, 0])
        return val

    out = _blocked(block, x)
    return float(out) if out.ndim == 0 else out


def hilbert_at_particles(state) -> np.ndarray:
    """(1/N) sum_{j != i} 1/(x_i - x_j) for an ordered particle set."""
    x = np.asarray(getattr(state, "positions", getattr(state, "particles", state)), dtype=float)
    if x.size > 1 and np.any(np.diff(np.sort(x)) == 0):
        raise ValueError("duplicate particle positions")
    return pair_interaction(np.ascontiguousarray(x), np.inf)


@dataclass(frozen=True)
class StieltjesSample:
    z: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        z = np.atleast_1d(np.asarray(self.z, dtype=complex))
        g = np.atleast_1d(np.asarray(self.values, dtype=complex))
        if np.any(z.imag == 0):
            raise ValueError("evaluation points must lie off the real axis")
        if np.any(z.imag * g.imag > 0):
            raise ValueError("Im G(z) must have sign opposite to Im z")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "values", g)


def _scaled_moments(g: GridDensity, c: float, r: float, n: int) -> np.ndarray:
    """Exact moments int ((x - c)/r)^k rho(x) dx, k < n, of the piecewise-linear interpolant."""
    nodes, weights = np.polynomial.legendre.leggauss(n // 2 + 2)
    a, b = g.x[:-1], g.x[1:]
    half = 0.5 * (b - a)
    xs = 0.5 * (a + b)[:, None] + half[:, None] * nodes[None, :]
    lam = (xs - a[:, None]) / (b - a)[:, None]
    rho = g.rho[:-1, None] * (1 - lam) + g.rho[1:, None] * lam
    w = (half[:, None] * weights[None, :] * rho).ravel()
    u = ((xs - c) / r).ravel()
    out = np.empty(n)
    p = np.ones_like(u)
    for k in range(n):
        out[k] = np.dot(w, p)
        p = p * u
    return out


def _far_field(g: GridDensity, z: np.ndarray) -> np.ndarray:
    c = 0.5 * (g.x[0] + g.x[-1])
    r = 0.5 * (g.x[-1] - g.x[0])
    mom = _scaled_moments(g, c, r, _NTERMS)
    u = 1.0 / (z - c)
    s = np.zeros_like(u)
    for m in mom[::-1]:
        s = s * (r * u) + m
    return u * s


def stieltjes(mu, z):
    """G(z) = int mu(dx)/(z - x) for a grid density or a particle set."""
    z = np.asarray(z, dtype=complex)
    if np.any(z.imag == 0):
        raise ValueError("Stieltjes transform needs z off the real axis")
    if isinstance(mu, GridDensity):
        dm = _slope_jumps(mu)
        y = mu.x
        r0, rm = mu.rho[0], mu.rho[-1]

        c, r = 0.5 * (y[0] + y[-1]), 0.5 * (y[-1] - y[0])

        def near(zs):
            w = zs[:, None] - y[None, :]
            val = (w * np.log(w) - w) @ dm
            if r0:
                val = val + r0 * np.log(zs - y[0])
            if rm:
                val = val - rm * np.log(zs - y[-1])
            return val

        def block(zs):
            # the log form cancels badly far from the support
            far = np.abs(zs - c) >= _FAR * r
            val = np.empty(zs.shape, dtype=complex)
            if np.any(far):
                val[far] = _far_field(mu, zs[far])
            if not np.all(far):
                val[~far] = near(zs[~far])
            return val
    else:
        x = _atoms(mu)

        def block(zs):
            return np.mean(1.0 / (zs[:, None] - x[None, :]), axis=1)

    out = _blocked(block, z, dtype=complex)
    return complex(out) if out.ndim == 0 else out


def stieltjes_sample(mu, z) -> StieltjesSample:
    return StieltjesSample(z, stieltjes(mu, z))


def semicircle_stieltjes(z, radius: float = 2.0):
    """Closed form for the semicircle of the given radius; branch with G ~ 1/z."""
    z = np.asarray(z, dtype=complex)
    r2 = radius * radius
    root = np.sqrt(z - radius) * np.sqrt(z + radius)
    return 2.0 * (z - root) / r2


def _time_of(m):
    t = getattr(m, "time", None)
    if t is None:
        raise ValueError("trajectory entries need a time; pass times= explicitly")
    return float(t)


def burgers_residual(trajectory: Sequence, theta: float, z_grid, dt: float | None = None,
                     times=None, dz: float = 1e-4) -> MetricSeries:
    """|dG/dt - (theta z - G) dG/dz - theta G| at interior slices of a run with V = theta x^2.

    Centered differences in t (slice spacing ``dt``) and in z; endpoint
    slices are not reported.
    """
    traj = list(trajectory)
    if len(traj) < 3:
        raise ValueError("Burgers residual needs at least three time slices")
    if times is None:
        times = [_time_of(m) for m in traj]
    times = np.asarray(times, dtype=float)
    z = np.atleast_1d(np.asarray(z_grid, dtype=complex))
    if np.any(z.imag == 0):
        raise ValueError("z grid must lie off the real axis")
    if dt is None:
        dt = float(np.mean(np.diff(times)))
    step = dz * np.maximum(1.0, np.abs(z))
    out = MetricSeries("burgers_residual", ["t", "z_re", "z_im", "residual"], strict=False)
    g = [np.atleast_1d(stieltjes(m, z)) for m in traj]
    for k in range(1, len(traj) - 1):
        dg_dt = (g[k + 1] - g[k - 1]) / (times[k + 1] - times[k - 1])
        dg_dz = (np.atleast_1d(stieltjes(traj[k], z + step))
                 - np.atleast_1d(stieltjes(traj[k], z - step))) / (2 * step)
        res = np.abs(dg_dt - (theta * z - g[k]) * dg_dz - theta * g[k])
        for zz, r in zip(z, res):
            out.append(times[k], zz.real, zz.imag, float(r))
    return out
