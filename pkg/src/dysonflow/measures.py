"""Grid densities, quantile functions and one-dimensional Wasserstein distances."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .series import fmt

DEFAULT_Q = 2048
DEFAULT_M = 4096


@dataclass(frozen=True)
class GridDensity:
    """Density sampled on M+1 uniform nodes, read as its piecewise-linear interpolant."""

    x: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        rho = np.asarray(self.rho, dtype=float)
        if x.ndim != 1 or x.shape != rho.shape or x.size < 2:
            raise ValueError("x and rho must be matching 1-D arrays with >= 2 nodes")
        h = np.diff(x)
        if not np.all(h > 0) or not np.allclose(h, h[0], rtol=1e-6, atol=0):
            raise ValueError("nodes must be uniform and increasing")
        if np.any(rho < 0) or not np.all(np.isfinite(rho)):
            raise ValueError("density values must be finite and nonnegative")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "rho", rho)

    @classmethod
    def from_function(cls, f: Callable, a: float, b: float, m: int = DEFAULT_M,
                      normalize: bool = True) -> "GridDensity":
        x = np.linspace(a, b, m + 1)
        rho = np.clip(np.asarray(f(x), dtype=float), 0.0, None)
        g = cls(x, rho)
        return g.normalized() if normalize else g

    @property
    def h(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def m(self) -> int:
        return self.x.size - 1

    @property
    def support(self) -> tuple[float, float]:
        return float(self.x[0]), float(self.x[-1])

    def mass(self) -> float:
        return float(np.trapezoid(self.rho, self.x))

    def normalized(self) -> "GridDensity":
        return GridDensity(self.x, self.rho / self.mass())

    def integrate(self, f: Callable) -> float:
        return float(np.trapezoid(np.asarray(f(self.x)) * self.rho, self.x))

    def mean(self) -> float:
        return self.integrate(lambda x: x)

    def variance(self) -> float:
        mu = self.mean()
        return self.integrate(lambda x: (x - mu) ** 2)

    def pushforward_linear(self, scale: float, shift: float = 0.0) -> "GridDensity":
        """Density of s*X + c.  Negative scale mirrors the grid."""
        if scale == 0:
            raise ValueError("scale must be nonzero")
        x = scale * self.x + shift
        rho = self.rho / abs(scale)
        if scale < 0:
            x, rho = x[::-1], rho[::-1]
        return GridDensity(x, rho)

    def cdf(self) -> np.ndarray:
        """Cumulative trapezoid mass at the nodes."""
        out = np.zeros_like(self.rho)
        out[1:] = np.cumsum(0.5 * (self.rho[1:] + self.rho[:-1]) * self.h)
        return out

    def to_csv(self, path=None) -> str:
        lines = ["x,rho"] + [f"{fmt(a)},{fmt(b)}" for a, b in zip(self.x, self.rho)]
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    @classmethod
    def from_csv(cls, path) -> "GridDensity":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1])


@dataclass(frozen=True)
class QuantileFunction:
    """Values F^{-1}(q_k) at the midpoint levels q_k = (k - 1/2)/Q."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 1:
            raise ValueError("quantile values must be a non-empty 1-D array")
        if np.any(np.diff(v) < 0):
            raise ValueError("quantile values must be nondecreasing")
        object.__setattr__(self, "values", v)

    @property
    def q(self) -> int:
        return self.values.size

    @property
    def levels(self) -> np.ndarray:
        return midpoint_levels(self.q)


def midpoint_levels(q: int) -> np.ndarray:
    return (np.arange(1, q + 1) - 0.5) / q


def _atoms(source) -> np.ndarray | None:
    if isinstance(source, GridDensity):
        return None
    if isinstance(source, QuantileFunction):
        return source.values
    pos = getattr(source, "positions", None)
    if pos is None:
        pos = getattr(source, "particles", None)
    if pos is None:
        pos = source
    return np.sort(np.asarray(pos, dtype=float).ravel())


def grid_quantiles(g: GridDensity, levels) -> np.ndarray:
    """Invert the exact CDF of the piecewise-linear density."""
    levels = np.asarray(levels, dtype=float)
    cdf = g.cdf()
    total = cdf[-1]
    target = levels * total
    k = np.searchsorted(cdf, target, side="right") - 1
    k = np.clip(k, 0, g.m - 1)
    # within cell k: rho(s) = r0 + slope*s, mass(s) = r0 s + slope s^2 / 2
    r0 = g.rho[k]
    slope = (g.rho[k + 1] - g.rho[k]) / g.h
    need = np.clip(target - cdf[k], 0.0, None)
    disc = np.sqrt(np.maximum(r0 * r0 + 2.0 * slope * need, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(r0 + disc > 0, 2.0 * need / (r0 + disc), 0.0)
    s = np.clip(s, 0.0, g.h)
    return g.x[k] + s


def to_quantiles(source, q: int) -> QuantileFunction:
    """Midpoint quantiles of a particle set, quantile function or grid density."""
    if q < 1:
        raise ValueError("Q must be >= 1")
    atoms = _atoms(source)
    levels = midpoint_levels(q)
    if atoms is None:
        return QuantileFunction(np.maximum.accumulate(grid_quantiles(source, levels)))
    n = atoms.size
    if n == q:
        return QuantileFunction(atoms)
    # left-continuous inverse of the empirical CDF
    idx = np.clip(np.ceil(levels * n).astype(int) - 1, 0, n - 1)
    return QuantileFunction(atoms[idx])


def wasserstein(p: int, mu, nu, q: int | None = None) -> float:
    """W_p via the monotone (quantile) coupling on a common midpoint grid."""
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    if q is None:
        sizes = {a.size for a in (_atoms(mu), _atoms(nu)) if a is not None}
        q = sizes.pop() if len(sizes) == 1 else DEFAULT_Q
    a = to_quantiles(mu, q).values
    b = to_quantiles(nu, q).values
    d = np.abs(a - b)
    if p == 1:
        return float(np.mean(d))
    return float(math.sqrt(np.mean(d * d)))


def silverman_bandwidth(x: np.ndarray) -> float:
    sd = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    return 1.06 * sd * x.size ** (-0.2)


def density_from_particles(state, bandwidth: float | None = None, m: int = DEFAULT_M) -> GridDensity:
    """Gaussian kernel density of a particle set on [min - 3h, max + 3h]."""
    x = _atoms(state)
    if x.size < 2:
        raise ValueError("need at least two particles")
    h = silverman_bandwidth(x) if bandwidth is None else float(bandwidth)
    if not h > 0:
        h = 1e-3 * max(1.0, float(np.max(np.abs(x))))
    grid = np.linspace(x[0] - 3 * h, x[-1] + 3 * h, m + 1)
    rho = np.zeros_like(grid)
    for chunk in np.array_split(x, max(1, x.size // 256)):
        u = (grid[:, None] - chunk[None, :]) / h
        rho += np.exp(-0.5 * u * u).sum(axis=1)
    return GridDensity(grid, rho).normalized()


def densify(particles, m: int = DEFAULT_M) -> GridDensity:
    """Grid density of equally weighted quantile particles from their spacings.

    Nodal values 1/(Q (x_{i+1} - x_{i-1})/2), smoothed once with a [1,2,1]/4
    filter; the end masses 1/(2Q) are closed off by linear ramps to zero.
    """
    x = np.sort(np.asarray(getattr(particles, "particles", particles), dtype=float))
    n = x.size
    if n < 3:
        raise ValueError("need at least three particles")
    rho = np.empty(n)
    rho[1:-1] = 2.0 / (n * (x[2:] - x[:-2]))
    rho[0] = 1.0 / (n * (x[1] - x[0]))
    rho[-1] = 1.0 / (n * (x[-1] - x[-2]))
    sm = rho.copy()
    sm[1:-1] = 0.25 * rho[:-2] + 0.5 * rho[1:-1] + 0.25 * rho[2:]
    left = x[0] - 1.0 / (n * sm[0])
    right = x[-1] + 1.0 / (n * sm[-1])
    nodes = np.concatenate([[left], x, [right]])
    vals = np.concatenate([[0.0], sm, [0.0]])
    grid = np.linspace(left, right, m + 1)
    return GridDensity(grid, np.interp(grid, nodes, vals)).normalized()


def bump_density(center: float = 0.0, width: float = 0.2, m: int = DEFAULT_M) -> GridDensity:
    """Compact semicircle-shaped bump of radius ``width`` (variance width^2/4)."""
    if not width > 0:
        raise ValueError("width must be positive")
    return GridDensity.from_function(
        lambda x: np.sqrt(np.clip(width * width - (x - center) ** 2, 0.0, None)),
        center - width, center + width, m)
