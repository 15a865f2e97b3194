"""Closed-form equilibrium measures and the Euler-Lagrange residual.

Covered: V = theta x^2 (semicircle of radius sqrt(2/theta)) and the quartic
double well V = x^4/4 + c x^2/2 in its three regimes.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .measures import DEFAULT_M, GridDensity
from .potentials import Potential
from .transforms import hilbert


class EquilibriumNotAvailable(ValueError):
    pass


@dataclass(frozen=True)
class EquilibriumSpec:
    potential: Potential
    intervals: tuple[tuple[float, float], ...]
    params: dict[str, float] = field(default_factory=dict)

    @property
    def hull(self) -> tuple[float, float]:
        return self.intervals[0][0], self.intervals[-1][1]

    def density(self, x):
        """Exact density (zero off the support)."""
        x = np.asarray(x, dtype=float)
        p = self.params
        kind = p["case"]
        with np.errstate(invalid="ignore"):
            if kind == "semicircle":
                r2 = p["radius"] ** 2
                val = 2.0 / (math.pi * r2) * np.sqrt(np.clip(r2 - x * x, 0.0, None))
            elif kind == "two_cut":
                a2, b2 = p["a2"], p["b2"]
                x2 = x * x
                val = np.abs(x) * np.sqrt(np.clip((x2 - a2) * (b2 - x2), 0.0, None)) / (2 * math.pi)
                val = np.where((x2 > a2) & (x2 < b2), val, 0.0)
            elif kind == "critical":
                val = x * x * np.sqrt(np.clip(4.0 - x * x, 0.0, None)) / (2 * math.pi)
            else:
                a2, b0, b2 = p["a2"], p["b0"], p["b2"]
                val = (b2 * x * x + b0) * np.sqrt(np.clip(a2 - x * x, 0.0, None)) / math.pi
        return val

    def mass(self) -> float:
        """Mass of the exact density by adaptive quadrature (independent of any grid)."""
        tot = 0.0
        for lo, hi in self.intervals:
            val, _ = integrate.quad(self.density, lo, hi, epsabs=1e-13, epsrel=1e-13, limit=200)
            tot += val
        return tot

    def to_json(self) -> str:
        out = {"potential": self.potential.to_dict(),
               "intervals": [list(iv) for iv in self.intervals],
               **{k: v for k, v in self.params.items()}}
        return json.dumps(out, indent=2)


def equilibrium_spec(v: Potential) -> EquilibriumSpec:
    if v.kind == "quadratic":
        theta = v.params["theta"]
        if theta <= 0:
            raise EquilibriumNotAvailable("quadratic potential needs theta > 0")
        r = math.sqrt(2.0 / theta)
        return EquilibriumSpec(v, ((-r, r),), {"case": "semicircle", "radius": r, "a": r})
    if v.kind == "quartic_double_well":
        c = v.params["c"]
        if c < -2:
            a2, b2 = -2.0 - c, 2.0 - c
            a, b = math.sqrt(a2), math.sqrt(b2)
            return EquilibriumSpec(v, ((-b, -a), (a, b)),
                                   {"case": "two_cut", "c": c, "a2": a2, "b2": b2, "a": a, "b": b})
        if c == -2:
            return EquilibriumSpec(v, ((-2.0, 2.0),), {"case": "critical", "c": c, "a": 2.0})
        # printed form b0 = (c + sqrt(c^2/4 + 3))/3; unit mass b2 a^4/8 + b0 a^2/2 = 1
        # holds for every c > -2 (at c = 0: a^2 = 4/sqrt3, b0 = sqrt3/3 gives 1/3 + 2/3).
        a2 = (math.sqrt(4 * c * c + 48) - 2 * c) / 3.0
        b0 = (c + math.sqrt(c * c / 4.0 + 3.0)) / 3.0
        b2 = 0.5
        a = math.sqrt(a2)
        return EquilibriumSpec(v, ((-a, a),), {"case": "one_cut", "c": c, "a2": a2, "a": a,
                                               "b0": b0, "b2": b2})
    raise EquilibriumNotAvailable(f"no closed-form equilibrium for potential kind {v.kind!r}")


def equilibrium_density(v: Potential, m: int = DEFAULT_M) -> GridDensity:
    """Equilibrium density on M+1 nodes spanning the support hull, normalized."""
    spec = equilibrium_spec(v)
    lo, hi = spec.hull
    return GridDensity.from_function(spec.density, lo, hi, m)


def support_intervals(mu: GridDensity, threshold: float = 0.0) -> list[tuple[float, float]]:
    """Maximal runs of positive density, extended to the bounding zero nodes."""
    pos = mu.rho > threshold
    out = []
    k = 0
    n = pos.size
    while k < n:
        if pos[k]:
            j = k
            while j + 1 < n and pos[j + 1]:
                j += 1
            lo = mu.x[max(k - 1, 0)]
            hi = mu.x[min(j + 1, n - 1)]
            out.append((float(lo), float(hi)))
            k = j + 1
        else:
            k += 1
    return out


def euler_lagrange_residual(mu: GridDensity, v: Potential, intervals=None, inner: float = 0.9) -> float:
    """sup |H mu - V'/2| over grid nodes in the inner fraction of each support interval."""
    if intervals is None:
        intervals = support_intervals(mu)
    worst = 0.0
    for lo, hi in intervals:
        mid, half = 0.5 * (lo + hi), 0.5 * inner * (hi - lo)
        sel = mu.x[(mu.x >= mid - half) & (mu.x <= mid + half)]
        if sel.size == 0:
            continue
        if v.has_log:
            sel = sel[sel != 0]
        r = np.abs(hilbert(mu, sel) - 0.5 * v.deriv(sel))
        worst = max(worst, float(np.max(r)))
    return worst
