"""Voiculescu free entropy, free Fisher information, dissipation and HWI checks."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .measures import GridDensity, wasserstein
from .potentials import Potential
from .series import MetricSeries
from .transforms import hilbert, log_potential


def log_energy(rho: GridDensity) -> float:
    """int int log|x - y| rho(x) rho(y) dx dy (inner integral exact, outer trapezoid)."""
    return float(np.trapezoid(log_potential(rho, rho.x) * rho.rho, rho.x))


def _potential_energy(rho: GridDensity, v: Potential) -> float:
    x = rho.x
    mask = rho.rho > 0
    vals = np.zeros_like(x)
    vals[mask] = v.eval(x[mask])
    return float(np.trapezoid(vals * rho.rho, x))


def free_entropy(rho: GridDensity, v: Potential) -> float:
    """Sigma_V = -int int log|x-y| + int V."""
    return -log_energy(rho) + _potential_energy(rho, v)


def fisher_integrand(rho: GridDensity, v: Potential) -> np.ndarray:
    """Nodal values of (H rho - V'/2)^2 rho (zero where rho vanishes)."""
    x = rho.x
    mask = rho.rho > 0
    out = np.zeros_like(x)
    out[mask] = (hilbert(rho, x[mask]) - 0.5 * v.deriv(x[mask])) ** 2 * rho.rho[mask]
    return out


def fisher_info(rho: GridDensity, v: Potential) -> float:
    """I_V = int (H rho - V'/2)^2 rho."""
    return float(np.trapezoid(fisher_integrand(rho, v), rho.x))


def grad_norm_sq(rho: GridDensity, v: Potential) -> float:
    """Squared Wasserstein gradient norm int rho |V' - 2 H rho|^2."""
    x = rho.x
    mask = rho.rho > 0
    vals = np.zeros_like(x)
    vals[mask] = (v.deriv(x[mask]) - 2.0 * hilbert(rho, x[mask])) ** 2 * rho.rho[mask]
    return float(np.trapezoid(vals, x))


@dataclass
class EnergyReport:
    sigma_V: float
    sigma_V_relative: float | None
    fisher_I_V: float
    grad_norm_sq: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def energy_report(rho: GridDensity, v: Potential, reference: GridDensity | None = None) -> EnergyReport:
    s = free_entropy(rho, v)
    rel = None if reference is None else s - free_entropy(reference, v)
    return EnergyReport(s, rel, fisher_info(rho, v), grad_norm_sq(rho, v))


def _times(traj, times):
    if times is not None:
        return np.asarray(times, dtype=float)
    return np.array([float(getattr(m, "time")) for m in traj])


def dissipation_check(trajectory: Sequence[GridDensity], v: Potential, dt: float | None = None,
                      times=None) -> MetricSeries:
    """Centered dSigma/dt against -2 I_V at each interior slice.

    ``trajectory`` holds grid densities at increasing times (``times``) or
    objects carrying ``.time`` and ``.density``.
    """
    traj = list(trajectory)
    if len(traj) < 3:
        raise ValueError("dissipation check needs at least three time slices")
    if times is None and dt is not None and not hasattr(traj[0], "time"):
        times = dt * np.arange(len(traj))
    t = _times(traj, times)
    dens = [getattr(m, "density", m) for m in traj]
    sigma = np.array([free_entropy(d, v) for d in dens])
    out = MetricSeries("dissipation", ["t", "sigma", "dsigma_dt", "minus_two_fisher", "ratio"])
    for k in range(1, len(traj) - 1):
        ds = (sigma[k + 1] - sigma[k - 1]) / (t[k + 1] - t[k - 1])
        m2i = -2.0 * fisher_info(dens[k], v)
        ratio = ds / m2i if m2i != 0 else math.nan
        out.append(t[k], sigma[k], ds, m2i, ratio)
    return out


@dataclass
class HWIReport:
    lhs: float
    rhs: float
    w2: float
    grad_norm: float
    K: float
    tol: float

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return self.slack >= -self.tol


def hwi_check(mu1: GridDensity, mu2: GridDensity, v: Potential, K: float, tol: float = 1e-3,
              q: int = 2048) -> HWIReport:
    """Sigma(mu1) - Sigma(mu2) <= W2 |grad Sigma(mu1)| - K/2 W2^2."""
    lhs = free_entropy(mu1, v) - free_entropy(mu2, v)
    w2 = wasserstein(2, mu1, mu2, q)
    gn = math.sqrt(grad_norm_sq(mu1, v))
    return HWIReport(lhs, w2 * gn - 0.5 * K * w2 * w2, w2, gn, K, tol)
