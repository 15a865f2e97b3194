"""External potentials V, their derivatives and hypothesis checks.

A potential is a polynomial, optionally plus ``c*log|x|`` and/or a scaled
power ``a*|x|**p``.  That class covers the Gaussian ensembles, the quartic
double well and the Kontsevich-Penner field.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

GROWTH_PROBE_POINTS = 10_001


class PotentialDomainError(ValueError):
    """Evaluation at a point excluded from the domain (the origin for log terms)."""


@dataclass(frozen=True)
class Potential:
    """V(x) = sum_k coeffs[k] x**k + log_coeff*log|x| + power_coeff*|x|**power."""

    kind: str
    coeffs: tuple[float, ...] = (0.0,)
    log_coeff: float = 0.0
    power_coeff: float = 0.0
    power: float = 2.0
    params: dict[str, float] = field(default_factory=dict, compare=False)

    @property
    def has_log(self) -> bool:
        return self.log_coeff != 0.0

    @property
    def is_polynomial(self) -> bool:
        return not self.has_log and self.power_coeff == 0.0

    @property
    def degree(self) -> int:
        c = np.trim_zeros(np.asarray(self.coeffs, dtype=float), "b")
        return max(len(c) - 1, 0)

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            raise PotentialDomainError("potential evaluated at a non-finite point")
        if self.has_log and np.any(x == 0.0):
            raise PotentialDomainError(f"{self.kind}: log|x| term excludes the origin")
        return x

    def eval(self, x):
        x = self._check(x)
        out = _horner(self.coeffs, x)
        if self.has_log:
            out = out + self.log_coeff * np.log(np.abs(x))
        if self.power_coeff:
            out = out + self.power_coeff * np.abs(x) ** self.power
        return out

    def deriv(self, x):
        x = self._check(x)
        out = _horner(_pderiv(self.coeffs), x)
        if self.has_log:
            out = out + self.log_coeff / x
        if self.power_coeff:
            p = self.power
            out = out + self.power_coeff * p * np.sign(x) * np.abs(x) ** (p - 1)
        return out

    def deriv2(self, x):
        x = self._check(x)
        out = _horner(_pderiv(_pderiv(self.coeffs)), x)
        if self.has_log:
            out = out - self.log_coeff / x**2
        if self.power_coeff:
            p = self.power
            out = out + self.power_coeff * p * (p - 1) * np.abs(x) ** (p - 2)
        return out

    __call__ = eval

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, **self.params}


def _horner(coeffs, x):
    out = np.zeros_like(x, dtype=float)
    for c in reversed(coeffs):
        out = out * x + c
    return out


def _pderiv(coeffs):
    if len(coeffs) <= 1:
        return (0.0,)
    return tuple(k * c for k, c in enumerate(coeffs) if k > 0)


# -- constructors -------------------------------------------------------------

def quadratic(theta: float) -> Potential:
    """V(x) = theta * x**2."""
    return Potential("quadratic", (0.0, 0.0, float(theta)), params={"theta": float(theta)})


def double_well(c: float) -> Potential:
    """V(x) = x**4/4 + c*x**2/2."""
    return Potential("quartic_double_well", (0.0, 0.0, c / 2.0, 0.0, 0.25), params={"c": float(c)})


def polynomial(coeffs, log_coeff: float = 0.0) -> Potential:
    coeffs = tuple(float(c) for c in coeffs) or (0.0,)
    return Potential("polynomial", coeffs, log_coeff=float(log_coeff),
                     params={"coeffs": list(coeffs), "log_coeff": float(log_coeff)})


def zero() -> Potential:
    return polynomial([0.0])


def power_law(a: float, p: float) -> Potential:
    """V(x) = a*|x|**p; C^2 only for p >= 2."""
    return Potential("power", (0.0,), power_coeff=float(a), power=float(p),
                     params={"a": float(a), "p": float(p)})


def kontsevich_penner(a: float, b: float, c: float) -> Potential:
    """V(x) = a x^4/12 - b x^2/2 - c log|x|."""
    pot = polynomial([0.0, 0.0, -b / 2.0, 0.0, a / 12.0], log_coeff=-c)
    return Potential("kontsevich_penner", pot.coeffs, log_coeff=-float(c),
                     params={"a": float(a), "b": float(b), "c": float(c)})


def from_spec(spec: dict[str, Any]) -> Potential:
    """Build a potential from a config mapping such as ``{"kind": "quadratic", "theta": 0.5}``."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    builders = {
        "quadratic": lambda s: quadratic(s["theta"]),
        "quartic_double_well": lambda s: double_well(s["c"]),
        "double_well": lambda s: double_well(s["c"]),
        "polynomial": lambda s: polynomial(s.get("coeffs", [0.0]), s.get("log_coeff", 0.0)),
        "zero": lambda s: zero(),
        "power": lambda s: power_law(s["a"], s["p"]),
        "kontsevich_penner": lambda s: kontsevich_penner(s["a"], s["b"], s["c"]),
    }
    if kind not in builders:
        raise ValueError(f"unknown potential kind {kind!r}; expected one of {sorted(builders)}")
    try:
        return builders[kind](spec)
    except KeyError as exc:
        err = ValueError(f"potential kind {kind!r} is missing parameter {exc.args[0]!r}")
        err.param = exc.args[0]
        raise err from None


# -- hypothesis checks --------------------------------------------------------

@dataclass
class GrowthReport:
    delta: float
    probe_range: float
    grid_ok: bool
    asymptotic_ok: bool
    pointwise_ok: bool
    min_margin: float
    worst_x: float
    gamma: float
    gamma_x: float

    @property
    def passed(self) -> bool:
        return self.grid_ok and self.asymptotic_ok


def _probe_grid(v: Potential, lo: float, hi: float, n: int = GROWTH_PROBE_POINTS):
    x = np.linspace(lo, hi, n)
    if v.has_log:
        x = x[x != 0.0]
    return x


def check_growth(v: Potential, delta: float, probe_range: float) -> GrowthReport:
    """Probe V(x) >= (1+delta) log(x^2+1) and the one-sided bound -xV'(x) <= gamma(1+x^2).

    ``grid_ok`` looks at the tail |x| >= probe_range/2 of the grid, where the
    inequality is decided (x^2/2 itself dips below (3/2)log(x^2+1) near
    |x| = 1.4); ``pointwise_ok`` records the check over the whole grid.
    """
    if delta <= 0 or probe_range <= 0:
        raise ValueError("delta and probe_range must be positive")
    x = _probe_grid(v, -probe_range, probe_range)
    margin = v.eval(x) - (1.0 + delta) * np.log1p(x**2)
    k = int(np.argmin(margin))
    tail = np.abs(x) >= 0.5 * probe_range
    ratio = -x * v.deriv(x) / (1.0 + x**2)
    g = int(np.argmax(ratio))

    # the leading term decides the tail: anything growing faster than log wins
    if v.power_coeff > 0 and v.power > 0 and v.degree == 0 and not v.has_log:
        asymptotic = True
    else:
        coeffs = np.trim_zeros(np.asarray(v.coeffs, float), "b")
        deg = len(coeffs) - 1
        if deg >= 1:
            asymptotic = deg % 2 == 0 and coeffs[-1] > 0
            if v.power_coeff and v.power > deg:
                asymptotic = v.power_coeff > 0
        elif v.power_coeff and v.power > 0:
            asymptotic = v.power_coeff > 0
        else:
            asymptotic = v.log_coeff > 2.0 * (1.0 + delta)
    return GrowthReport(
        delta=delta,
        probe_range=probe_range,
        grid_ok=bool(np.all(margin[tail] >= 0.0)),
        asymptotic_ok=bool(asymptotic),
        pointwise_ok=bool(margin[k] >= 0.0),
        min_margin=float(margin[k]),
        worst_x=float(x[k]),
        gamma=float(ratio[g]),
        gamma_x=float(x[g]),
    )


def convexity_bound(v: Potential, interval) -> float:
    """Lower bound K with V''(x) >= K on ``interval``.

    Exact for polynomials of degree <= 4 (V'' is then at most quadratic);
    grid minimum otherwise.
    """
    lo, hi = float(interval[0]), float(interval[1])
    if hi < lo:
        raise ValueError("empty interval")
    if v.is_polynomial and v.degree <= 4:
        c2 = _pderiv(_pderiv(v.coeffs))
        cand = [lo, hi]
        if len(c2) == 3 and c2[2] != 0.0:
            vertex = -c2[1] / (2.0 * c2[2])
            if lo <= vertex <= hi:
                cand.append(vertex)
        return float(min(v.deriv2(np.array(cand))))
    x = _probe_grid(v, lo, hi)
    return float(np.min(v.deriv2(x)))
